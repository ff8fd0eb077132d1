"""Monte Carlo quantum-jump trajectories and ensembles.

Seeding: trajectory ``i`` of an ensemble uses
``seed_i = splitmix64(master_seed + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``.
Each trajectory seed feeds ``numpy.random.SeedSequence(seed)``, spawned into
two PCG64 streams: one for jump times and channels, one for detector
decisions.  Physical events therefore do not depend on the efficiency.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from ._kernels import advance, seek_crossing
from .evolve import default_dt
from .models import ModelBundle

SEED_RULE = ("seed_i = splitmix64(master_seed + (i+1)*0x9E3779B97F4A7C15 mod 2^64); "
             "streams = SeedSequence(seed_i).spawn(2) -> PCG64 (dynamics, detection)")
_MASK64 = (1 << 64) - 1
_FINE_LEVELS = 8


class InternalConsistencyError(RuntimeError):
    """All jump weights vanished at a sampled jump time."""


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trajectory_seed(master_seed: int, index: int) -> int:
    return splitmix64((int(master_seed) + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64)


def _streams(seed):
    dyn, det = np.random.SeedSequence(int(seed) & _MASK64).spawn(2)
    return np.random.Generator(np.random.PCG64(dyn)), np.random.Generator(np.random.PCG64(det))


@dataclass(frozen=True)
class DetectionPolicy:
    """Detector efficiency for cavity photons; atomic photons seen only if enabled.

    ``detect_atomic=None`` uses the model default (toy model: seen; cavity
    models: not seen).
    """

    eta: float = 1.0
    detect_atomic: bool | None = None

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")

    def click_channels(self, bundle: ModelBundle) -> tuple:
        atomic = bundle.detect_atomic_default if self.detect_atomic is None else self.detect_atomic
        return tuple(c for c in bundle.channels if c in bundle.cavity_channels or atomic)


@dataclass(frozen=True)
class EmissionEvent:
    time: float
    channel: str
    detected: bool


@dataclass
class TrajectoryRecord:
    """Emission record of one trajectory.

    ``states`` (optional) holds the normalised state right after each event,
    which is enough to reconstruct the conditional state at any time.
    """

    seed: int
    t_max: float
    dt: float
    channels: tuple
    click_channels: tuple
    eta: float
    times: np.ndarray
    channel_index: np.ndarray
    detected: np.ndarray
    initial_state: np.ndarray
    params: dict = field(default_factory=dict)
    states: np.ndarray | None = None
    sample_times: np.ndarray | None = None
    snapshots: np.ndarray | None = None

    @property
    def events(self) -> list[EmissionEvent]:
        return [EmissionEvent(float(t), self.channels[c], bool(d))
                for t, c, d in zip(self.times, self.channel_index, self.detected)]

    def __len__(self):
        return self.times.size

    def click_times(self) -> np.ndarray:
        """Times of detected clicks."""
        return self.times[self.detected]

    def channel_mask(self, labels) -> np.ndarray:
        codes = [self.channels.index(c) for c in labels if c in self.channels]
        return np.isin(self.channel_index, codes)

    # -- line-oriented serialisation --------------------------------------
    def to_text(self) -> str:
        header = {"seed": int(self.seed), "t_max": self.t_max, "dt": self.dt, "eta": self.eta,
                  "channels": list(self.channels), "click_channels": list(self.click_channels),
                  "params": self.params, "seed_rule": SEED_RULE}
        lines = ["# " + json.dumps(header, sort_keys=True), "time,channel,detected"]
        lines += [f"{float(t)!r},{self.channels[c]},{int(d)}"
                  for t, c, d in zip(self.times, self.channel_index, self.detected)]
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "TrajectoryRecord":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError("missing record header")
        head = json.loads(lines[0][2:])
        channels = tuple(head["channels"])
        rows = [ln.split(",") for ln in lines[2:] if ln.strip()]
        times = np.array([float(r[0]) for r in rows], dtype=float)
        idx = np.array([channels.index(r[1]) for r in rows], dtype=np.int8)
        det = np.array([r[2] == "1" for r in rows], dtype=bool)
        return cls(seed=head["seed"], t_max=head["t_max"], dt=head["dt"], channels=channels,
                   click_channels=tuple(head["click_channels"]), eta=head["eta"], times=times,
                   channel_index=idx, detected=det, initial_state=np.array([]),
                   params=head.get("params", {}))

    @classmethod
    def read(cls, path) -> "TrajectoryRecord":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _params_dict(bundle):
    p = bundle.params
    return p.to_dict() if hasattr(p, "to_dict") else {}


class _Engine:
    """Cached propagator ladder for one bundle."""

    def __init__(self, bundle: ModelBundle, dt: float, t_max: float):
        self.bundle = bundle
        top = max(0, int(math.ceil(math.log2(max(t_max / dt, 1.0)))))
        exps = np.arange(top, -_FINE_LEVELS - 1, -1)
        self.steps = dt * np.exp2(exps.astype(float))
        h = bundle.h_cond
        self.levels = np.ascontiguousarray(np.stack([expm(-1j * h * s) for s in self.steps]))
        self.h = np.ascontiguousarray(h)
        self.resets = np.ascontiguousarray(np.stack(bundle.resets)) if bundle.resets else None

    def advance(self, psi, duration):
        return advance(self.levels, self.steps, self.h, psi, float(duration))


_ENGINES: dict = {}


def _engine(bundle, dt, t_max):
    key = (id(bundle), dt, t_max)
    eng = _ENGINES.get(key)
    if eng is None or eng.bundle is not bundle:
        if len(_ENGINES) > 16:
            _ENGINES.clear()
        eng = _ENGINES[key] = _Engine(bundle, dt, t_max)
    return eng


def run_trajectory(bundle: ModelBundle, psi0, t_max: float, dt: float | None = None,
                   seed: int = 0, detection: DetectionPolicy | None = None,
                   sample_times=None, keep_states: bool = False) -> TrajectoryRecord:
    """Sample one quantum-jump trajectory on ``[0, t_max]``.

    The unnormalised no-jump state is propagated until its squared norm falls
    below a uniform random number; a channel is then picked with probability
    proportional to ``|R_i psi|^2`` and the state is reset.
    """
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (bundle.dim,):
        raise ValueError(f"psi0 has shape {psi.shape}, bundle dimension is {bundle.dim}")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("psi0 must be normalised")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    detection = detection or DetectionPolicy(eta=getattr(bundle.params, "eta", 1.0))
    dt = default_dt(bundle) if dt is None else float(dt)
    eng = _engine(bundle, dt, float(t_max))
    rng, rng_det = _streams(seed)
    clickable = np.array([c in detection.click_channels(bundle) for c in bundle.channels])
    if sample_times is not None:
        sample_times = np.sort(np.asarray(sample_times, dtype=float))
        snaps = np.empty((sample_times.size, bundle.dim), dtype=complex)
    next_sample = 0

    times, chans, states = [], [], []
    t = 0.0
    t_last, psi_last = 0.0, psi.copy()
    while True:
        r = rng.random()
        psi_u, t, crossed = seek_crossing(eng.levels, eng.steps, psi_last, r, t_last, float(t_max))
        t_jump = t if crossed else float(t_max)
        if sample_times is not None:
            while next_sample < sample_times.size and sample_times[next_sample] <= t_jump:
                phi = eng.advance(psi_last, sample_times[next_sample] - t_last)
                snaps[next_sample] = phi / np.linalg.norm(phi)
                next_sample += 1
        if not crossed:
            break
        if eng.resets is None:
            raise InternalConsistencyError("norm decayed but the bundle has no reset channels")
        out = eng.resets @ psi_u
        weights = np.einsum("ij,ij->i", out.conj(), out).real
        total = weights.sum()
        if not total > 0:
            raise InternalConsistencyError(f"all jump weights vanish at t={t}")
        k = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
        k = min(k, len(weights) - 1)
        psi_last = out[k] / math.sqrt(weights[k])
        t_last = t
        times.append(t)
        chans.append(k)
        if keep_states:
            states.append(psi_last)

    times = np.asarray(times, dtype=float)
    chans = np.asarray(chans, dtype=np.int8)
    u = rng_det.random(times.size)
    detected = clickable[chans] & (u < detection.eta) if times.size else np.zeros(0, bool)
    return TrajectoryRecord(
        seed=int(seed), t_max=float(t_max), dt=dt, channels=bundle.channels,
        click_channels=detection.click_channels(bundle), eta=detection.eta,
        times=times, channel_index=chans, detected=np.asarray(detected, dtype=bool),
        initial_state=psi.copy(), params=_params_dict(bundle),
        states=np.array(states).reshape(-1, bundle.dim) if keep_states else None,
        sample_times=sample_times, snapshots=snaps if sample_times is not None else None,
    )


def apply_detection(record: TrajectoryRecord, eta: float, seed: int, channels=None) -> TrajectoryRecord:
    """Redraw detector decisions with efficiency ``eta`` on click channels only."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    channels = record.click_channels if channels is None else tuple(channels)
    mask = record.channel_mask(channels)
    u = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & _MASK64))).random(len(record))
    detected = record.detected.copy()
    detected[mask] = u[mask] < eta
    return replace(record, detected=detected, eta=float(eta))


@dataclass
class EnsembleResult:
    records: list
    summary: dict

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _run_one(args):
    bundle, psi0, t_max, dt, seed, detection, sample_times, keep_states = args
    return run_trajectory(bundle, psi0, t_max, dt, seed, detection, sample_times, keep_states)


def default_workers() -> int:
    """Worker count from ``MACROJUMPS_WORKERS`` (default 1)."""
    raw = os.environ.get("MACROJUMPS_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"MACROJUMPS_WORKERS must be a positive integer, got {raw!r}")
    return n


def run_ensemble(bundle: ModelBundle, psi0, t_max: float, dt: float | None = None,
                 n_traj: int = 1, master_seed: int = 0, detection: DetectionPolicy | None = None,
                 sample_times=None, keep_states: bool = False, workers: int | None = None) -> EnsembleResult:
    """Run ``n_traj`` independent trajectories with derived seeds.

    Results are assembled in trajectory order, so the output does not depend
    on ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    workers = default_workers() if workers is None else int(workers)
    dt = default_dt(bundle) if dt is None else float(dt)
    seeds = [trajectory_seed(master_seed, i) for i in range(n_traj)]
    jobs = [(bundle, psi0, t_max, dt, s, detection, sample_times, keep_states) for s in seeds]
    if workers > 1 and n_traj > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=max(1, n_traj // (4 * workers))))
    else:
        records = [_run_one(job) for job in jobs]
    return EnsembleResult(records, summarize(records, master_seed))


def summarize(records, master_seed=None) -> dict:
    """Ensemble-level numbers: click counts, rates and the averaged density matrices."""
    n_clicks = np.array([int(r.detected.sum()) for r in records])
    n_events = np.array([len(r) for r in records])
    t_total = float(sum(r.t_max for r in records))
    summary = {
        "n_traj": len(records),
        "master_seed": master_seed,
        "seed_rule": SEED_RULE,
        "n_events": int(n_events.sum()),
        "n_clicks": int(n_clicks.sum()),
        "click_rate": float(n_clicks.sum() / t_total) if t_total else float("nan"),
    }
    if records and records[0].snapshots is not None:
        snaps = np.stack([r.snapshots for r in records])
        summary["sample_times"] = records[0].sample_times
        summary["rho"] = np.einsum("tsi,tsj->sij", snaps, snaps.conj()) / len(records)
    return summary
