"""Closed-form light/dark telegraph predictions and a Markov-chain oracle.

All no-click probabilities use the detected click rate ``eta * gamma_C``;
``eta = 1`` recovers the ideal-detector expressions.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .models import ModelParams, ParameterError, ToyParams, derived_rates


@dataclass(frozen=True)
class RateSet:
    """Light->dark rate, dark->light rate, cavity click rate in light, detector efficiency."""

    gamma_L: float
    gamma_D: float
    gamma_C: float
    eta: float = 1.0

    def __post_init__(self):
        for name in ("gamma_L", "gamma_D", "gamma_C"):
            value = getattr(self, name)
            if not value >= 0:
                raise ParameterError(f"{name} must be non-negative, got {value!r}")
        if not 0 <= self.eta <= 1:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta!r}")

    @property
    def click_rate(self) -> float:
        """Detected click rate within a light period."""
        return self.eta * self.gamma_C

    @classmethod
    def optimal(cls, C: float, gamma_C: float = 1.0, eta: float = 1.0) -> "RateSet":
        """Rates for ``y -> 0`` and ``gamma0 = gamma1``: ``gamma_L = 3 gamma_C/(64C)``, ``gamma_D = 9 gamma_C/(64C)``."""
        return cls(3 * gamma_C / (64 * C), 9 * gamma_C / (64 * C), gamma_C, eta)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Timescales:
    t_dark: float
    t_light: float
    t_click: float

    def to_dict(self):
        return asdict(self)


def toy_timescales(x: float, gamma_L: float, gamma_D: float) -> Timescales:
    """Mean dark length, light length and time between photons for the toy model."""
    if gamma_D <= 0 or gamma_L <= 0:
        raise ParameterError("gamma_L and gamma_D must be positive")
    if x < 0:
        raise ParameterError("x must be non-negative")
    poly = 1 + 2 * x**2 + 3 * x**4
    t_click = poly / ((x**2 + 2 * x**4) * gamma_L) if x > 0 else math.inf
    t_light = poly / (x**4 * gamma_D) if x > 0 else math.inf
    return Timescales(t_dark=1.0 / gamma_D, t_light=t_light, t_click=t_click)


def toy_timescales_from(p: ToyParams) -> Timescales:
    return toy_timescales(p.x, p.gamma_L, p.gamma_D)


def cavity_timescales(p: ModelParams) -> Timescales:
    r = derived_rates(p)
    y2 = r.y**2
    w = p.omega_L**2
    g2 = p.g**2
    if w == 0 or g2 == 0:
        raise ParameterError("omega_L and g must be non-zero")
    denom_light = 2 * p.gamma0 + (1 + 8 * y2) * p.gamma1
    denom_dark = 2 * p.gamma0 + p.gamma1
    if denom_light == 0 or denom_dark == 0:
        raise ParameterError("atomic decay rates vanish; light/dark lengths diverge")
    return Timescales(
        t_dark=8 * p.delta**2 / (denom_dark * w),
        t_light=(3 + 16 * y2 + 16 * y2**2) * 8 * p.delta**2 / (denom_light * w),
        t_click=(3 + 4 * y2) * p.kappa * p.delta**2 / (4 * w * g2),
    )


def rates_from_timescales(ts: Timescales, eta: float = 1.0) -> RateSet:
    return RateSet(1 / ts.t_light, 1 / ts.t_dark, 1 / ts.t_click, eta)


def rates(p: ModelParams, eta: float | None = None) -> RateSet:
    """Two-state rates of the cavity model; ``eta`` defaults to ``p.eta``."""
    return rates_from_timescales(cavity_timescales(p), p.eta if eta is None else eta)


def _sinh_over(a, t):
    """``sinh(a t) / a`` with a series below ``|a t| < 1e-4``."""
    z = a * t
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, a)
    z2 = z * z
    series = t * (1 + z2 / 6 + z2**2 / 120 + z2**3 / 5040)
    return np.where(small, series, np.sinh(z) / safe)


def _A(r: RateSet) -> float:
    c = r.click_rate
    disc = (c + r.gamma_D + r.gamma_L) ** 2 - 4 * c * r.gamma_D
    return 0.5 * math.sqrt(max(disc, 0.0))


def no_click_probabilities(r: RateSet, t):
    """``(P_0D(t), P_0L(t))``: no detected click in ``(0, t)`` and dark / light at ``t``.

    Starts from a click inside a light period.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    c = r.click_rate
    a = _A(r)
    total = c + r.gamma_D + r.gamma_L
    damp = np.exp(-0.5 * total * t)
    so = _sinh_over(a, t)
    p0d = r.gamma_L * so * damp
    p0l = (np.cosh(a * t) - 0.5 * (r.gamma_L + c - r.gamma_D) * so) * damp
    return p0d, p0l


def fidelity_curve(r: RateSet, t):
    """``F(t) = P_0D / (P_0D + P_0L)`` in its closed single-fraction form."""
    t = np.asarray(t, dtype=float)
    a = _A(r)
    so = _sinh_over(a, t)
    num = 2 * r.gamma_L * so
    den = 2 * np.cosh(a * t) - (r.click_rate - r.gamma_D - r.gamma_L) * so
    return num / den


def asymptotic_fidelity(C: float, eta: float = 1.0) -> float:
    """Long-time fidelity in the optimal regime; depends on ``eta * C`` only."""
    if not C > 0:
        raise ParameterError(f"C must be positive, got {C!r}")
    if not 0 < eta <= 1:
        raise ParameterError(f"eta must lie in (0, 1], got {eta!r}")
    x = eta * C
    return 3.0 / (2.0 * (math.sqrt(256 * x * x - 48 * x + 9) - 16 * x + 3))


@dataclass
class OracleCurves:
    t: np.ndarray
    p0d: np.ndarray
    p0l: np.ndarray
    fidelity: np.ndarray
    n_samples: int

    def stderr(self):
        """Binomial standard errors of ``p0d``, ``p0l`` and the ratio ``fidelity``."""
        n = self.n_samples
        se_d = np.sqrt(self.p0d * (1 - self.p0d) / n)
        se_l = np.sqrt(self.p0l * (1 - self.p0l) / n)
        n_surv = np.rint((self.p0d + self.p0l) * n)
        with np.errstate(invalid="ignore", divide="ignore"):
            se_f = np.sqrt(self.fidelity * (1 - self.fidelity) / n_surv)
        return se_d, se_l, se_f


def markov_oracle(r: RateSet, t_grid, n_samples: int, seed: int = 0) -> OracleCurves:
    """Event-driven simulation of the two-state chain with Poisson clicks in the light state.

    Each sample starts in the light state right after a click and is followed
    until its first detected click or past the last grid time.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    t_grid = np.asarray(t_grid, dtype=float)
    t_end = float(t_grid.max()) if t_grid.size else 0.0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    c = r.click_rate
    out_light = r.gamma_L + c

    first_click = np.full(n_samples, np.inf)
    # alternating holding intervals; dark[i] counts time boundaries for sample i
    switch_times = [[] for _ in range(n_samples)]
    t = np.zeros(n_samples)
    active = np.arange(n_samples)
    while active.size:
        # light holding: competing exponentials (click vs switch to dark)
        if out_light > 0:
            hold = rng.exponential(1.0 / out_light, active.size)
        else:
            hold = np.full(active.size, np.inf)
        is_click = rng.random(active.size) * out_light < c
        t_ev = t[active] + hold
        clicked = is_click & (t_ev <= t_end)
        first_click[active[clicked]] = t_ev[clicked]
        go_dark = (~is_click) & (t_ev <= t_end)
        idx = active[go_dark]
        for i, te in zip(idx, t_ev[go_dark]):
            switch_times[i].append(te)
        if r.gamma_D > 0:
            back = t_ev[go_dark] + rng.exponential(1.0 / r.gamma_D, idx.size)
        else:
            back = np.full(idx.size, np.inf)
        still = back <= t_end
        for i, tb in zip(idx[still], back[still]):
            switch_times[i].append(tb)
        t[idx[still]] = back[still]
        active = idx[still]

    p0d = np.empty(t_grid.size)
    p0l = np.empty(t_grid.size)
    sw_count = np.empty((n_samples, t_grid.size), dtype=int)
    for i, sw in enumerate(switch_times):
        sw_count[i] = np.searchsorted(np.asarray(sw), t_grid, side="right") if sw else 0
    alive = first_click[:, None] > t_grid[None, :]
    dark = sw_count % 2 == 1
    p0d[:] = np.mean(alive & dark, axis=0)
    p0l[:] = np.mean(alive & ~dark, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        fid = p0d / (p0d + p0l)
    return OracleCurves(t_grid, p0d, p0l, fid, n_samples)


def prediction_table(r: RateSet, t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    p0d, p0l = no_click_probabilities(r, t_grid)
    return {"t": t_grid, "P0D": p0d, "P0L": p0l, "F": fidelity_curve(r, t_grid)}


def write_prediction_csv(path, r: RateSet, t_grid, meta: dict | None = None):
    """Columns ``t, P0D, P0L, F`` after a ``#`` header carrying the rate set."""
    table = prediction_table(r, t_grid)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps({"rates": r.to_dict(), **(meta or {})}, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "P0D", "P0L", "F"])
        for row in zip(*(table[k] for k in ("t", "P0D", "P0L", "F"))):
            w.writerow([repr(float(v)) for v in row])
