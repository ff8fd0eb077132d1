"""Light/dark segmentation of click records and the observables built on it.

A silent gap longer than ``tau_thresh`` between detected clicks is a dark
period bounded by those two clicks; everything else is light.  Periods
touching either end of the record are flagged partial.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .models import ModelBundle
from .trajectory import TrajectoryRecord, _engine


class InsufficientDataError(RuntimeError):
    """No conditioning events or periods to estimate from."""


@dataclass(frozen=True)
class Period:
    kind: str  # "light", "dark" or "undetermined"
    start: float
    end: float
    complete: bool
    n_clicks: int = 0
    first_click: float | None = None
    last_click: float | None = None

    @property
    def duration(self) -> float:
        return self.end - self.start


def _click_times(record) -> np.ndarray:
    if isinstance(record, TrajectoryRecord):
        return np.sort(record.click_times())
    return np.sort(np.asarray(record, dtype=float))


def segment_periods(record, tau_thresh: float, t_max: float | None = None) -> list[Period]:
    """Split a record into alternating light and dark periods.

    ``record`` is a :class:`TrajectoryRecord` or an array of click times (then
    ``t_max`` is required).  Only detected clicks are used.
    """
    if not tau_thresh > 0:
        raise ValueError(f"tau_thresh must be positive, got {tau_thresh!r}")
    if isinstance(record, TrajectoryRecord):
        t_max = record.t_max if t_max is None else t_max
    elif t_max is None:
        raise ValueError("t_max is required for a bare click array")
    t_max = float(t_max)
    c = _click_times(record)
    if c.size == 0:
        return [Period("undetermined", 0.0, t_max, False)]

    # split points: indices i where the gap c[i] -> c[i+1] is dark
    gaps = np.diff(c)
    dark_after = np.flatnonzero(gaps > tau_thresh)
    periods = []
    lead_dark = c[0] > tau_thresh
    if lead_dark:
        # the exit at c[0] is seen; the entry is not
        periods.append(Period("dark", 0.0, float(c[0]), False, 0, None, float(c[0])))
    bounds = np.concatenate(([0], dark_after + 1, [c.size]))
    for b, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        first, last = float(c[lo]), float(c[hi - 1])
        start = 0.0 if (b == 0 and not lead_dark) else first
        is_last = b == len(bounds) - 2
        trail_dark = is_last and (t_max - last) > tau_thresh
        end = t_max if (is_last and not trail_dark) else last
        complete = (b > 0 or lead_dark) and (not is_last or trail_dark)
        periods.append(Period("light", start, end, complete, int(hi - lo), first, last))
        if not is_last:
            nxt = float(c[hi])
            periods.append(Period("dark", last, nxt, True, 0, last, nxt))
        elif trail_dark:
            periods.append(Period("dark", last, t_max, False, 0, last, None))
    return periods


@dataclass
class PeriodStats:
    """Period-length estimates over one or more segmented records.

    ``mean_dark`` is the exposure estimator for a threshold-truncated
    exponential: total dark time in excess of ``tau_thresh`` divided by the
    number of observed dark exits.  ``mean_light`` is total light time over
    observed light exits.  Both use partial periods, which complete-only
    averages would bias toward short periods.  ``naive_*`` are plain means of
    complete periods.  Fields are ``None`` when there is nothing to estimate.
    """

    tau_thresh: float
    n_dark: int
    n_light: int
    n_dark_exits: int
    n_light_exits: int
    mean_dark: float | None = None
    mean_light: float | None = None
    mean_dark_se: float | None = None
    mean_light_se: float | None = None
    naive_mean_dark: float | None = None
    naive_mean_light: float | None = None
    mean_interclick: float | None = None
    mean_interclick_se: float | None = None
    n_interclick: int = 0
    absent: list = field(default_factory=list)

    @property
    def ratio_dark_light(self) -> float | None:
        if self.mean_dark is None or self.mean_light is None or self.mean_light == 0:
            return None
        return self.mean_dark / self.mean_light

    def to_dict(self):
        d = asdict(self)
        d["ratio_dark_light"] = self.ratio_dark_light
        return d


def period_stats(periods, tau_thresh: float) -> PeriodStats:
    """Pool period lists (one per record, or a flat list) into :class:`PeriodStats`."""
    flat = []
    for p in periods:
        if isinstance(p, Period):
            flat.append(p)
        else:
            flat.extend(p)
    dark = [p for p in flat if p.kind == "dark"]
    light = [p for p in flat if p.kind == "light"]

    # dark periods end at a click unless they run into the record end
    dark_exits = sum(p.last_click is not None for p in dark)
    dark_excess = sum(max(p.duration - tau_thresh, 0.0) for p in dark)
    # light periods end at their last click only when a dark period follows
    light_exits = sum(p.n_clicks > 0 and p.end == p.last_click for p in light)
    light_time = sum(p.duration for p in light)

    st = PeriodStats(tau_thresh=float(tau_thresh), n_dark=sum(p.complete for p in dark),
                     n_light=sum(p.complete for p in light), n_dark_exits=int(dark_exits),
                     n_light_exits=int(light_exits))
    if dark_exits:
        st.mean_dark = dark_excess / dark_exits
        st.mean_dark_se = st.mean_dark / math.sqrt(dark_exits)
    else:
        st.absent.append("mean_dark")
    if light_exits:
        st.mean_light = light_time / light_exits
        st.mean_light_se = st.mean_light / math.sqrt(light_exits)
    else:
        st.absent.append("mean_light")
    full_dark = [p.duration for p in dark if p.complete]
    full_light = [p.duration for p in light if p.complete]
    st.naive_mean_dark = float(np.mean(full_dark)) if full_dark else None
    st.naive_mean_light = float(np.mean(full_light)) if full_light else None

    span = sum(p.last_click - p.first_click for p in light if p.n_clicks > 1)
    n_int = sum(p.n_clicks - 1 for p in light if p.n_clicks > 1)
    st.n_interclick = int(n_int)
    if n_int:
        st.mean_interclick = span / n_int
        if n_int > 1:
            st.mean_interclick_se = st.mean_interclick / math.sqrt(n_int)
    else:
        st.absent.append("mean_interclick")
    return st


def default_tau(bundle: ModelBundle, eta: float | None = None) -> float:
    """Threshold in predicted interclick times over the detection efficiency.

    Ten interclick times for the cavity models.  The toy model emits bursts
    with a heavier-than-exponential gap tail, so it uses twenty-five.
    """
    from .markov import cavity_timescales, toy_timescales_from
    from .models import ToyParams

    p = bundle.params
    eta = getattr(p, "eta", 1.0) if eta is None else eta
    if not eta > 0:
        raise ValueError("eta must be positive")
    if isinstance(p, ToyParams):
        return 25.0 * toy_timescales_from(p).t_click / eta
    return 10.0 * cavity_timescales(p).t_click / eta


def analyze_records(records, tau_thresh: float) -> tuple[list, PeriodStats]:
    periods = [segment_periods(r, tau_thresh) for r in records]
    return periods, period_stats(periods, tau_thresh)


@dataclass
class Curve:
    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    n: np.ndarray
    extra: dict = field(default_factory=dict)


def _references(record):
    """Detected click times and the time of the next detected click (inf if none)."""
    c = np.sort(record.click_times())
    nxt = np.append(c[1:], np.inf)
    return c, nxt


def survival_probability(records, t_grid) -> Curve:
    """Probability of no detected click in ``(t0, t0 + t)`` given a click at ``t0``.

    Every detected click is a reference; a reference enters the estimate at
    ``t`` only if ``t0 + t`` lies inside its record.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    n = np.zeros(t_grid.size, dtype=np.int64)
    k = np.zeros(t_grid.size, dtype=np.int64)
    for rec in records:
        c, nxt = _references(rec)
        if c.size == 0:
            continue
        window = (c[:, None] + t_grid[None, :]) <= rec.t_max
        alive = (nxt - c)[:, None] > t_grid[None, :]
        n += window.sum(axis=0)
        k += (window & alive).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(n > 0, k / np.maximum(n, 1), np.nan)
        se = np.sqrt(p * (1 - p) / n)
    return Curve(t_grid, p, se, n, {"k": k})


def conditional_fidelity(records, bundle: ModelBundle, t_wait, target=None) -> Curve:
    """Overlap with ``target`` after a click followed by ``t_wait`` without clicks.

    Averages ``|<target|psi(t0 + t_wait)>|^2`` over all reference clicks
    ``t0`` with no detected click in ``(t0, t0 + t_wait]``.  Needs records run
    with ``keep_states=True``; undetected emissions in the window are taken
    into account through the stored post-jump states.
    ``extra["correction"]`` is the additive excited-state admixture
    correction for the effective model (zero otherwise).
    """
    t_wait = np.atleast_1d(np.asarray(t_wait, dtype=float))
    if np.any(t_wait <= 0):
        raise ValueError("t_wait must be positive")
    target = bundle.dark_state if target is None else np.asarray(target, dtype=complex)
    if target is None:
        raise ValueError("bundle has no dark state; pass target explicitly")
    tgt = target.conj() / np.linalg.norm(target)
    sums = np.zeros(t_wait.size)
    sq = np.zeros(t_wait.size)
    n = np.zeros(t_wait.size, dtype=np.int64)
    for rec in records:
        if rec.states is None:
            raise ValueError("records lack post-jump states; run with keep_states=True")
        c, nxt = _references(rec)
        if c.size == 0:
            continue
        eng = _engine(bundle, rec.dt, rec.t_max)
        for j, tw in enumerate(t_wait):
            q = c + tw
            ok = (q <= rec.t_max) & (nxt > q)
            if not ok.any():
                continue
            q = q[ok]
            last = np.searchsorted(rec.times, q, side="right") - 1
            for qi, li in zip(q, last):
                if li < 0:
                    psi0, t0 = rec.initial_state, 0.0
                else:
                    psi0, t0 = rec.states[li], rec.times[li]
                phi = eng.advance(np.ascontiguousarray(psi0), qi - t0)
                f = abs(tgt @ phi) ** 2 / np.vdot(phi, phi).real
                sums[j] += f
                sq[j] += f * f
            n[j] += q.size
    if not n.any():
        raise InsufficientDataError("no conditioning events in any record")
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n > 0, sums / np.maximum(n, 1), np.nan)
        var = np.where(n > 1, (sq - n * mean**2) / np.maximum(n - 1, 1), np.nan)
        se = np.sqrt(np.maximum(var, 0) / n)
    corr = -float(bundle.meta.get("excited_admixture", 0.0))
    return Curve(t_wait, mean, se, n, {"correction": corr, "sum": sums, "sumsq": sq})


def merge_curves(curves) -> Curve:
    """Pool curves computed on disjoint record sets with the same grid."""
    curves = list(curves)
    if not curves:
        raise ValueError("nothing to merge")
    t = curves[0].t
    if any(not np.array_equal(c.t, t) for c in curves):
        raise ValueError("curves use different grids")
    n = sum(c.n for c in curves)
    with np.errstate(invalid="ignore", divide="ignore"):
        if all("k" in c.extra for c in curves):
            k = sum(c.extra["k"] for c in curves)
            p = np.where(n > 0, k / np.maximum(n, 1), np.nan)
            return Curve(t, p, np.sqrt(p * (1 - p) / n), n, {"k": k})
        if all("sum" in c.extra for c in curves):
            s1 = sum(c.extra["sum"] for c in curves)
            s2 = sum(c.extra["sumsq"] for c in curves)
            mean = np.where(n > 0, s1 / np.maximum(n, 1), np.nan)
            var = np.where(n > 1, (s2 - n * mean**2) / np.maximum(n - 1, 1), np.nan)
            extra = {"correction": curves[0].extra.get("correction", 0.0), "sum": s1, "sumsq": s2}
            return Curve(t, mean, np.sqrt(np.maximum(var, 0) / n), n, extra)
    raise ValueError("curves are of different kinds")


def write_periods_csv(path, periods, meta: dict | None = None, time_unit: str = "1/g"):
    """One row per period; ``record`` indexes the source record."""
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta or {}, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(fh)
        w.writerow(["record", "kind", f"start [{time_unit}]", f"end [{time_unit}]",
                    f"duration [{time_unit}]", "complete", "n_clicks"])
        for i, plist in enumerate(periods):
            for p in plist:
                w.writerow([i, p.kind, repr(p.start), repr(p.end), repr(p.duration),
                            int(p.complete), p.n_clicks])


def write_curve_csv(path, columns: dict, meta: dict | None = None):
    """Columns keyed by header (units in the header text), one row per grid point."""
    keys = list(columns)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta or {}, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(fh)
        w.writerow(keys)
        for row in zip(*(np.asarray(columns[k]).ravel() for k in keys)):
            w.writerow([repr(float(v)) for v in row])


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")
