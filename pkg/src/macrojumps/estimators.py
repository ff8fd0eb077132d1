"""Estimator-style wrappers around segmentation and the two-state rate model.

``X`` is always a sequence of :class:`~macrojumps.trajectory.TrajectoryRecord`.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .markov import RateSet, fidelity_curve, no_click_probabilities
from .telegraph import InsufficientDataError, period_stats, segment_periods
from .trajectory import TrajectoryRecord


def check_records(X) -> list:
    """Return ``X`` as a non-empty list of records, or raise ``TypeError``/``ValueError``."""
    if isinstance(X, TrajectoryRecord):
        X = [X]
    try:
        records = list(X)
    except TypeError:
        raise TypeError(f"expected a sequence of TrajectoryRecord, got {type(X).__name__}") from None
    if not records:
        raise ValueError("no records given")
    bad = [type(r).__name__ for r in records if not isinstance(r, TrajectoryRecord)]
    if bad:
        raise TypeError(f"expected TrajectoryRecord items, got {bad[0]}")
    return records


def check_time_grid(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        t = t[None]
    if t.ndim != 1:
        raise ValueError("time grid must be one-dimensional")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("time grid must be finite and non-negative")
    return t


def _check_tau(tau):
    if not (isinstance(tau, (int, float)) and tau > 0):
        raise ValueError(f"tau_thresh must be a positive number, got {tau!r}")


class TelegraphSegmenter(TransformerMixin, BaseEstimator):
    """Threshold segmentation of click records into light and dark periods.

    ``fit`` pools the period statistics into ``stats_``; ``transform`` returns
    one list of :class:`~macrojumps.telegraph.Period` per record.
    """

    def __init__(self, tau_thresh: float = 1.0):
        self.tau_thresh = tau_thresh

    def fit(self, X, y=None):
        _check_tau(self.tau_thresh)
        records = check_records(X)
        periods = [segment_periods(r, self.tau_thresh) for r in records]
        self.stats_ = period_stats(periods, self.tau_thresh)
        self.n_records_ = len(records)
        return self

    def transform(self, X):
        check_is_fitted(self, "stats_")
        return [segment_periods(r, self.tau_thresh) for r in check_records(X)]


class MarkovFidelityEstimator(BaseEstimator):
    """Fit the two-state rates from segmented records and predict ``F(t)``.

    ``gamma_D`` and ``gamma_L`` are the inverse estimated dark and light
    lengths; ``gamma_C`` is recovered from the measured interclick time
    divided by ``eta`` (the records' efficiency when ``eta`` is None).
    """

    def __init__(self, tau_thresh: float = 1.0, eta: float | None = None):
        self.tau_thresh = tau_thresh
        self.eta = eta

    def fit(self, X, y=None):
        _check_tau(self.tau_thresh)
        records = check_records(X)
        eta = records[0].eta if self.eta is None else self.eta
        if not 0 < eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
        st = period_stats([segment_periods(r, self.tau_thresh) for r in records], self.tau_thresh)
        missing = [f for f in ("mean_dark", "mean_light", "mean_interclick") if getattr(st, f) is None]
        if missing:
            raise InsufficientDataError(f"cannot estimate {', '.join(missing)} from these records")
        self.stats_ = st
        self.rates_ = RateSet(1.0 / st.mean_light, 1.0 / st.mean_dark,
                              1.0 / (eta * st.mean_interclick), eta)
        return self

    def predict(self, t):
        """Fidelity ``F(t)`` after a click followed by ``t`` without clicks."""
        check_is_fitted(self, "rates_")
        return fidelity_curve(self.rates_, check_time_grid(t))

    def predict_survival(self, t):
        """Probability of no detected click for ``t`` after a click."""
        check_is_fitted(self, "rates_")
        p0d, p0l = no_click_probabilities(self.rates_, check_time_grid(t))
        return p0d + p0l
