import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from macrojumps.markov import (RateSet, asymptotic_fidelity, cavity_timescales, fidelity_curve,
                               markov_oracle, no_click_probabilities, prediction_table, rates,
                               toy_timescales, write_prediction_csv, _A)
from macrojumps.models import ModelParams, ParameterError, preset

rate = st.floats(1e-4, 10.0)
eta = st.floats(0.05, 1.0)


def test_toy_timescales_x1():
    ts = toy_timescales(1.0, 1.0, 1e-3)
    assert ts.t_dark == pytest.approx(1000.0)
    assert ts.t_light == pytest.approx(6000.0)
    assert ts.t_click == pytest.approx(2.0)
    assert ts.t_dark / ts.t_light == pytest.approx(1 / 6)


def test_cavity_timescales_fig5a():
    ts = cavity_timescales(preset("fig5a"))
    assert ts.t_dark == pytest.approx(1.333333e5, rel=1e-6)
    assert ts.t_click == pytest.approx(1900.0)
    assert ts.t_light == pytest.approx(410597.4, rel=1e-6)


def test_optimal_regime_ratios():
    p = ModelParams.symmetric(gamma=0.1, omega_M=1e6)
    ts = cavity_timescales(p)
    assert ts.t_dark / ts.t_light == pytest.approx(1 / 3, rel=1e-6)
    assert ts.t_dark / ts.t_click == pytest.approx(64 * p.cooperativity / 9, rel=1e-6)


def test_optimal_rates_match_timescales():
    p = ModelParams.symmetric(gamma=0.1, omega_M=1e6)
    r = rates(p)
    opt = RateSet.optimal(p.cooperativity, r.gamma_C)
    assert r.gamma_L == pytest.approx(opt.gamma_L, rel=1e-6)
    assert r.gamma_D == pytest.approx(opt.gamma_D, rel=1e-6)


def test_rate_validation():
    with pytest.raises(ParameterError):
        RateSet(-1, 1, 1)
    with pytest.raises(ParameterError):
        RateSet(1, 1, 1, eta=2)
    with pytest.raises(ParameterError):
        asymptotic_fidelity(0.0)


def test_fidelity_known_values():
    assert asymptotic_fidelity(1, 1) == pytest.approx(0.866591, abs=1e-6)
    # independent high-precision evaluation
    x = mpmath.mpf(10)
    ref = 3 / (2 * (mpmath.sqrt(256 * x**2 - 48 * x + 9) - 16 * x + 3))
    assert asymptotic_fidelity(10, 1) == pytest.approx(float(ref), rel=1e-14)


@given(st.floats(0.1, 100), st.floats(0.05, 1))
def test_eta_c_invariance(c, e):
    assert asymptotic_fidelity(c * e, 1.0) == pytest.approx(asymptotic_fidelity(c, e), rel=1e-14)


@given(rate, rate, rate, eta, st.floats(0, 50))
def test_probabilities_bounded(gl, gd, gc, e, t):
    r = RateSet(gl, gd, gc, e)
    p0d, p0l = no_click_probabilities(r, t / max(gl, gd, gc))
    assert -1e-12 <= p0d and -1e-12 <= p0l and p0d + p0l <= 1 + 1e-12


@given(rate, rate, rate, eta)
def test_fidelity_ratio_form(gl, gd, gc, e):
    r = RateSet(gl, gd, gc, e)
    t = np.linspace(0.1, 5, 5) / max(gl, gd, gc * e)
    p0d, p0l = no_click_probabilities(r, t)
    assert np.allclose(fidelity_curve(r, t), p0d / (p0d + p0l), rtol=1e-9)


@given(rate, rate, rate, eta)
def test_survival_non_increasing(gl, gd, gc, e):
    r = RateSet(gl, gd, gc, e)
    t = np.linspace(0, 10, 50) / max(gl, gd, gc * e)
    p0d, p0l = no_click_probabilities(r, t)
    assert np.all(np.diff(p0d + p0l) <= 1e-12)


def test_initial_values():
    r = RateSet(0.1, 0.2, 1.0)
    p0d, p0l = no_click_probabilities(r, 0.0)
    assert (p0d, p0l) == (0.0, 1.0)
    assert fidelity_curve(r, 0.0) == 0.0


@given(st.floats(0.5, 100), eta)
def test_fidelity_limit_matches_asymptote(c, e):
    r = RateSet.optimal(c, 1.0, e)
    a = _A(r)
    assert fidelity_curve(r, 50 / a) == pytest.approx(asymptotic_fidelity(c, e), rel=1e-9)


def test_series_branch_continuous():
    # A -> 0 needs the series branch: click rate balanced against the switching rates
    r = RateSet(0.0, 1.0, 1.0)
    assert _A(r) == 0.0
    t = np.array([0.5, 1.0])
    p0d, p0l = no_click_probabilities(r, t)
    assert np.allclose(p0d, 0.0) and np.allclose(p0l, np.exp(-t), rtol=1e-12)
    near = RateSet(1e-12, 1.0, 1.0)
    assert np.allclose(no_click_probabilities(near, 1.0), no_click_probabilities(r, 1.0), atol=1e-10)


def test_oracle_agrees():
    r = RateSet(0.3, 0.5, 2.0, 0.8)
    t = np.linspace(0, 5, 6)
    o = markov_oracle(r, t, 50000, seed=1)
    p0d, p0l = no_click_probabilities(r, t)
    se_d, se_l, _ = o.stderr()
    assert np.all(np.abs(o.p0d - p0d) <= 4 * se_d + 1e-12)
    assert np.all(np.abs(o.p0l - p0l) <= 4 * se_l + 1e-12)


def test_oracle_reproducible():
    r = RateSet(0.3, 0.5, 2.0)
    a = markov_oracle(r, [1.0, 2.0], 1000, seed=3)
    b = markov_oracle(r, [1.0, 2.0], 1000, seed=3)
    assert np.array_equal(a.p0d, b.p0d)


def test_prediction_csv(tmp_path):
    r = rates(preset("fig5a"))
    write_prediction_csv(tmp_path / "m.csv", r, [0, 100, 1000], {"preset": "fig5a"})
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[1] == "t,P0D,P0L,F" and len(lines) == 5
    tab = prediction_table(r, [0.0])
    assert tab["P0L"][0] == 1.0
