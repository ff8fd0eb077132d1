import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from macrojumps.hilbert import SpaceSpec, state_vector
from macrojumps.models import (BELL_CHANNELS, ConfigurationError, ModelParams, ParameterError,
                               RegimeWarning, ToyParams, UnsupportedConfigurationError,
                               build_effective, build_full, build_toy, check_regime,
                               derived_rates, eliminate_to_ground, preset, to_bell_basis)

positive = st.floats(0.01, 5.0)


def test_presets_cooperativity():
    assert preset("fig5a").cooperativity == pytest.approx(10.0)
    assert preset("fig5b").cooperativity == pytest.approx(1.0)
    assert preset("fig6").cooperativity == pytest.approx(20.0)


def test_unknown_preset():
    with pytest.raises(KeyError):
        preset("fig7")


def test_parameter_validation():
    with pytest.raises(ParameterError):
        ModelParams(kappa=-1.0)
    with pytest.raises(ParameterError):
        ModelParams(eta=1.5)
    with pytest.raises(ParameterError):
        ToyParams(gamma_D=-1e-3)


def test_full_needs_photons():
    with pytest.raises(ConfigurationError):
        build_full(ModelParams(n_max=0))


def test_effective_rejects_asymmetry():
    with pytest.raises(UnsupportedConfigurationError):
        build_effective(ModelParams.symmetric(delta_g=0.1))


@given(positive, positive, positive)
def test_toy_sum_rule(om, gl, gd):
    assert build_toy(ToyParams(om, gl, gd)).sum_rule_residual() < 1e-12


@given(st.floats(0.2, 2), st.floats(0.2, 2), st.floats(0.01, 1), st.floats(0.01, 0.2),
       st.floats(5, 80), st.floats(-0.4, 0.4))
def test_full_sum_rule(g, kappa, gamma, om, delta, dg):
    p = ModelParams.symmetric(g=g, kappa=kappa, gamma=gamma, omega_M=om, delta=delta, delta_g=dg)
    b = build_full(p)
    assert b.sum_rule_residual() < 1e-12
    assert to_bell_basis(b).sum_rule_residual() < 1e-12


def test_bell_channels(fig5a_bell):
    assert fig5a_bell.channels == BELL_CHANNELS
    assert fig5a_bell.basis == "bell"


def test_bell_reset_signs(fig5a_bell):
    # R_02 carries -sqrt(Gamma0)/sqrt2 on |a01><s12| and R_01 on |a01><a12|
    p = preset("fig5a")
    spec = SpaceSpec(p.n_max)
    a01 = state_vector("a01,0", spec, basis="bell")
    s12 = state_vector("s12,0", spec, basis="bell")
    a12 = state_vector("a12,0", spec, basis="bell")
    r01, r02 = fig5a_bell.reset("R_01"), fig5a_bell.reset("R_02")
    assert a01.conj() @ r02 @ s12 == pytest.approx(-np.sqrt(p.gamma0 / 2))
    assert a01.conj() @ r01 @ a12 == pytest.approx(-np.sqrt(p.gamma0 / 2))


def test_dark_state_is_dark(fig5a_full):
    d = fig5a_full.dark_state
    assert np.linalg.norm(fig5a_full.reset("CAV") @ d) < 1e-14


def test_effective_sum_rule(fig5a_eff):
    assert fig5a_eff.h_cond.shape == (4, 4)
    assert fig5a_eff.sum_rule_residual() < 1e-12
    assert fig5a_eff.meta["excited_admixture"] == pytest.approx(1 / (4 * 50.0**2))


def test_elimination_matches_effective(fig5a_bell, fig5a_eff):
    h = eliminate_to_ground(fig5a_bell)
    he = fig5a_eff.h_cond
    # compare up to the common energy offset
    shift = np.trace(h - he) / 4
    diff = h - he - shift * np.eye(4)
    assert np.max(np.abs(diff)) / np.max(np.abs(he)) < 5e-3


def test_derived_rates_fig5a():
    r = derived_rates(preset("fig5a"))
    assert r.C == pytest.approx(10.0)
    assert r.y == pytest.approx(-0.1)


def test_derived_rates_zero_divisor():
    with pytest.raises(ParameterError, match="omega_M"):
        derived_rates(ModelParams.symmetric(omega_M=0.0))


def test_regime_clean_for_figures():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_regime(preset("fig5a")) == []
        assert check_regime(preset("fig6")) == []


def test_regime_warns_bad_cavity():
    with pytest.warns(RegimeWarning):
        msgs = check_regime(preset("fig5b"))
    assert msgs


def test_without_channels(fig5a_full):
    b = fig5a_full.without_channels(fig5a_full.slow_channels)
    assert b.channels == ("CAV",)
    assert b.sum_rule_residual() < 1e-12
