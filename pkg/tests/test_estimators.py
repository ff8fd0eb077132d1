import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from macrojumps.estimators import (MarkovFidelityEstimator, TelegraphSegmenter, check_records,
                                   check_time_grid)
from macrojumps.markov import cavity_timescales, fidelity_curve, rates
from macrojumps.models import build_full, preset
from macrojumps.telegraph import InsufficientDataError
from macrojumps.trajectory import run_ensemble, run_trajectory

from conftest import ground


@pytest.fixture(scope="module")
def records():
    b = build_full(preset("fig5a"))
    return run_ensemble(b, ground(b), 1e6, n_traj=60, master_seed=31).records


def test_get_set_params():
    est = TelegraphSegmenter(tau_thresh=5.0)
    assert est.get_params() == {"tau_thresh": 5.0}
    assert clone(est.set_params(tau_thresh=2.0)).tau_thresh == 2.0
    assert MarkovFidelityEstimator().get_params() == {"tau_thresh": 1.0, "eta": None}


def test_segmenter_fit_transform(records):
    seg = TelegraphSegmenter(tau_thresh=19000.0)
    periods = seg.fit_transform(records)
    assert len(periods) == len(records)
    assert seg.stats_.n_dark > 0 and seg.n_records_ == len(records)


def test_not_fitted(records):
    with pytest.raises(NotFittedError):
        TelegraphSegmenter().transform(records)
    with pytest.raises(NotFittedError):
        MarkovFidelityEstimator().predict([1.0])


def test_fidelity_estimator_recovers_rates(records):
    est = MarkovFidelityEstimator(tau_thresh=19000.0).fit(records)
    truth = rates(preset("fig5a"))
    assert est.rates_.gamma_C == pytest.approx(truth.gamma_C, rel=0.05)
    assert est.rates_.gamma_D == pytest.approx(truth.gamma_D, rel=0.35)
    t = np.array([1000.0, 5000.0, 20000.0])
    assert np.allclose(est.predict(t), fidelity_curve(truth, t), atol=0.1)
    s = est.predict_survival(t)
    assert np.all(np.diff(s) < 0)


def test_fidelity_estimator_insufficient(fig5a_full):
    r = run_trajectory(fig5a_full, ground(fig5a_full), 1000.0, seed=1)
    with pytest.raises(InsufficientDataError):
        MarkovFidelityEstimator(tau_thresh=19000.0).fit([r])


def test_validation_helpers(records):
    assert check_records(records[0]) == [records[0]]
    with pytest.raises(ValueError):
        check_records([])
    with pytest.raises(TypeError):
        check_records([1, 2])
    with pytest.raises(TypeError):
        check_records(5)
    assert check_time_grid(3.0).shape == (1,)
    with pytest.raises(ValueError):
        check_time_grid([-1.0])
    with pytest.raises(ValueError):
        check_time_grid([[1.0]])


def test_bad_params(records):
    with pytest.raises(ValueError):
        TelegraphSegmenter(tau_thresh=-1).fit(records)
    with pytest.raises(ValueError):
        MarkovFidelityEstimator(tau_thresh=19000.0, eta=0.0).fit(records)
