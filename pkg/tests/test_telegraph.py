import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from macrojumps.markov import cavity_timescales, no_click_probabilities, rates
from macrojumps.models import build_full, preset
from macrojumps.telegraph import (InsufficientDataError, Period, analyze_records,
                                  conditional_fidelity, default_tau, merge_curves, period_stats,
                                  segment_periods, survival_probability, write_curve_csv,
                                  write_periods_csv)
from macrojumps.trajectory import DetectionPolicy, apply_detection, run_ensemble, run_trajectory

from conftest import ground

click_lists = st.lists(st.floats(0, 1000, allow_nan=False), max_size=60).map(sorted)


def tiles(periods, t_max):
    if periods[0].kind == "undetermined":
        return len(periods) == 1
    return (periods[0].start == 0 and periods[-1].end == t_max
            and all(a.end == b.start for a, b in zip(periods, periods[1:])))


def test_regular_clicks_one_light_period():
    t_c = 1.0
    clicks = np.arange(0.5, 100, t_c / 2)
    periods = segment_periods(clicks, 10 * t_c, t_max=100.0)
    assert [p.kind for p in periods] == ["light"]
    assert not periods[0].complete


def test_single_gap_one_dark_period():
    tau = 1.0
    clicks = np.concatenate([np.arange(0, 10, 0.1), np.arange(30, 40, 0.1)])
    periods = segment_periods(clicks, tau, t_max=40.0)
    dark = [p for p in periods if p.kind == "dark"]
    assert len(dark) == 1
    assert dark[0].start == pytest.approx(9.9) and dark[0].end == pytest.approx(30.0)
    assert dark[0].complete


def test_empty_record_undetermined():
    (p,) = segment_periods([], 1.0, t_max=5.0)
    assert p.kind == "undetermined" and not p.complete


def test_partial_periods_flagged():
    periods = segment_periods([5.0, 5.5, 6.0], 1.0, t_max=10.0)
    assert [(p.kind, p.complete) for p in periods] == [("dark", False), ("light", True), ("dark", False)]


def test_bad_threshold():
    with pytest.raises(ValueError):
        segment_periods([1.0], 0.0, t_max=2.0)


@given(click_lists, st.floats(0.5, 50))
def test_periods_tile_and_alternate(clicks, tau):
    periods = segment_periods(clicks, tau, t_max=1000.0)
    assert tiles(periods, 1000.0)
    kinds = [p.kind for p in periods]
    assert all(a != b for a, b in zip(kinds, kinds[1:]))


@given(click_lists, st.floats(0.5, 50))
def test_segmentation_idempotent(clicks, tau):
    clicks = np.asarray(clicks)
    periods = segment_periods(clicks, tau, t_max=1000.0)
    assume(periods[0].kind != "undetermined")
    assert sum(p.n_clicks for p in periods) == clicks.size
    for p in periods:
        if p.kind == "light":
            inner = clicks[(clicks >= p.first_click) & (clicks <= p.last_click)]
            again = segment_periods(inner - p.first_click, tau, t_max=p.last_click - p.first_click)
            assert [q.kind for q in again] == ["light"]


def _spans(periods, shift=0.0):
    return [(p.kind, round(p.start + shift, 9), round(p.end + shift, 9)) for p in periods]


@given(click_lists, click_lists, st.floats(0.5, 20))
def test_concatenation_at_boundary(a, b, tau):
    assume(len(a) > 1 and len(b) > 1)
    a = np.asarray(a) - a[0]
    b = np.asarray(b) - b[0]
    offset = a[-1] + 3 * tau
    joined = np.concatenate([a, offset + b])
    t_max = offset + b[-1]
    whole = _spans(segment_periods(joined, tau, t_max=t_max))
    left = _spans(segment_periods(a, tau, t_max=a[-1]))
    right = _spans(segment_periods(b, tau, t_max=b[-1]), shift=offset)
    assert whole == left + [("dark", round(a[-1], 9), round(offset, 9))] + right


def test_poisson_false_positive_rate():
    rng = np.random.default_rng(4)
    lam, tau, n = 1.0, 3.0, 200000
    clicks = np.cumsum(rng.exponential(1 / lam, n))
    periods = segment_periods(clicks, tau, t_max=clicks[-1])
    n_dark = sum(p.kind == "dark" for p in periods)
    p = np.exp(-lam * tau)
    expected, sd = (n - 1) * p, np.sqrt((n - 1) * p * (1 - p))
    assert abs(n_dark - expected) < 3 * sd


def test_period_stats_known_values():
    periods = [Period("light", 0, 10, False, 11, 0.0, 10.0), Period("dark", 10, 60, True, 0, 10.0, 60.0),
               Period("light", 60, 70, True, 6, 60.0, 70.0), Period("dark", 70, 100, False, 0, 70.0, None)]
    st = period_stats(periods, tau_thresh=5.0)
    assert st.mean_dark == pytest.approx((45 + 25) / 1)
    assert st.naive_mean_dark == pytest.approx(50)
    assert st.mean_interclick == pytest.approx(20 / 15)
    assert st.mean_light == pytest.approx(20 / 2)


def test_period_stats_absent_fields():
    st = period_stats([Period("undetermined", 0, 5, False)], 1.0)
    assert st.mean_dark is None and "mean_dark" in st.absent
    assert st.mean_light is None and st.mean_interclick is None


@pytest.fixture(scope="module")
def fig5a_ens():
    b = build_full(preset("fig5a"))
    return b, run_ensemble(b, ground(b), 1e6, n_traj=60, master_seed=21, keep_states=True)


def test_fig5a_interclick(fig5a_ens):
    b, ens = fig5a_ens
    _, st = analyze_records(ens.records, default_tau(b))
    assert st.mean_interclick == pytest.approx(1900, rel=0.05)
    assert st.mean_dark_se < st.mean_dark


def test_survival_basic(fig5a_ens):
    _, ens = fig5a_ens
    t = np.linspace(0, 8000, 9)
    s = survival_probability(ens.records, t)
    assert s.value[0] == 1.0
    assert np.all(np.diff(s.value) <= 0)
    assert np.all(s.stderr >= 0)


def test_survival_matches_two_state_model_short_times(fig5a_ens):
    _, ens = fig5a_ens
    t = np.array([0.25, 0.5, 1.0, 1.5]) * 1900
    s = survival_probability(ens.records, t)
    p0d, p0l = no_click_probabilities(rates(preset("fig5a")), t)
    assert np.all(np.abs(s.value - (p0d + p0l)) < 3 * s.stderr + 1e-12)


def test_survival_matches_exact_no_click_evolution(fig5a_ens):
    from macrojumps.evolve import no_click_evolution

    b, ens = fig5a_ens
    t = np.array([0.5, 1, 2, 3, 5]) * 1900
    s = survival_probability(ens.records, t)
    exact, _ = no_click_evolution(b, t)
    assert np.all(np.abs(s.value - exact) < 3 * s.stderr)


def test_fidelity_small_wait_is_small(fig5a_ens):
    b, ens = fig5a_ens
    f = conditional_fidelity(ens.records, b, [1.0])
    assert f.value[0] < 1e-3
    assert f.n[0] > 1000


def test_fidelity_requires_states(fig5a_full):
    r = run_trajectory(fig5a_full, ground(fig5a_full), 1e5, seed=1)
    with pytest.raises(ValueError):
        conditional_fidelity([r], fig5a_full, [10.0])


def test_fidelity_insufficient_data(fig5a_full):
    r = run_trajectory(fig5a_full, ground(fig5a_full), 10.0, seed=1, keep_states=True)
    with pytest.raises(InsufficientDataError):
        conditional_fidelity([r], fig5a_full, [5.0])


def test_fidelity_eta_filter_consistency(fig5a_ens):
    b, ens = fig5a_ens
    tw = [2000.0, 6000.0]
    filtered = [apply_detection(r, 0.5, seed=i) for i, r in enumerate(ens.records)]
    f1 = conditional_fidelity(filtered, b, tw)
    sim = run_ensemble(b, ground(b), 1e6, n_traj=60, master_seed=22, keep_states=True,
                       detection=DetectionPolicy(0.5))
    f2 = conditional_fidelity(sim.records, b, tw)
    assert np.all(np.abs(f1.value - f2.value) < 3 * np.hypot(f1.stderr, f2.stderr))


def test_merge_curves(fig5a_ens):
    b, ens = fig5a_ens
    t = [1000.0, 4000.0]
    whole = survival_probability(ens.records, t)
    parts = merge_curves([survival_probability(ens.records[:30], t),
                          survival_probability(ens.records[30:], t)])
    assert np.allclose(whole.value, parts.value) and np.array_equal(whole.n, parts.n)
    fw = conditional_fidelity(ens.records, b, t)
    fp = merge_curves([conditional_fidelity(ens.records[:30], b, t),
                       conditional_fidelity(ens.records[30:], b, t)])
    assert np.allclose(fw.value, fp.value) and np.allclose(fw.stderr, fp.stderr)


def test_csv_writers(tmp_path):
    periods = [segment_periods([1.0, 2.0, 30.0], 5.0, t_max=40.0)]
    write_periods_csv(tmp_path / "p.csv", periods, {"seed": 1})
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1].startswith("record,kind,start [1/g]")
    write_curve_csv(tmp_path / "c.csv", {"t [1/g]": [0, 1], "P": [1.0, 0.5]}, {"seed": 1})
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "t [1/g],P"
