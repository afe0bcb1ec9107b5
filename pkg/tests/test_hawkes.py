import json
import warnings

import numpy as np
import pytest

from oracles import hawkes_intensity_loop

from echoflow.hawkes import (
    EventSeries,
    HawkesModel,
    UnstableModelError,
    build_event_series,
    default_lag_pmf,
    fit,
    fit_influence,
    geometric_p_for_mean,
    geometric_pmf,
    intensities,
    intensity,
    log_likelihood,
    mean_weight_matrix,
    read_events_csv,
    shared_images,
    simulate,
)


def _model(bg, W, D=5):
    K = len(bg)
    return HawkesModel(np.array(bg, float), np.array(W, float), default_lag_pmf(D, K))


# --- binning ---------------------------------------------------------------

def test_binning_example():
    s = build_event_series([(0, 0), (0, 0), (5, 0)])
    assert s.T == 6 and s.counts[0, 0] == 2 and s.counts[5, 0] == 1 and s.counts.sum() == 3


def test_single_event():
    s = build_event_series([(42, "b")], platforms=["a", "b"])
    assert s.T == 1 and s.counts.tolist() == [[0, 1]] and s.t0 == 42


def test_seconds_unit():
    s = build_event_series([(120.0, 0), (179.0, 0), (185.0, 1)], unit="second")
    assert s.t0 == 2 and s.counts.tolist() == [[2, 0], [0, 1]]


def test_empty_events_rejected():
    with pytest.raises(ValueError):
        build_event_series([])


def test_fixture_events_recount(fixture_dir):
    events = read_events_csv(fixture_dir / "events.csv")
    for h, ev in events.items():
        s = build_event_series(ev, ["namo", "twitter"])
        first = min(m for m, _ in ev)
        recount = {}
        for m, p in ev:
            key = (m - first, ["namo", "twitter"].index(p))
            recount[key] = recount.get(key, 0) + 1
        nz = {(int(t), int(k)): int(s.counts[t, k]) for t, k in zip(*np.nonzero(s.counts))}
        assert nz == recount
        assert s.T == max(m for m, _ in ev) - first + 1


# --- lag pmf ---------------------------------------------------------------

@pytest.mark.parametrize("D", [4, 10, 60, 720])
def test_default_pmf_mean(D):
    g = default_lag_pmf(D, 2)
    assert np.allclose(g.sum(axis=2), 1.0)
    assert float(np.arange(1, D + 1) @ g[0, 1]) == pytest.approx(D / 4, rel=1e-9)


def test_geometric_pmf_edges():
    assert geometric_pmf(1.0, 3).tolist() == [1.0, 0.0, 0.0]
    assert geometric_p_for_mean(0.5, 10) == 1.0
    with pytest.raises(ValueError):
        geometric_p_for_mean(6.0, 10)


def test_invalid_model():
    with pytest.raises(ValueError):
        _model([0.1, -0.1], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        HawkesModel(np.ones(2), np.zeros((2, 2)), np.ones((2, 2, 3)))


# --- intensity -------------------------------------------------------------

def test_no_past_events_is_background():
    m = _model([0.3, 0.7], [[0.2, 0.4], [0.1, 0.2]])
    s = EventSeries(np.zeros((4, 2), dtype=int))
    assert [intensity(m, s, t, 1) for t in range(4)] == [0.7] * 4


def test_single_term_expansion():
    m = _model([0.3, 0.7], [[0.2, 0.4], [0.1, 0.2]])
    s = EventSeries([[1, 0], [0, 0]])
    assert intensity(m, s, 1, 1) == pytest.approx(0.7 + 0.4 * m.lag_pmf[0, 1, 0], abs=1e-15)


def test_zero_weights_constant():
    m = _model([0.3, 0.7], np.zeros((2, 2)))
    s = EventSeries(np.random.default_rng(0).poisson(2.0, size=(30, 2)))
    assert np.all(intensities(m, s) == np.array([0.3, 0.7]))


def test_intensity_matches_loop_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        D = int(rng.integers(1, 8))
        G = rng.random((2, 2, D))
        G /= G.sum(axis=2, keepdims=True)
        m = HawkesModel(rng.random(2), rng.random((2, 2)) * 0.4, G)
        s = EventSeries(rng.poisson(0.6, size=(25, 2)))
        vec = intensities(m, s)
        for t in range(s.T):
            for k in range(2):
                want = hawkes_intensity_loop(m.background, m.weights, G, s.counts, t, k)
                assert intensity(m, s, t, k) == pytest.approx(want, abs=1e-12)
                assert vec[t, k] == pytest.approx(want, abs=1e-9)
                assert vec[t, k] >= m.background[k] - 1e-12


def test_intensity_out_of_range():
    m = _model([0.1], [[0.1]])
    with pytest.raises(IndexError):
        intensity(m, EventSeries([[0]]), 1, 0)


# --- simulate --------------------------------------------------------------

def test_poisson_mean_rate():
    s = simulate(_model([0.02], [[0.0]]), 50000, seed=3)
    assert abs(s.counts.sum() / 50000 - 0.02) < 0.05 * 0.02


def test_all_zero_series():
    s = simulate(_model([0.0, 0.0], np.zeros((2, 2))), 1000, seed=1)
    assert not s.counts.any()


def test_simulation_deterministic():
    m = _model([0.05, 0.02], [[0.1, 0.2], [0.1, 0.1]])
    assert np.array_equal(simulate(m, 2000, seed=9).counts, simulate(m, 2000, seed=9).counts)


def test_unstable_rejected():
    with pytest.raises(UnstableModelError):
        simulate(_model([0.1, 0.1], [[0.6, 0.5], [0.5, 0.6]]), 10, seed=0)


def test_branching_identity_counts():
    m = _model([0.05, 0.0], [[0.0, 0.5], [0.0, 0.0]], D=20)
    s = simulate(m, 100000, seed=4)
    n1, n2 = s.counts.sum(axis=0)
    assert abs(n2 / n1 - 0.5) < 0.05


# --- fit -------------------------------------------------------------------

def test_em_monotone_and_flags():
    m = _model([0.05, 0.04], [[0.2, 0.1], [0.15, 0.25]], D=10)
    s = simulate(m, 5000, seed=2)
    f = fit(s, 10, seed=1)
    tr = np.array(f.ll_trace)
    assert np.all(np.diff(tr) >= -1e-9 * np.abs(tr[1:]))
    assert f.log_likelihood == pytest.approx(log_likelihood(f, s), rel=1e-9)
    assert f.converged and f.n_iter <= 500


def test_iteration_cap_warns():
    s = simulate(_model([0.05, 0.04], [[0.2, 0.1], [0.15, 0.25]], D=10), 3000, seed=2)
    with pytest.warns(RuntimeWarning):
        f = fit(s, 10, max_iter=2)
    assert not f.converged and f.n_iter == 2


def test_silent_process_gets_zero_rate():
    s = simulate(_model([0.05, 0.0], np.zeros((2, 2))), 3000, seed=5)
    f = fit(s, 10)
    assert f.background[1] == 0 and not f.weights[1].any() and not f.weights[:, 1].any()


def test_fit_bad_pmf_shape():
    with pytest.raises(ValueError):
        fit(EventSeries([[1, 1], [0, 1]]), 5, lag_pmf=np.ones((2, 2, 4)) / 4)


def test_learned_lag_pmf_stays_normalized():
    m = _model([0.05, 0.04], [[0.2, 0.1], [0.15, 0.25]], D=8)
    s = simulate(m, 4000, seed=6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        f = fit(s, 8, learn_lag_pmf=True)
    assert np.allclose(f.lag_pmf.sum(axis=2), 1.0)
    tr = np.array(f.ll_trace)
    assert np.all(np.diff(tr) >= -1e-9 * np.abs(tr[1:]))


# --- aggregation -----------------------------------------------------------

def test_mean_weight_matrix():
    a = _model([0.1, 0.1], [[0.1, 0.2], [0.3, 0.0]])
    b = _model([0.1, 0.1], [[0.3, 0.0], [0.1, 0.2]])
    assert np.array_equal(mean_weight_matrix([a]).mean_weights, a.weights)
    assert np.allclose(mean_weight_matrix([a, b]).mean_weights, [[0.2, 0.1], [0.2, 0.1]])
    with pytest.raises(ValueError):
        mean_weight_matrix([])
    with pytest.raises(ValueError):
        mean_weight_matrix([a, _model([0.1, 0.1], np.zeros((2, 2)), D=6)])


def test_shared_images_filter():
    ev = {"aa": [(1, "namo"), (3, "twitter")], "bb": [(1, "namo"), (2, "namo")], "cc": [(5, "twitter")]}
    assert shared_images(ev, ["namo", "twitter"]) == ["aa"]


def test_fixture_influence_mean_is_sum_over_count(fixture_dir):
    events = read_events_csv(fixture_dir / "events.csv")
    summaries, per_image = fit_influence(events, ["namo", "twitter"], windows=[720])
    fits = per_image[720]
    assert set(fits) == set(shared_images(events, ["namo", "twitter"]))
    total = np.zeros((2, 2))
    for h in sorted(fits):
        total = total + fits[h].weights
    assert np.allclose(summaries[720].mean_weights, total / len(fits), atol=1e-15)
    d = summaries[720].as_dict()
    assert d["image_count"] == len(fits) and json.dumps(d)
