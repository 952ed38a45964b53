import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays

from blockswarm.analysis import (
    ABLATION_COMBINATIONS,
    convergence_trace,
    feature_ablation,
    growth_rate_stats,
    pca_fit_transform,
    tenth_epoch_baseline,
    write_csv,
)
from blockswarm.encoding import BlockSpec
from blockswarm.evaluator import HistoryStore
from blockswarm.pso import Particle, Swarm


def test_rank_one_data():
    rng = np.random.default_rng(0)
    direction = rng.normal(size=5)
    X = rng.normal(size=(40, 1)) * direction + rng.normal(size=5)
    model, _ = pca_fit_transform(X, 2)
    assert model.explained_variance_ratio[0] >= 0.99999


def test_full_rank_reconstruction():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 6))
    model, scores = pca_fit_transform(X, 6)
    assert np.abs(model.inverse_transform(scores) - X).max() <= 1e-8


def test_crafted_two_dimensional_example():
    X = np.array([[1, 0], [-1, 0], [0, 0.1], [0, -0.1]])
    model, _ = pca_fit_transform(X, 2)
    # covariance is diag(2/3, 0.02/3), so PC1 is the x axis
    np.testing.assert_allclose(model.components[0], [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(model.explained_variance, [2 / 3, 0.02 / 3], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(3, 12), st.integers(2, 6)),
              elements=st.floats(-100, 100, allow_nan=False)))
def test_components_orthonormal_and_scores_centered(X):
    k = min(X.shape)
    model, scores = pca_fit_transform(X, k)
    C = model.components
    assert np.abs(C @ C.T - np.eye(k)).max() <= 1e-8
    assert np.abs(scores.mean(0)).max() <= 1e-8 * max(1.0, np.abs(X).max())
    assert np.all(np.diff(model.explained_variance) <= 1e-9)


@pytest.mark.parametrize("k", [0, 4])
def test_invalid_k(k):
    with pytest.raises(ValueError):
        pca_fit_transform(np.zeros((3, 3)), k)


def swarm_at(gen, positions):
    ps = [Particle(i, np.asarray(p, float), np.zeros(len(p)), np.asarray(p, float), 0.5)
          for i, p in enumerate(positions)]
    s = Swarm(ps)
    s.generation = gen
    return s


def test_trace_row_count_and_known_projection():
    # every position lies on the x axis, so pc1 is x minus the pooled mean
    swarms = [swarm_at(g, [[float(g + i), 5.0] for i in range(3)]) for g in range(1, 5)]
    rows = convergence_trace(swarms)
    assert len(rows) == 12
    xs = np.array([g + i for g in range(1, 5) for i in range(3)], float)
    np.testing.assert_allclose([r["pc1"] for r in rows], xs - xs.mean(), atol=1e-9)
    np.testing.assert_allclose([r["pc2"] for r in rows], 0.0, atol=1e-9)


def test_constant_positions_give_a_flat_trace():
    rows = convergence_trace([swarm_at(g, [[20.0, 20.0]] * 2) for g in (1, 2)])
    assert all(r["pc1"] == 0 and r["pc2"] == 0 for r in rows)


def test_trace_needs_two_checkpoints():
    with pytest.raises(ValueError):
        convergence_trace([swarm_at(1, [[1.0]])])


def record(store, rates, acc10, best):
    accs = [0.1] * 9 + [acc10, best]
    store.append(store.make_record(BlockSpec(rates), "d", [1.0] * 11, accs, False))


def test_baseline_hand_built():
    store = HistoryStore()
    record(store, (12,), 0.5, 0.7)
    record(store, (13,), 0.4, 0.8)
    record(store, (14,), 0.6, 0.9)
    # (A,B) and (B,A) disagree; the four pairs involving C agree
    assert tenth_epoch_baseline(store) == 4 / 6


def test_baseline_ties_predict_zero():
    store = HistoryStore()
    record(store, (12,), 0.5, 0.7)
    record(store, (13,), 0.5, 0.8)
    assert tenth_epoch_baseline(store) == 0.5


def test_growth_stats():
    store = HistoryStore()
    for _ in range(4):
        record(store, (20, 30), 0.5, 0.6)
    rows = growth_rate_stats(store)
    assert len(rows) == 16
    assert rows[0]["median"] == 20 and rows[1]["median"] == 30
    assert rows[0]["q3"] - rows[0]["q1"] == 0
    assert rows[2]["count"] == 0
    assert sum(rows[0]["histogram"]) == 4 and len(rows[0]["histogram"]) == 20


def test_single_record_medians():
    store = HistoryStore()
    record(store, (14, 27, 19), 0.5, 0.6)
    assert [r["median"] for r in growth_rate_stats(store)[:3]] == [14, 27, 19]


def test_ablation_has_five_rows(tmp_path):
    rng = np.random.default_rng(0)
    store = HistoryStore()
    for k in range(15):
        b = float(rng.random())
        record(store, (12 + k,), b - 0.05, b)
    rows = feature_ablation(store, folds=5)
    assert [r["features"] for r in rows] == list(ABLATION_COMBINATIONS)
    assert all(0 <= r["cv_mean"] <= 1 and 0 <= r["group_cv_mean"] <= 1 for r in rows)
    write_csv(rows, tmp_path / "a.csv")
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 6
