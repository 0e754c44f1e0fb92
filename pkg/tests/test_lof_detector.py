import numpy as np
import pytest

from flowgate.errors import DataError
from flowgate.lof_detector import (
    LofConfig,
    fit_lof,
    kneighbors,
    lof_score,
    lrd,
    score,
)
from flowgate.oracle_synth import lof_bruteforce


def test_kneighbors_simple_line():
    model = fit_lof(np.array([[0.0], [1.0], [2.0], [10.0]]), LofConfig(k=2))
    idx, dist = kneighbors(model, np.array([0.4]), k=2)
    assert idx.tolist() == [0, 1]
    np.testing.assert_allclose(dist, [0.4, 0.6])


def test_kneighbors_includes_ties_beyond_k():
    square = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    model = fit_lof(square, LofConfig(k=2))
    idx, dist = kneighbors(model, np.array([0.5, 0.5]), k=2)
    assert idx.tolist() == [0, 1, 2, 3]  # all four corners equidistant
    assert len(set(dist.tolist())) == 1


def test_kneighbors_matches_exhaustive_scan(rng):
    X = rng.standard_normal((500, 5))
    model = fit_lof(X, LofConfig(k=7))
    for q in rng.standard_normal((25, 5)):
        idx, dist = kneighbors(model, q, k=7)
        full = np.sqrt(((X - q) ** 2).sum(axis=1))
        kth = np.partition(full, 6)[6]
        expect = set(np.flatnonzero(full <= kth).tolist())
        assert set(idx.tolist()) == expect


def test_kneighbors_k_bounds():
    model = fit_lof(np.arange(10.0)[:, None], LofConfig(k=2))
    with pytest.raises(DataError):
        kneighbors(model, np.array([1.0]), k=10)


def test_lrd_uniform_grid_interior_is_one():
    # evenly spaced 1-D grid, k=2, spacing 1: every reach distance is 1
    X = np.arange(20.0)[:, None]
    model = fit_lof(X, LofConfig(k=2))
    assert model.lrd[10] == 1.0
    assert lrd(model, np.array([9.5])) > 0


def test_lrd_duplicate_cluster_sentinel():
    X = np.vstack([np.zeros((8, 2)), [[5.0, 5.0], [6.0, 6.0], [7.0, 7.0]]])
    model = fit_lof(X, LofConfig(k=3))
    assert np.isinf(model.lrd[:8]).all()
    assert np.isfinite(model.lrd[8:]).all()
    assert lrd(model, np.zeros(2)) == np.inf
    # a point inside the pure duplicate cluster scores exactly 1
    assert lof_score(model, np.zeros(2)) == 1.0


def test_lrd_matches_formula_oracle(rng):
    X = rng.standard_normal((80, 2))
    k = 5
    model = fit_lof(X, LofConfig(k=k))
    for q in rng.standard_normal((10, 2)):
        d = np.sqrt(((X - q) ** 2).sum(axis=1))
        kth = np.partition(d, k - 1)[k - 1]
        nbrs = np.flatnonzero(d <= kth)
        reach = np.maximum(model.k_distance[nbrs], d[nbrs])
        want = 1.0 / reach.mean()
        assert abs(lrd(model, q) - want) < 1e-12


def test_lof_square_corner_copy_scores_exactly_one():
    square = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    model = fit_lof(square, LofConfig(k=3))
    assert lof_score(model, np.array([0.0, 0.0])) == 1.0


def test_lof_far_query_is_large_and_matches_oracle(rng):
    X = rng.standard_normal((100, 3)) * 0.5
    model = fit_lof(X, LofConfig(k=10))
    q = np.full((1, 3), 5.0)  # ten sigma out
    got = score(model, q)[0]
    want = lof_bruteforce(X, q, 10)[0]
    assert got > 2.0
    assert abs(got - want) < 1e-9


def test_lof_matches_bruteforce_oracle(rng):
    X = rng.standard_normal((200, 4))
    Q = rng.standard_normal((50, 4))
    model = fit_lof(X, LofConfig(k=12))
    np.testing.assert_allclose(score(model, Q), lof_bruteforce(X, Q, 12),
                               atol=1e-9)


def test_fit_grid_lrd_positive_finite():
    g = np.arange(10.0)
    X = np.array([[a, b] for a in g for b in g])
    model = fit_lof(X, LofConfig(k=3))
    assert (model.lrd > 0).all() and np.isfinite(model.lrd).all()


def test_fit_deterministic_hash(rng):
    X = rng.standard_normal((60, 3))
    assert fit_lof(X, LofConfig(k=5)).content_hash() == \
        fit_lof(X, LofConfig(k=5)).content_hash()


def test_novel_cluster_scores_above_benign_holdout(rng):
    benign = rng.standard_normal((300, 4))
    holdout = rng.standard_normal((50, 4))
    novel = rng.standard_normal((50, 4)) * 0.5 + 6.0
    model = fit_lof(benign, LofConfig(k=20))
    assert score(model, novel).mean() > score(model, holdout).mean()


def test_fit_requires_more_rows_than_k():
    with pytest.raises(DataError):
        fit_lof(np.zeros((5, 2)), LofConfig(k=5))


def test_rigid_transform_invariance(rng):
    X = rng.standard_normal((120, 3))
    Q = rng.standard_normal((20, 3))
    theta = 0.7
    R = np.array([
        [np.cos(theta), -np.sin(theta), 0.0],
        [np.sin(theta), np.cos(theta), 0.0],
        [0.0, 0.0, 1.0],
    ])
    shift = np.array([3.0, -1.0, 2.0])
    base = score(fit_lof(X, LofConfig(k=9)), Q)
    moved = score(fit_lof(X @ R.T + shift, LofConfig(k=9)), Q @ R.T + shift)
    np.testing.assert_allclose(base, moved, atol=1e-9)


def test_tie_inclusion_count_property(rng):
    X = rng.integers(0, 3, size=(40, 2)).astype(float)  # heavy ties
    model = fit_lof(X, LofConfig(k=4))
    for q in rng.integers(0, 3, size=(10, 2)).astype(float):
        idx, _ = kneighbors(model, q, k=4)
        assert len(idx) >= 4


def test_score_dim_mismatch(rng):
    model = fit_lof(rng.standard_normal((30, 2)), LofConfig(k=3))
    with pytest.raises(DataError):
        score(model, np.zeros((2, 5)))
