"""Local Outlier Factor in novelty mode over an exact k-NN index.

Fit precomputes, for every benign training point, its k-distance and local
reachability density (lrd), with the point itself excluded from its own
neighborhood. Queries are scored against the frozen training structure and
never inserted. Neighborhoods are tie-inclusive: every point at distance
exactly equal to the k-th distance belongs to N_k, so |N_k| >= k.

The index is scipy's cKDTree (exact search; leaf size affects speed only).
Tie membership is decided on the sorted distances of a single over-sized
query (grown to the full training set in the rare case the tie run exceeds
the buffer), never by a radius re-query, so the k-distance and the
membership test share one floating-point arithmetic. Reachability sums are
then evaluated with plain numpy on the returned neighbor sets.

Degenerate duplicates follow the sentinel convention: a zero mean
reachability distance makes lrd = +inf, and inf/inf ratios in the LOF sum
count as 1 (a point inside a pure duplicate cluster scores 1).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError
from .parallel import chunked_rows, max_threads

_TIE_BUFFER = 16


@dataclass(frozen=True)
class LofConfig:
    k: int = 80
    leaf_size: int = 80

    def __post_init__(self):
        if self.k < 1:
            raise DataError("k must be >= 1")

    def to_dict(self) -> dict:
        return {"k": self.k, "leaf_size": self.leaf_size}


@dataclass
class LofModel:
    train: np.ndarray
    k: int
    leaf_size: int
    k_distance: np.ndarray  # per training point, self excluded
    lrd: np.ndarray  # per training point
    tree: cKDTree

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.k).tobytes())
        h.update(self.train.tobytes())
        h.update(self.k_distance.tobytes())
        h.update(self.lrd.tobytes())
        return h.hexdigest()


def _tie_inclusive_query(tree: cKDTree, rows: np.ndarray, kth: int, workers: int = 1):
    """Sorted neighbor distances/indices wide enough to cover all ties.

    Returns (dists, idxs, kdist) where kdist is the distance at sorted
    position `kth` (0-based) and every point tied with it is inside the
    returned window. Rows whose tie run overflows the buffer are re-queried
    against the whole training set.
    """
    n = tree.n
    q = min(kth + 1 + _TIE_BUFFER, n)
    dists, idxs = tree.query(rows, k=q, workers=workers)
    kdist = dists[:, kth]
    if q < n:
        overflow = np.flatnonzero(dists[:, -1] <= kdist)
        if overflow.size:
            full_d, full_i = tree.query(rows[overflow], k=n, workers=workers)
            pad = n - q
            dists = np.pad(dists, ((0, 0), (0, pad)), constant_values=np.inf)
            idxs = np.pad(idxs, ((0, 0), (0, pad)), constant_values=-1)
            dists[overflow] = full_d
            idxs[overflow] = full_i
    return dists, idxs, kdist


def fit_lof(X_benign: np.ndarray, cfg: LofConfig = LofConfig()) -> LofModel:
    """Build the neighbor index and precompute k-distances and lrd values."""
    X = np.asarray(X_benign, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("training matrix must be 2-D")
    n = X.shape[0]
    if n <= cfg.k:
        raise DataError(f"LOF needs n_train > k; got n={n}, k={cfg.k}")

    tree = cKDTree(X, leafsize=cfg.leaf_size)
    workers = max_threads()
    # Sorted distances include the point itself (distance 0, possibly tied
    # with duplicates); dropping one zero entry leaves the k-th neighbor
    # distance at sorted position k either way.
    dists, idxs, kdist = _tie_inclusive_query(tree, X, cfg.k, workers)
    kdist = np.ascontiguousarray(kdist)

    lrd = np.empty(n)
    for i in range(n):
        inside = dists[i] <= kdist[i]
        nbrs = idxs[i][inside]
        nbrs = nbrs[nbrs != i]
        lrd[i] = _inverse_mean_reach(X[i], nbrs, X, kdist)
    return LofModel(
        train=X.copy(),
        k=cfg.k,
        leaf_size=cfg.leaf_size,
        k_distance=kdist,
        lrd=lrd,
        tree=tree,
    )


def rebuild_tree(model: LofModel) -> None:
    """Recreate the index after deserialization."""
    model.tree = cKDTree(model.train, leafsize=model.leaf_size)


def _inverse_mean_reach(x, nbrs, train, kdist) -> float:
    diff = train[nbrs] - x
    d = np.sqrt((diff * diff).sum(axis=1))
    reach = np.maximum(kdist[nbrs], d)
    m = reach.sum() / reach.shape[0]
    return np.inf if m == 0.0 else 1.0 / m


def kneighbors(model: LofModel, x, k: int | None = None):
    """Tie-inclusive k-nearest training neighbors of a query point.

    Returns (indices, distances) sorted by (distance, index); includes every
    training point within the k-th smallest distance, so ties can push the
    count above k. The query is treated as external (novelty mode): nothing
    is excluded, so pass a point that is not a training row, or expect it to
    find itself at distance zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.train.shape[1],):
        raise DataError(f"query must be a {model.train.shape[1]}-vector")
    k = model.k if k is None else k
    if not 1 <= k < model.train.shape[0]:
        raise DataError(f"k={k} must satisfy 1 <= k < n_train")
    dists, idxs, kdist = _tie_inclusive_query(model.tree, x[None, :], k - 1)
    inside = dists[0] <= kdist[0]
    idx = idxs[0][inside]
    dist = dists[0][inside]
    order = np.lexsort((idx, dist))
    return idx[order], dist[order]


def lrd(model: LofModel, x) -> float:
    """Local reachability density of a query against the training set."""
    idx, dist = kneighbors(model, x)
    reach = np.maximum(model.k_distance[idx], dist)
    m = reach.sum() / reach.shape[0]
    return float("inf") if m == 0.0 else float(1.0 / m)


def lof_score(model: LofModel, x) -> float:
    """LOF of one query point: mean neighbor lrd over query lrd."""
    return float(score(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def score(model: LofModel, X: np.ndarray) -> np.ndarray:
    """LOF scores for each row of X (novelty mode; the model is read-only)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.train.shape[1]:
        raise DataError(f"expected {model.train.shape[1]} features, got {X.shape!r}")

    def block(rows: np.ndarray) -> np.ndarray:
        if rows.shape[0] == 0:
            return np.empty(0)
        dists, idxs, kdist = _tie_inclusive_query(model.tree, rows, model.k - 1)
        out = np.empty(rows.shape[0])
        for r in range(rows.shape[0]):
            inside = dists[r] <= kdist[r]
            nbrs = idxs[r][inside]
            diff = model.train[nbrs] - rows[r]
            d = np.sqrt((diff * diff).sum(axis=1))
            reach = np.maximum(model.k_distance[nbrs], d)
            m = reach.sum() / reach.shape[0]
            lrd_q = np.inf if m == 0.0 else 1.0 / m
            nbr_lrd = model.lrd[nbrs]
            with np.errstate(invalid="ignore"):
                ratios = nbr_lrd / lrd_q
            ratios[np.isinf(nbr_lrd) & np.isinf(lrd_q)] = 1.0
            out[r] = ratios.sum() / ratios.shape[0]
        return out

    return chunked_rows(block, X)
