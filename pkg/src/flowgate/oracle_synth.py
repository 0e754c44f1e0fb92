"""Independent brute-force oracles and a synthetic flow-data generator.

Every oracle here re-derives its answer from the defining formulas with
nothing shared with the module it checks beyond primitive numpy arithmetic:
the LOF oracle works off a full pairwise-distance matrix, the one-class SVM
oracle solves the dual as a dense projected-gradient QP, and gradient checks
use central finite differences. The generator produces seeded Gaussian
clusters labeled by role, standing in for flow data at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError
from .flow_model import LabeledDataset

_LOF_ORACLE_MAX_N = 1000


@dataclass(frozen=True)
class ClusterSpec:
    """One Gaussian cluster: mean vector, diagonal covariance, row count, label."""

    mean: tuple[float, ...]
    cov_diag: tuple[float, ...]
    count: int
    label: str

    def __post_init__(self):
        if self.count <= 0:
            raise ConfigError("cluster count must be positive")
        if any(v <= 0 for v in self.cov_diag):
            raise ConfigError("cluster covariance entries must be positive")
        if len(self.mean) != len(self.cov_diag):
            raise ConfigError("mean and cov_diag lengths differ")


@dataclass(frozen=True)
class SynthConfig:
    d: int
    benign: tuple[ClusterSpec, ...]
    known: tuple[ClusterSpec, ...] = ()
    unknown: tuple[ClusterSpec, ...] = ()
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "benign", tuple(self.benign))
        object.__setattr__(self, "known", tuple(self.known))
        object.__setattr__(self, "unknown", tuple(self.unknown))
        for spec in self.benign + self.known + self.unknown:
            if len(spec.mean) != self.d:
                raise ConfigError(
                    f"cluster {spec.label!r} has dimension {len(spec.mean)}, expected {self.d}"
                )

    @property
    def unknown_labels(self) -> frozenset[str]:
        return frozenset(s.label for s in self.unknown)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        def specs(role):
            out = []
            for c in d.get(role, []):
                out.append(
                    ClusterSpec(
                        mean=tuple(c["mean"]),
                        cov_diag=tuple(c["cov_diag"]),
                        count=int(c["count"]),
                        label=str(c["label"]),
                    )
                )
            return tuple(out)

        return cls(
            d=int(d["d"]),
            benign=specs("benign"),
            known=specs("known"),
            unknown=specs("unknown"),
            seed=int(d.get("seed", 42)),
        )


def paradigm_synth_config(
    seed: int = 42,
    benign_count: int = 4000,
    known_count: int = 2000,
    unknown_count: int = 400,
    d: int = 16,
) -> SynthConfig:
    """Fixture for the known/unknown generalization experiment.

    Two known-attack clusters sit on the positive side of disjoint feature
    groups, so a supervised boundary separates them cleanly from benign. The
    unknown cluster is displaced along a *different* group, and on the benign
    side of any known-vs-benign boundary: supervised detectors trained
    without it should miss it, while a boundary fit on benign data alone
    still sees it as far out of distribution.
    """

    def mean(offset: float, dims: range) -> tuple[float, ...]:
        v = [0.0] * d
        for j in dims:
            v[j] = offset
        return tuple(v)

    unit = tuple([1.0] * d)
    return SynthConfig(
        d=d,
        benign=(ClusterSpec(mean((0.0), range(0)), unit, benign_count, "BENIGN"),),
        known=(
            ClusterSpec(mean(6.0, range(0, 4)), unit, known_count, "Flood-A"),
            ClusterSpec(mean(6.0, range(4, 8)), unit, known_count, "Probe-B"),
        ),
        unknown=(ClusterSpec(mean(-5.0, range(8, 12)), unit, unknown_count, "Stealth-U"),),
        seed=seed,
    )


def gen_synthetic(cfg: SynthConfig) -> LabeledDataset:
    """Seeded Gaussian samples per cluster, concatenated benign/known/unknown."""
    blocks = []
    labels: list[str] = []
    clusters = list(cfg.benign) + list(cfg.known) + list(cfg.unknown)
    for ci, spec in enumerate(clusters):
        rng = np.random.default_rng([cfg.seed, ci])
        std = np.sqrt(np.asarray(spec.cov_diag, dtype=np.float64))
        x = rng.standard_normal((spec.count, cfg.d)) * std + np.asarray(spec.mean)
        blocks.append(x)
        labels.extend([spec.label] * spec.count)
    features = np.vstack(blocks)
    names = [f"f{j}" for j in range(cfg.d)]
    return LabeledDataset(features=features, labels=labels, feature_names=names)


def _pairwise_dist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def lof_bruteforce(X_train, X_query, k: int) -> np.ndarray:
    """O(n^2) transcription of the LOF formulas, tie-inclusive neighborhoods.

    Training-point k-distances and lrd values exclude the point itself;
    queries are scored in novelty mode against the unmodified training set.
    Duplicate-degenerate points follow the sentinel convention: a zero mean
    reachability gives lrd = +inf, and inf/inf ratios count as 1.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    X_query = np.asarray(X_query, dtype=np.float64)
    n = X_train.shape[0]
    if n > _LOF_ORACLE_MAX_N:
        raise DataError(f"brute-force LOF guard: n={n} exceeds {_LOF_ORACLE_MAX_N}")
    if not 1 <= k < n:
        raise DataError(f"k={k} must satisfy 1 <= k < n={n}")

    D = _pairwise_dist(X_train, X_train)
    np.fill_diagonal(D, np.inf)  # self never counts as a neighbor
    kdist = np.partition(D, k - 1, axis=1)[:, k - 1]
    neighborhoods = [np.flatnonzero(D[i] <= kdist[i]) for i in range(n)]

    lrd = np.empty(n)
    for i, nbrs in enumerate(neighborhoods):
        reach = np.maximum(kdist[nbrs], D[i, nbrs])
        m = reach.sum() / reach.shape[0]
        lrd[i] = np.inf if m == 0.0 else 1.0 / m

    Dq = _pairwise_dist(X_query, X_train)
    scores = np.empty(X_query.shape[0])
    for q in range(X_query.shape[0]):
        kq = np.partition(Dq[q], k - 1)[k - 1]
        nbrs = np.flatnonzero(Dq[q] <= kq)
        reach = np.maximum(kdist[nbrs], Dq[q, nbrs])
        m = reach.sum() / reach.shape[0]
        lrd_q = np.inf if m == 0.0 else 1.0 / m
        with np.errstate(invalid="ignore"):
            ratios = lrd[nbrs] / lrd_q
        ratios[np.isinf(lrd[nbrs]) & np.isinf(lrd_q)] = 1.0
        scores[q] = ratios.sum() / ratios.shape[0]
    return scores


def _project_capped_simplex(v: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= cap, sum a = 1} by bisection on tau.

    The clipped sum is non-increasing in tau; at tau = min(v) - cap it equals
    n*cap >= 1 (cap is 1/(nu*n) with nu <= 1) and at tau = max(v) it is 0,
    so the root is bracketed.
    """
    lo = float(v.min()) - cap
    hi = float(v.max())
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = np.clip(v - tau, 0.0, cap).sum()
        if s > 1.0:
            lo = tau
        else:
            hi = tau
    return np.clip(v - 0.5 * (lo + hi), 0.0, cap)


def ocsvm_qp_oracle(K: np.ndarray, nu: float, tol: float = 1e-8,
                    max_iter: int = 500_000) -> tuple[np.ndarray, float]:
    """Dense reference solution of min 0.5 a'Ka over {0 <= a <= 1/(nu n), sum a = 1}.

    Projected gradient with a fixed 1/L step; stops when the gradient-mapping
    norm drops below `tol`. Returns (alphas, rho) with rho averaged over
    unbounded support vectors.
    """
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    if K.shape != (n, n):
        raise DataError("kernel matrix must be square")
    if n > 200:
        raise DataError(f"QP oracle guard: n={n} exceeds 200")
    if not 0.0 < nu <= 1.0:
        raise ConfigError(f"nu must lie in (0, 1], got {nu}")
    cap = 1.0 / (nu * n)

    L = float(np.linalg.eigvalsh(K)[-1])
    step = 1.0 / max(L, 1e-12)
    alpha = _project_capped_simplex(np.full(n, 1.0 / n), cap)
    for _ in range(max_iter):
        grad = K @ alpha
        nxt = _project_capped_simplex(alpha - step * grad, cap)
        gap = np.linalg.norm(alpha - nxt) / step
        alpha = nxt
        if gap < tol:
            break
    else:
        raise ConvergenceError("QP oracle did not converge", residual=float(gap))

    rho = _rho_from_alphas(K, alpha, cap)
    return alpha, rho


def _rho_from_alphas(K: np.ndarray, alpha: np.ndarray, cap: float) -> float:
    g = K @ alpha
    margin = 1e-6 * cap
    unbounded = (alpha > margin) & (alpha < cap - margin)
    if unbounded.any():
        return float(g[unbounded].mean())
    # Degenerate fit (every SV at a bound): midpoint of the KKT interval.
    lo = g[alpha > margin].max() if (alpha > margin).any() else g.min()
    hi = g[alpha < cap - margin].min() if (alpha < cap - margin).any() else g.max()
    return float(0.5 * (lo + hi))


def finite_diff_grad(loss, theta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar loss at theta."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        bump = np.zeros_like(theta)
        bump[i] = eps
        hi = loss(theta + bump)
        lo = loss(theta - bump)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise DataError("loss evaluated non-finite during finite differencing")
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad
