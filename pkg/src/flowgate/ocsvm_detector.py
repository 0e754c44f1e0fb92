"""nu-parameterized One-Class SVM with RBF kernel, fit on benign data only.

The dual  min 0.5 a'Qa  over  {0 <= a_i <= 1/(nu n), sum a = 1},  with
Q_ij = K(x_i, x_j), is solved by sequential pairwise updates on the maximal
violating pair until the KKT gap drops below tol. This uses the sum(a) = 1
scaling of the dual (the primal divided through by nu*n); the alternative
sum(a) = nu*n scaling found in some texts rescales rho by the same factor.

The decision value of a query is sum_i a_i K(x_i, x) - rho; negative values
are anomalies. Bounds are kept exact during clipping, so support-vector
classification (zero / bounded / unbounded) needs no tolerance fuzz.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError
from .parallel import chunked_rows

_A_FLOOR = 1e-12  # curvature guard for near-duplicate rows


@dataclass(frozen=True)
class OcsvmConfig:
    nu: float = 0.05
    gamma: float | str = "scale"
    tol: float = 1e-3
    max_iter: int = 10_000_000
    cache_max_n: int = 20_000
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ConfigError(f"nu must lie in (0, 1], got {self.nu}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ConfigError(f"gamma must be 'scale' or a positive number")
        elif self.gamma <= 0:
            raise ConfigError("explicit gamma must be positive")

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "gamma": self.gamma,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "cache_max_n": self.cache_max_n,
            "seed": self.seed,
        }


@dataclass
class OcsvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    kkt_gap: float  # final maximal KKT violation
    n_train: int

    def alpha_cap(self) -> float:
        return 1.0 / (self.nu * self.n_train)


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2) for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError("rbf_kernel: dimension mismatch")
    if gamma <= 0:
        raise ConfigError("gamma must be positive")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def gamma_scale(X: np.ndarray) -> float:
    """The 'scale' heuristic: 1 / (d * pooled variance of all entries)."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise DataError("gamma_scale of an empty matrix")
    d = X.shape[1]
    var = float(X.var())
    if var == 0.0:
        warnings.warn("constant feature matrix; gamma 'scale' falls back to 1/d")
        return 1.0 / d
    return 1.0 / (d * var)


def _rbf_rows(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel block K[a, b] = exp(-gamma ||A_a - B_b||^2)."""
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _decision_sums(rows: np.ndarray, sv: np.ndarray, alphas: np.ndarray,
                   gamma: float) -> np.ndarray:
    """sum_i alpha_i K(sv_i, row) per row.

    The inner sum is one fixed-length np.dot per row, so its bits do not
    depend on how rows are batched; rho recovery and query scoring share
    this expression and therefore agree exactly at support vectors.
    """
    K = _rbf_rows(rows, sv, gamma)
    out = np.empty(rows.shape[0])
    for i in range(rows.shape[0]):
        out[i] = np.dot(K[i], alphas)
    return out


class _KernelRows:
    """Row access to Q, fully cached for small n, LRU-cached beyond."""

    def __init__(self, X: np.ndarray, gamma: float, cache_max_n: int):
        self.X = X
        self.gamma = gamma
        n = X.shape[0]
        self.full = None
        if n <= cache_max_n:
            self.full = _rbf_rows(X, X, gamma)
        else:
            self._lru: dict[int, np.ndarray] = {}
            self._cap = max(64, (cache_max_n * cache_max_n) // max(n, 1))

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        hit = self._lru.pop(i, None)
        if hit is None:
            hit = _rbf_rows(self.X[i:i + 1], self.X, self.gamma)[0]
            if len(self._lru) >= self._cap:
                self._lru.pop(next(iter(self._lru)))
        self._lru[i] = hit
        return hit

    def matvec(self, alpha: np.ndarray) -> np.ndarray:
        if self.full is not None:
            return self.full @ alpha
        out = np.empty(self.X.shape[0])
        step = 2048
        for s in range(0, self.X.shape[0], step):
            out[s:s + step] = _rbf_rows(self.X[s:s + step], self.X, self.gamma) @ alpha
        return out


def fit_ocsvm(X_benign: np.ndarray, cfg: OcsvmConfig = OcsvmConfig()) -> OcsvmModel:
    """Solve the one-class dual on (standardized) benign rows.

    Deterministic given the input order: ties in pair selection resolve to
    the lowest index. Raises ConvergenceError with the residual gap if the
    iteration budget runs out.
    """
    X = np.asarray(X_benign, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("OCSVM needs at least two training rows")
    n = X.shape[0]
    gamma = gamma_scale(X) if cfg.gamma == "scale" else float(cfg.gamma)
    cap = 1.0 / (cfg.nu * n)

    kernel = _KernelRows(X, gamma, cfg.cache_max_n)
    alpha = np.full(n, 1.0 / n)
    G = kernel.matvec(alpha)

    gap = np.inf
    for _ in range(cfg.max_iter):
        can_give = alpha > 0.0
        can_take = alpha < cap
        gi = int(np.argmax(np.where(can_give, G, -np.inf)))
        gj = int(np.argmin(np.where(can_take, G, np.inf)))
        gap = G[gi] - G[gj]
        if gap <= cfg.tol:
            break
        qi = kernel.row(gi)
        qj = kernel.row(gj)
        a = qi[gi] + qj[gj] - 2.0 * qi[gj]
        if a <= 0.0:
            a = _A_FLOOR
        t = (G[gi] - G[gj]) / a
        t_max = min(alpha[gi], cap - alpha[gj])
        if t >= t_max:
            t = t_max
        if t == alpha[gi]:
            alpha[gi] = 0.0
        else:
            alpha[gi] -= t
        if t == cap - alpha[gj]:
            alpha[gj] = cap
        else:
            alpha[gj] += t
        G += t * (qj - qi)
    else:
        raise ConvergenceError(
            f"SMO did not reach tol={cfg.tol} within {cfg.max_iter} iterations",
            residual=float(gap),
        )

    support = alpha > 0.0
    sv = X[support].copy()
    a_sv = alpha[support].copy()
    rho = _recover_rho(X, sv, a_sv, gamma, G, alpha, cap)
    return OcsvmModel(
        support_vectors=sv,
        alphas=a_sv,
        rho=rho,
        gamma=gamma,
        nu=cfg.nu,
        kkt_gap=float(max(gap, 0.0)),
        n_train=n,
    )


def _recover_rho(X, sv, a_sv, gamma, G, alpha, cap) -> float:
    unbounded = (alpha > 0.0) & (alpha < cap)
    if unbounded.any():
        # Re-evaluate the gradient at unbounded SVs through the scoring
        # expression, so decision values at those points straddle zero
        # symmetrically (and exactly zero in degenerate duplicate fits).
        g = _decision_sums(X[unbounded], sv, a_sv, gamma)
        if g.max() == g.min():
            return float(g[0])
        return float(g.mean())
    at_cap = alpha >= cap
    at_zero = alpha <= 0.0
    lo = G[at_cap].max() if at_cap.any() else None
    hi = G[at_zero].min() if at_zero.any() else None
    if lo is not None and hi is not None:
        return float(0.5 * (lo + hi))
    return float(lo if lo is not None else hi)


def decision_ocsvm(model: OcsvmModel, X: np.ndarray) -> np.ndarray:
    """Decision values sum_i a_i K(sv_i, x) - rho; negative means anomaly."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.support_vectors.shape[1]:
        raise DataError(
            f"expected {model.support_vectors.shape[1]} features, got {X.shape!r}"
        )

    def block(rows: np.ndarray) -> np.ndarray:
        if rows.shape[0] == 0:
            return np.empty(0)
        return _decision_sums(rows, model.support_vectors, model.alphas,
                              model.gamma) - model.rho

    return chunked_rows(block, X)
