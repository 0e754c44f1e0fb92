"""Thread controls.

FLOWGATE_THREADS caps parallelism toolkit-wide. Row scoring is chunked with
a fixed chunk size, so results are bitwise identical for any worker count;
BLAS pools are pinned to one thread so matrix-product reductions keep a
fixed summation order (the bitwise-determinism contract).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_CHUNK_ROWS = 4096
_blas_limiter = None


def max_threads() -> int:
    """Parallelism cap from FLOWGATE_THREADS (default 1)."""
    raw = os.environ.get("FLOWGATE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def pin_blas_single() -> None:
    """Pin BLAS pools to one thread for deterministic reductions."""
    global _blas_limiter
    if _blas_limiter is None:
        import threadpoolctl

        _blas_limiter = threadpoolctl.threadpool_limits(limits=1, user_api="blas")


def chunked_rows(fn, X: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Apply `fn` to fixed-size row blocks of X and concatenate in block order.

    Chunk boundaries never depend on the worker count, so the arithmetic
    (and therefore the bits) of the result are worker-count invariant.
    """
    n = X.shape[0]
    if n == 0:
        return fn(X)
    blocks = [X[i:i + _CHUNK_ROWS] for i in range(0, n, _CHUNK_ROWS)]
    workers = max_threads() if workers is None else max(1, workers)
    if workers == 1 or len(blocks) == 1:
        parts = [fn(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, blocks))
    return np.concatenate(parts, axis=0)
