"""Minimal dense linear algebra used by the compression algorithms.

Matrices are plain float ndarrays.  Everything here is a thin, checked layer
over numpy/scipy; the one genuinely algorithmic piece is the power iteration
behind spectral_error.
"""

import numpy as np
import scipy.linalg

__all__ = ["forward_substitution", "matmul", "matmul_transposed",
           "frobenius_norm", "spectral_error", "power_norm2"]


def forward_substitution(L, rhs):
    """Solve L X = rhs for unit lower triangular L (the diagonal is not read)."""
    L = np.asarray(L, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"forward_substitution: L must be square, got {L.shape}")
    if rhs.shape[0] != L.shape[0]:
        raise ValueError(f"forward_substitution: shape mismatch {L.shape} vs {rhs.shape}")
    if L.shape[0] == 0:
        return rhs.copy()
    return scipy.linalg.solve_triangular(L, rhs, lower=True, unit_diagonal=True,
                                         check_finite=False)


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    return a @ b


def matmul_transposed(a, b):
    """a @ b.T with the usual shape check."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"matmul_transposed: inner dimensions differ, {a.shape} @ {b.shape}.T")
    return a @ b.T


def frobenius_norm(a):
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def power_norm2(matvec, rmatvec, n_cols, iters=100, seed=0):
    """Spectral norm estimate by power iteration on the Gram operator."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n_cols)
    nv = np.linalg.norm(v)
    if nv == 0.0 or n_cols == 0:
        return 0.0
    v /= nv
    sigma = 0.0
    for _ in range(iters):
        w = rmatvec(matvec(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        sigma = np.sqrt(nw)
    return float(sigma)


def spectral_error(a, b, iters=100, seed=0):
    """||a - b||_2 via power iteration on the difference."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return power_norm2(lambda x: d @ x, lambda y: d.T @ y, d.shape[1], iters, seed)
