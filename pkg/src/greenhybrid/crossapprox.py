"""Full-pivot adaptive cross approximation and the algebraic interpolation operator.

ACA is only ever applied to thin factor matrices (cluster rows x quadrature
columns), never to full Galerkin blocks, so keeping the remainder dense is
cheap and makes full pivoting trivially reliable.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .densela import power_norm2

__all__ = ["CrossApprox", "AlgebraicInterpolant", "aca_full_pivot",
           "build_interpolant", "estimate_norm2"]


@dataclass
class CrossApprox:
    """Rank-l cross approximation X ~ C @ D.T with pivot bookkeeping.

    rows/cols hold the pivot indices in selection order.  (P C), the pivot-row
    restriction of C, is unit lower triangular by the classical scaling
    c^(k) = remainder column / pivot value.
    """

    rows: np.ndarray
    cols: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def rank(self):
        return len(self.rows)

    def pivot_matrix(self):
        """(P C): C restricted to the pivot rows, unit lower triangular."""
        return self.C[self.rows, :]

    def reconstruct(self):
        return self.C @ self.D.T


def aca_full_pivot(X, tol, max_rank=None):
    """Cross approximation with full pivoting on an explicit matrix.

    Stops when max|remainder| <= tol * max|X|, at ``max_rank``, or on an
    exactly zero remainder.  Ties in the pivot search resolve to the smallest
    row, then column, index (C-order argmax).  An all-zero input yields a
    rank-0 result.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("aca_full_pivot: input must be finite")
    n_rows, n_cols = X.shape
    if max_rank is None:
        max_rank = min(n_rows, n_cols)
    max_rank = min(max_rank, n_rows, n_cols)

    R = X.copy()
    scale = np.max(np.abs(X)) if X.size else 0.0
    rows, cols, cs, ds = [], [], [], []
    while len(rows) < max_rank:
        flat = np.argmax(np.abs(R))
        i, j = np.unravel_index(flat, R.shape)
        pivot = R[i, j]
        if scale == 0.0 or np.abs(pivot) <= tol * scale:
            break
        c = R[:, j] / pivot
        d = R[i, :].copy()
        R -= np.outer(c, d)
        # the pivot cross is exactly reproduced; pin it to zero against roundoff
        R[i, :] = 0.0
        R[:, j] = 0.0
        rows.append(i)
        cols.append(j)
        cs.append(c)
        ds.append(d)
    if rows:
        C = np.column_stack(cs)
        D = np.column_stack(ds)
    else:
        C = np.zeros((n_rows, 0))
        D = np.zeros((n_cols, 0))
    return CrossApprox(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), C, D)


@dataclass
class AlgebraicInterpolant:
    """Interpolation operator J = V P built from ACA pivots.

    V = C (P C)^(-1); applying J to a matrix touches only its pivot rows, and
    J C = C (the projection property), so V restricted to the pivot rows is
    the identity.
    """

    rows: np.ndarray
    V: np.ndarray
    PC: np.ndarray

    @property
    def rank(self):
        return len(self.rows)

    def apply(self, pivot_rows_of_x):
        """J X from the pivot rows P X of the target."""
        return self.V @ pivot_rows_of_x

    def norm2(self, iters=100, seed=0):
        """||J||_2 = ||V||_2 since P is surjective."""
        return estimate_norm2(self.V, iters=iters, seed=seed)


def build_interpolant(ca):
    """V = C (P C)^(-1) via a triangular solve against the unit factor."""
    if ca.rank < 1:
        raise ValueError("build_interpolant: need rank >= 1")
    PC = ca.pivot_matrix()
    # V (PC) = C  <=>  (PC)^T V^T = C^T, unit upper triangular system
    Vt = scipy.linalg.solve_triangular(PC.T, ca.C.T, lower=False, unit_diagonal=True,
                                       check_finite=False)
    return AlgebraicInterpolant(rows=ca.rows.copy(), V=Vt.T, PC=PC)


def estimate_norm2(op, iters=100, seed=0):
    """Largest singular value by power iteration on the Gram operator.

    ``op`` may be an ndarray, a pair (A, B) meaning A @ B.T, or any object
    with matvec/rmatvec/shape.  Deterministic for a fixed seed.
    """
    if iters < 1:
        raise ValueError("estimate_norm2: iters must be positive")
    if isinstance(op, tuple):
        A, B = op
        return power_norm2(lambda x: A @ (B.T @ x), lambda y: B @ (A.T @ y),
                           B.shape[0], iters, seed)
    if hasattr(op, "matvec"):
        return power_norm2(op.matvec, op.rmatvec, op.shape[1], iters, seed)
    M = np.asarray(op, dtype=float)
    return power_norm2(lambda x: M @ x, lambda y: M.T @ y, M.shape[1], iters, seed)
