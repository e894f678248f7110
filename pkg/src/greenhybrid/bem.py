"""Galerkin assembly for the Laplace single/double layer operators on closed
surfaces, the mass matrix, L2 projection, and the Dirichlet-problem driver.

Row space: piecewise constants, one per triangle.  Column space of the double
layer operator: continuous piecewise linears, one per vertex.  Touching
triangle pairs (shared vertex, edge, or identical) dispatch to the
regularized 4D rules of :mod:`quadrature`; all other pairs use the plain
tensor rule.
"""

import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .kernel import FOUR_PI
from .quadrature import sauter_rule, triangle_rule_bary

__all__ = [
    "TriangleBasis", "VertexBasis", "SingleLayerOperator", "DoubleLayerOperator",
    "BemSystem", "HarmonicTestCase", "TEST_CASES", "SolveError",
    "slp_entry", "dlp_entry", "mass_entry", "mass_matrix",
    "l2_projection", "solve_dirichlet", "neumann_l2_error", "assemble_dense",
    "apply_operator", "conjugate_gradient",
]

# cap on point-pair batch size during pair evaluation (memory guard)
_CHUNK_POINTS = 4_000_000


# ---------------------------------------------------------------------------
# bases


class TriangleBasis:
    """Piecewise-constant basis, one function per triangle."""

    def __init__(self, mesh, order=3):
        self.mesh = mesh
        self.order = order
        self.size = mesh.n_triangles
        bary, w = triangle_rule_bary(order)
        self._pts = np.einsum("qk,nkd->nqd", bary, mesh.triangle_points())
        self._wts = 2.0 * mesh.areas[:, None] * w[None, :]

    def support_boxes(self):
        p = self.mesh.triangle_points()
        return p.min(axis=1), p.max(axis=1)

    def quad(self, indices):
        """Quadrature (points, weights) with weights summing to the area."""
        return self._pts[indices], self._wts[indices]


class VertexBasis:
    """Continuous piecewise-linear hat basis, one function per vertex.

    Quadrature arrays are padded to the maximal vertex valence; padded slots
    carry zero weight and repeat a valid point.
    """

    def __init__(self, mesh, order=3):
        self.mesh = mesh
        self.order = order
        self.size = mesh.n_vertices
        incidence = mesh.vertex_to_triangles()
        bary, w = triangle_rule_bary(order)
        nq = len(w)
        max_inc = max(len(t) for t in incidence)
        pts = np.zeros((self.size, max_inc * nq, 3))
        wts = np.zeros((self.size, max_inc * nq))
        tri_pts = mesh.triangle_points()
        for v, tris in enumerate(incidence):
            for slot, ti in enumerate(tris):
                local = int(np.where(mesh.triangles[ti] == v)[0][0])
                sl = slice(slot * nq, (slot + 1) * nq)
                pts[v, sl] = bary @ tri_pts[ti]
                wts[v, sl] = 2.0 * mesh.areas[ti] * w * bary[:, local]
            if tris:
                pts[v, len(tris) * nq:] = pts[v, 0]
        self._pts = pts
        self._wts = wts
        lo = np.full((self.size, 3), np.inf)
        hi = np.full((self.size, 3), -np.inf)
        for v, tris in enumerate(incidence):
            p = tri_pts[tris]
            lo[v] = p.reshape(-1, 3).min(axis=0)
            hi[v] = p.reshape(-1, 3).max(axis=0)
        self._lo, self._hi = lo, hi

    def support_boxes(self):
        return self._lo, self._hi

    def quad(self, indices):
        return self._pts[indices], self._wts[indices]


# ---------------------------------------------------------------------------
# pair classification and case-wise evaluation


def _classify_pairs(tris_i, tris_j):
    """Shared-vertex count per pair of vertex-id triples, vectorized."""
    eq = tris_i[:, :, None] == tris_j[:, None, :]
    return eq, eq.any(axis=2).sum(axis=1)


def _edge_permutations(tris_i, tris_j, eq):
    """Vertex permutations putting the shared edge first, same direction."""
    shared_i = eq.any(axis=2)
    ids = np.where(shared_i, tris_i, -1)
    top2 = np.sort(ids, axis=1)[:, 1:]  # the two shared global ids, ascending
    p0i = (tris_i == top2[:, :1]).argmax(axis=1)
    p1i = (tris_i == top2[:, 1:]).argmax(axis=1)
    p0j = (tris_j == top2[:, :1]).argmax(axis=1)
    p1j = (tris_j == top2[:, 1:]).argmax(axis=1)
    perm_i = np.stack([p0i, p1i, 3 - p0i - p1i], axis=1)
    perm_j = np.stack([p0j, p1j, 3 - p0j - p1j], axis=1)
    return perm_i, perm_j


def _vertex_permutations(tris_i, tris_j, eq):
    """Cyclic vertex permutations putting the shared vertex first."""
    pi = eq.any(axis=2).argmax(axis=1)
    pj = eq.any(axis=1).argmax(axis=1)
    perm_i = np.stack([pi, (pi + 1) % 3, (pi + 2) % 3], axis=1)
    perm_j = np.stack([pj, (pj + 1) % 3, (pj + 2) % 3], axis=1)
    return perm_i, perm_j


class _PairEvaluator:
    """Case-dispatched evaluation of Galerkin pair integrals on one mesh.

    Every case (the regular tensor rule included) evaluates through one big
    GEMM: with P = [x_bary | -y_bary] (nq, 6) and the pair's six vertices
    stacked as (6, 3) blocks, the point differences for a whole batch are
    P @ [stacked vertices], shaped (nq, 3*B).
    """

    _IU = np.triu_indices(6)

    def __init__(self, mesh, regular_order=3, singular_order=5):
        self.mesh = mesh
        self.regular_order = regular_order
        self.singular_order = singular_order
        self._rules = {}

    def rule(self, case):
        if case not in self._rules:
            order = self.regular_order if case == "disjoint" else self.singular_order
            r = sauter_rule(case, order)
            # difference stencil P (nq, 6): point difference = P @ [six vertices];
            # Q21 turns per-pair vertex Grams into squared distances in one GEMM
            diff6 = np.hstack([r.x_bary, -r.y_bary])
            iu0, iu1 = self._IU
            q21 = diff6[:, iu0] * diff6[:, iu1]
            q21[:, iu0 != iu1] *= 2.0
            wyb = r.weights[:, None] * r.y_bary
            self._rules[case] = (r, diff6, q21, wyb)
        return self._rules[case]

    def slp_values(self, ti, tj):
        """SLP pair integrals for index arrays ti, tj -> (B,)."""
        out = np.empty(len(ti))
        eq, counts = _classify_pairs(self.mesh.triangles[ti], self.mesh.triangles[tj])
        for case, sel in self._case_masks(counts):
            if sel.size:
                out[sel] = self._slp_case(case, ti[sel], tj[sel], eq[sel])
        return out

    def dlp_values(self, ti, tj):
        """DLP pair integrals -> values (B, 3) per source vertex + vertex ids (B, 3)."""
        vals = np.empty((len(ti), 3))
        eq, counts = _classify_pairs(self.mesh.triangles[ti], self.mesh.triangles[tj])
        for case, sel in self._case_masks(counts):
            if not sel.size:
                continue
            if case == "identical":
                vals[sel] = 0.0  # flat triangle: <x-y, n> vanishes identically
            else:
                vals[sel] = self._dlp_case(case, ti[sel], tj[sel], eq[sel])
        return vals, self.mesh.triangles[tj]

    @staticmethod
    def _case_masks(counts):
        return (("disjoint", np.flatnonzero(counts == 0)),
                ("vertex", np.flatnonzero(counts == 1)),
                ("edge", np.flatnonzero(counts == 2)),
                ("identical", np.flatnonzero(counts == 3)))

    def _gather(self, case, ti, tj, eq):
        """Six stacked vertex ids per pair, in the case's canonical order."""
        tris = self.mesh.triangles
        if case == "disjoint" or case == "identical":
            return np.hstack([tris[ti], tris[tj]]), None
        if case == "edge":
            perm_i, perm_j = _edge_permutations(tris[ti], tris[tj], eq)
        else:
            perm_i, perm_j = _vertex_permutations(tris[ti], tris[tj], eq)
        rows = np.arange(len(ti))[:, None]
        return np.hstack([tris[ti][rows, perm_i], tris[tj][rows, perm_j]]), perm_j

    def _slp_case(self, case, ti, tj, eq):
        rule, _, q21, _ = self.rule(case)
        ids6, _ = self._gather(case, ti, tj, eq)
        scale = 4.0 * self.mesh.areas[ti] * self.mesh.areas[tj] / FOUR_PI
        nq = len(rule)
        iu0, iu1 = self._IU
        out = np.empty(len(ti))
        step = max(1, _CHUNK_POINTS // nq)
        for a in range(0, len(ti), step):
            sl = slice(a, min(a + step, len(ti)))
            W = self.mesh.vertices[ids6[sl]]  # (nb, 6, 3)
            W = W - W[:, 0:1, :]  # local frame; exact since the stencil rows sum to 0
            gram = np.einsum("bjd,bkd->bjk", W, W)[:, iu0, iu1]
            r2 = q21 @ gram.T
            out[sl] = rule.weights @ (1.0 / np.sqrt(r2))
        return scale * out

    def _dlp_case(self, case, ti, tj, eq):
        rule, diff6, q21, wyb = self.rule(case)
        ids6, perm_j = self._gather(case, ti, tj, eq)
        scale = 4.0 * self.mesh.areas[ti] * self.mesh.areas[tj] / FOUR_PI
        nrm = self.mesh.normals[tj]
        nq = len(rule)
        iu0, iu1 = self._IU
        vals = np.empty((len(ti), 3))
        step = max(1, _CHUNK_POINTS // nq)
        for a in range(0, len(ti), step):
            sl = slice(a, min(a + step, len(ti)))
            W = self.mesh.vertices[ids6[sl]]
            W = W - W[:, 0:1, :]  # local frame; exact since the stencil rows sum to 0
            gram = np.einsum("bjd,bkd->bjk", W, W)[:, iu0, iu1]
            r2 = q21 @ gram.T
            # <x - y, n(y)> = P @ <vertex, n> per pair
            ndot = np.einsum("bjd,bd->bj", W, nrm[sl])
            kern = (diff6 @ ndot.T) / (r2 * np.sqrt(r2))
            vals[sl] = kern.T @ wyb
        vals *= scale[:, None]
        if perm_j is not None:
            # contributions are in permuted vertex order; undo the permutation
            out = np.empty_like(vals)
            rows = np.arange(len(ti))[:, None]
            out[rows, perm_j] = vals
            return out
        return vals


# ---------------------------------------------------------------------------
# Galerkin operators


class SingleLayerOperator:
    """Galerkin single layer potential: constants x constants, one DOF per triangle."""

    kind = "slp"
    symmetric = True

    def __init__(self, mesh, regular_order=3, singular_order=5):
        self.mesh = mesh
        self._ev = _PairEvaluator(mesh, regular_order, singular_order)
        self.row_basis = TriangleBasis(mesh, regular_order)
        self.col_basis = self.row_basis
        self.shape = (mesh.n_triangles, mesh.n_triangles)
        self.entry_evals = 0
        self._count_lock = threading.Lock()

    def _count(self, n):
        with self._count_lock:
            self.entry_evals += n

    def entries(self, rows, cols):
        """Entries at zipped index pairs -> (len(rows),)."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self._count(len(rows))
        return self._ev.slp_values(rows, cols)

    def block(self, rows, cols):
        """Dense submatrix rows x cols."""
        return self.block_many([(rows, cols)])[0]

    def block_many(self, items):
        """Dense submatrices for many (rows, cols) pairs in one evaluator pass.

        Batching across blocks amortizes the per-call dispatch cost, which
        matters when a build touches tens of thousands of small blocks.
        """
        items = [(np.asarray(r, dtype=np.int64), np.asarray(c, dtype=np.int64))
                 for r, c in items]
        out = []
        start = 0
        while start < len(items):
            stop = start
            npairs = 0
            while stop < len(items) and npairs < 2_000_000:
                npairs += len(items[stop][0]) * len(items[stop][1])
                stop += 1
            chunk = items[start:stop]
            ti = np.concatenate([np.repeat(r, len(c)) for r, c in chunk])
            tj = np.concatenate([np.tile(c, len(r)) for r, c in chunk])
            self._count(len(ti))
            vals = self._ev.slp_values(ti, tj)
            pos = 0
            for r, c in chunk:
                n = len(r) * len(c)
                out.append(vals[pos:pos + n].reshape(len(r), len(c)))
                pos += n
            start = stop
        return out


class DoubleLayerOperator:
    """Galerkin double layer potential: constants x hats, kernel d g / d n(y)."""

    kind = "dlp"
    symmetric = False

    def __init__(self, mesh, regular_order=3, singular_order=5):
        self.mesh = mesh
        self._ev = _PairEvaluator(mesh, regular_order, singular_order)
        self.row_basis = TriangleBasis(mesh, regular_order)
        self.col_basis = VertexBasis(mesh, regular_order)
        self.shape = (mesh.n_triangles, mesh.n_vertices)
        self.entry_evals = 0
        self._count_lock = threading.Lock()
        incidence = mesh.vertex_to_triangles()
        self._inc_ptr = np.zeros(mesh.n_vertices + 1, dtype=np.int64)
        self._inc_ptr[1:] = np.cumsum([len(t) for t in incidence])
        self._inc = np.concatenate([np.asarray(t, dtype=np.int64) for t in incidence])
        self._col_pos = np.full(mesh.n_vertices, -1, dtype=np.int64)

    def _count(self, n):
        with self._count_lock:
            self.entry_evals += n

    def entries(self, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self._count(len(rows))
        counts = self._inc_ptr[cols + 1] - self._inc_ptr[cols]
        ti = np.repeat(rows, counts)
        owner = np.repeat(np.arange(len(rows)), counts)
        tj = np.concatenate([self._inc[self._inc_ptr[c]:self._inc_ptr[c + 1]] for c in cols]) \
            if len(cols) else np.empty(0, dtype=np.int64)
        vals, vert_ids = self._ev.dlp_values(ti, tj)
        want = np.repeat(cols, counts)
        out = np.zeros(len(rows))
        hit = vert_ids == want[:, None]
        np.add.at(out, owner, (vals * hit).sum(axis=1))
        return out

    def block(self, rows, cols):
        return self.block_many([(rows, cols)])[0]

    def block_many(self, items):
        """Dense submatrices for many (tri rows, vertex cols) pairs at once.

        Each block expands its vertex columns into the union of incident
        source triangles; per-vertex hat contributions scatter back into the
        block columns afterwards.
        """
        items = [(np.asarray(r, dtype=np.int64), np.asarray(c, dtype=np.int64))
                 for r, c in items]
        out = []
        start = 0
        while start < len(items):
            stop = start
            npairs = 0
            metas = []
            while stop < len(items) and npairs < 1_000_000:
                r, c = items[stop]
                src = np.unique(self._inc[np.concatenate(
                    [np.arange(self._inc_ptr[v], self._inc_ptr[v + 1]) for v in c])]) \
                    if len(c) else np.empty(0, dtype=np.int64)
                metas.append(src)
                npairs += len(r) * len(src)
                stop += 1
            chunk = items[start:stop]
            ti = np.concatenate([np.repeat(r, len(src))
                                 for (r, _), src in zip(chunk, metas)])
            tj = np.concatenate([np.tile(src, len(r))
                                 for (r, _), src in zip(chunk, metas)])
            vals, vert_ids = self._ev.dlp_values(ti, tj)
            col_pos = self._col_pos
            pos = 0
            for (r, c), src in zip(chunk, metas):
                n = len(r) * len(src)
                v = vals[pos:pos + n]
                ids = vert_ids[pos:pos + n]
                pos += n
                self._count(len(r) * len(c))
                col_pos[c] = np.arange(len(c))
                block = np.zeros((len(r), len(c)))
                row_pos = np.repeat(np.arange(len(r)), len(src))
                p = col_pos[ids]
                keep = p >= 0
                np.add.at(block, (np.repeat(row_pos[:, None], 3, axis=1)[keep], p[keep]),
                          v[keep])
                col_pos[c] = -1
                out.append(block)
            start = stop
        return out


def assemble_dense(op, guard=8192):
    """Dense reference assembly; refuses row counts beyond the guard."""
    n_rows, n_cols = op.shape
    if max(n_rows, n_cols) > guard:
        raise ValueError(f"assemble_dense: {op.shape} exceeds the n <= {guard} guard")
    out = np.empty(op.shape)
    step = max(1, 2 ** 22 // max(n_cols, 1))
    cols = np.arange(n_cols)
    for a in range(0, n_rows, step):
        rows = np.arange(a, min(a + step, n_rows))
        out[a:a + step] = op.block(rows, cols)
    return out


# ---------------------------------------------------------------------------
# entry-level conveniences, mass matrix, L2 machinery


def slp_entry(mesh, i, j, regular_order=3, singular_order=5):
    op = SingleLayerOperator(mesh, regular_order, singular_order)
    return float(op.entries(np.array([i]), np.array([j]))[0])


def dlp_entry(mesh, i, j, regular_order=3, singular_order=5):
    op = DoubleLayerOperator(mesh, regular_order, singular_order)
    return float(op.entries(np.array([i]), np.array([j]))[0])


def mass_entry(mesh, i, j):
    """Exact integral of hat_j over triangle i: area/3 if j is a vertex of i."""
    return mesh.areas[i] / 3.0 if j in mesh.triangles[i] else 0.0


def mass_matrix(mesh):
    """Sparse (n_triangles x n_vertices) mass matrix of constants against hats."""
    nt = mesh.n_triangles
    rows = np.repeat(np.arange(nt), 3)
    cols = mesh.triangles.reshape(-1)
    vals = np.repeat(mesh.areas / 3.0, 3)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(nt, mesh.n_vertices))


def _hat_gram(mesh):
    """Sparse vertex-hat Gram matrix; per triangle A/6 on the diagonal, A/12 off."""
    tris = mesh.triangles
    nv = mesh.n_vertices
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(tris[:, a])
            cols.append(tris[:, b])
            vals.append(mesh.areas * (1.0 / 6.0 if a == b else 1.0 / 12.0))
    return scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, nv))


class SolveError(RuntimeError):
    """Iterative solve failed; carries the residual history."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


def conjugate_gradient(matvec, b, tol=1e-8, maxiter=None):
    """Plain CG for SPD operators; returns (x, iterations).

    Raises SolveError with the residual history if the relative residual
    fails to reach ``tol``.
    """
    n = len(b)
    maxiter = maxiter or 20 * n
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    nb = np.sqrt(float(b @ b))
    if nb == 0.0:
        return x, 0
    history = [np.sqrt(rs) / nb]
    for it in range(1, maxiter + 1):
        Ap = matvec(p)
        denom = float(p @ Ap)
        if denom <= 0.0:
            raise SolveError(f"CG: operator not positive definite at iteration {it}", history)
        alpha = rs / denom
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        history.append(np.sqrt(rs_new) / nb)
        if history[-1] <= tol:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolveError(f"CG: no convergence within {maxiter} iterations "
                     f"(last residual {history[-1]:.3e})", history)


def apply_operator(A, x):
    """Matrix-vector product for dense, sparse, or compressed operators."""
    if hasattr(A, "matvec"):
        return A.matvec(x)
    return A @ x


# ---------------------------------------------------------------------------
# harmonic test cases and the Dirichlet pipeline


@dataclass(frozen=True)
class HarmonicTestCase:
    """Harmonic function with analytic Dirichlet and Neumann traces."""

    name: str
    dirichlet: callable
    gradient: callable

    def neumann(self, points, normals):
        return np.einsum("...k,...k->...", self.gradient(points), normals)


def _point_source(source):
    """Unit-strength point source 1/|x - source| (harmonic off the source)."""
    source = np.asarray(source, dtype=float)

    def value(x):
        d = np.asarray(x) - source
        return 1.0 / np.sqrt(np.einsum("...k,...k->...", d, d))

    def grad(x):
        d = np.asarray(x) - source
        r = np.sqrt(np.einsum("...k,...k->...", d, d))
        return -d / (r**3)[..., None]

    return value, grad


_f2_value, _f2_grad = _point_source((1.2, 1.2, 1.2))
_f3_value, _f3_grad = _point_source((1.0, 0.25, 1.0))

TEST_CASES = {
    "f1": HarmonicTestCase(
        "f1",
        dirichlet=lambda x: np.asarray(x)[..., 0] ** 2 - np.asarray(x)[..., 2] ** 2,
        gradient=lambda x: np.stack(
            [2.0 * np.asarray(x)[..., 0], np.zeros_like(np.asarray(x)[..., 0]),
             -2.0 * np.asarray(x)[..., 2]], axis=-1),
    ),
    "f2": HarmonicTestCase("f2", dirichlet=_f2_value, gradient=_f2_grad),
    "f3": HarmonicTestCase("f3", dirichlet=_f3_value, gradient=_f3_grad),
}


def l2_projection(mesh, case, order=5, tol=1e-12):
    """Coefficients of the L2 projection of the Dirichlet trace onto the hats."""
    bary, w = triangle_rule_bary(order)
    pts = np.einsum("qk,nkd->nqd", bary, mesh.triangle_points())
    fvals = case.dirichlet(pts)
    contrib = 2.0 * mesh.areas[:, None, None] * w[None, :, None] \
        * bary[None, :, :] * fvals[:, :, None]
    rhs = np.zeros(mesh.n_vertices)
    np.add.at(rhs, mesh.triangles, contrib.sum(axis=1))
    gram = _hat_gram(mesh)
    beta, _ = conjugate_gradient(lambda v: gram @ v, rhs, tol=tol)
    return beta


def solve_dirichlet(V, K, M, beta, tol=1e-8):
    """Solve V alpha = (K + M/2) beta by CG through the given representations."""
    rhs = apply_operator(K, beta) + 0.5 * (M @ beta)
    alpha, iters = conjugate_gradient(lambda v: apply_operator(V, v), rhs, tol=tol)
    return alpha, iters


def neumann_l2_error(mesh, alpha, case, order=5):
    """Absolute L2 distance between the analytic Neumann trace and sum alpha_i phi_i."""
    bary, w = triangle_rule_bary(order)
    pts = np.einsum("qk,nkd->nqd", bary, mesh.triangle_points())
    exact = case.neumann(pts, mesh.normals[:, None, :])
    diff = (exact - alpha[:, None]) ** 2
    return float(np.sqrt(np.sum(2.0 * mesh.areas[:, None] * w[None, :] * diff)))


class BemSystem:
    """Mesh plus quadrature orders, with lazily built Galerkin operators."""

    def __init__(self, mesh, regular_order=3, singular_order=5):
        self.mesh = mesh
        self.regular_order = regular_order
        self.singular_order = singular_order
        self._slp = None
        self._dlp = None

    @property
    def slp(self):
        if self._slp is None:
            self._slp = SingleLayerOperator(self.mesh, self.regular_order, self.singular_order)
        return self._slp

    @property
    def dlp(self):
        if self._dlp is None:
            self._dlp = DoubleLayerOperator(self.mesh, self.regular_order, self.singular_order)
        return self._dlp

    def mass(self):
        return mass_matrix(self.mesh)
