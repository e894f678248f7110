"""H-matrix and H2-matrix construction, matvec, and diagnostics.

Four construction paths over one admissible block tree:

* pure Green quadrature (per-block factors A_t, B_ts; SLP kernel only),
* Green hybrid (per-cluster cross approximation of A_t, per-block pivot rows
  and a unit-triangular solve),
* Green hybrid H2 (nested cluster bases from son-pivot restricted factors,
  small coupling matrices at pivot index pairs),
* a partial-pivot ACA baseline working directly on Galerkin entries.

Galerkin entries are only ever evaluated at pivot rows/columns of admissible
blocks and inside dense nearfield blocks; the builders keep exact tallies.
"""

import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import densela
from .cluster import build_cluster_tree, build_block_tree, block_leaves, iter_clusters
from .crossapprox import aca_full_pivot, build_interpolant, estimate_norm2
from .green import build_green_rule, assemble_A_t, assemble_B_ts

__all__ = ["HMatrix", "H2Matrix", "ClusterBasis", "BuildStats", "build_trees",
           "build_h_green", "build_h_hybrid", "build_h2", "build_h_aca_baseline",
           "matvec_h", "matvec_h2", "to_dense", "storage_report", "compare_dense"]


@dataclass
class BuildStats:
    nearfield_entries: int = 0
    farfield_entries: int = 0
    build_seconds: float = 0.0


@dataclass
class HMatrix:
    """Low-rank admissible leaves plus dense nearfield over one block tree."""

    root: object
    shape: tuple
    lowrank: dict = field(default_factory=dict)   # block uid -> (left, right)
    dense: dict = field(default_factory=dict)     # block uid -> ndarray
    cluster_norms: dict = field(default_factory=dict)  # row cluster uid -> ||V_t||_2
    cluster_pivots: dict = field(default_factory=dict)
    stats: BuildStats = field(default_factory=BuildStats)
    method: str = "green"

    def matvec(self, x):
        return matvec_h(self, x)


@dataclass
class ClusterBasis:
    """Nested cluster basis: explicit V at leaves, transfer matrices above.

    pivots map basis rows to global indices; a parent's pivots are drawn from
    the concatenation of its sons' pivots.  norm_v holds the power-iteration
    estimate of ||V_t||_2 (leaf) or ||V-hat_t||_2 (non-leaf); lam combines
    them bottom-up: lam_t = max(lam_son1, lam_son2) * ||V-hat_t||_2.
    """

    tree: object
    leaf_v: dict = field(default_factory=dict)
    transfer: dict = field(default_factory=dict)  # uid -> (E1, E2)
    pivots: dict = field(default_factory=dict)
    pc: dict = field(default_factory=dict)
    rank: dict = field(default_factory=dict)
    norm_v: dict = field(default_factory=dict)
    lam: dict = field(default_factory=dict)

    def expand(self):
        """Explicit V_t for every cluster (test/diagnostic use only)."""
        out = {}

        def rec(t):
            if t.is_leaf:
                out[t.uid] = self.leaf_v[t.uid]
            else:
                t1, t2 = t.sons
                rec(t1)
                rec(t2)
                e1, e2 = self.transfer[t.uid]
                out[t.uid] = np.vstack([out[t1.uid] @ e1, out[t2.uid] @ e2])

        rec(self.tree)
        return out


@dataclass
class H2Matrix:
    root: object
    shape: tuple
    row_basis: ClusterBasis = None
    col_basis: ClusterBasis = None
    coupling: dict = field(default_factory=dict)  # block uid -> S_b
    dense: dict = field(default_factory=dict)
    stats: BuildStats = field(default_factory=BuildStats)
    method: str = "h2"

    def matvec(self, x):
        return matvec_h2(self, x)


def build_trees(operator, leaf_size=16, eta=2.0, strict=True):
    """Cluster trees over the operator's bases plus the admissible block tree.

    Row and column trees coincide (one shared object) when the operator uses
    one basis for both sides.
    """
    row_lo, row_hi = operator.row_basis.support_boxes()
    row_tree = build_cluster_tree(row_lo, row_hi, leaf_size)
    if operator.col_basis is operator.row_basis:
        col_tree = row_tree
    else:
        col_lo, col_hi = operator.col_basis.support_boxes()
        col_tree = build_cluster_tree(col_lo, col_hi, leaf_size)
    return row_tree, col_tree, build_block_tree(row_tree, col_tree, eta, strict)


def _parallel_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fill_nearfield(container, operator, blocks, stats, threads=1):
    """Dense blocks; for a symmetric operator only one of each mirrored pair
    is evaluated, the other is its transpose.  Stats count actual evaluations.
    """
    if getattr(operator, "symmetric", False):
        by_pair = {(b.t.uid, b.s.uid): b for b in blocks}
        primary = [b for b in blocks
                   if b.t.uid <= b.s.uid or (b.s.uid, b.t.uid) not in by_pair]
        payload = operator.block_many([(b.t.indices, b.s.indices) for b in primary])
        for b, mat in zip(primary, payload):
            container[b.uid] = mat
            stats.nearfield_entries += b.t.size * b.s.size
            mirror = by_pair.get((b.s.uid, b.t.uid))
            if mirror is not None and mirror is not b and mirror.uid not in container:
                container[mirror.uid] = mat.T.copy()
        return
    payload = operator.block_many([(b.t.indices, b.s.indices) for b in blocks])
    for b, mat in zip(blocks, payload):
        container[b.uid] = mat
        stats.nearfield_entries += b.t.size * b.s.size


def _gauss_cache():
    from .quadrature import gauss_legendre

    class Cache(dict):
        def __missing__(self, m):
            self[m] = gauss_legendre(m)
            return self[m]

    return Cache()


def build_h_green(operator, block_root, m, delta_scale=0.5, threads=1):
    """Pure Green quadrature H-matrix; every admissible block gets rank 2K = 12 m^2.

    Only valid for the plain kernel operator (SLP); the factor B_ts encodes
    kernel values and first normal derivatives, nothing else.
    """
    if getattr(operator, "kind", "slp") != "slp":
        raise ValueError("build_h_green supports the single layer operator only")
    t0 = time.perf_counter()
    H = HMatrix(root=block_root, shape=operator.shape, method="green")
    cache = _gauss_cache()
    adm = block_leaves(block_root, admissible_only=True)
    by_row = {}
    for b in adm:
        by_row.setdefault(b.t.uid, (b.t, []))[1].append(b)
    for t, blocks in by_row.values():
        rule = build_green_rule(t, m, delta_scale, cache)
        A = assemble_A_t(rule, operator.row_basis, t.indices)
        rights = _parallel_map(
            lambda b: assemble_B_ts(rule, operator.col_basis, b.s.indices), blocks, threads)
        for b, B in zip(blocks, rights):
            H.lowrank[b.uid] = (A, B)
    _fill_nearfield(H.dense, operator, block_leaves(block_root, admissible_only=False),
                    H.stats, threads)
    H.stats.build_seconds = time.perf_counter() - t0
    return H


def _cluster_interpolants(operator, clusters, m, delta_scale, tol, basis, cache):
    """Full-pivot ACA of the Green row factor for each cluster in ``clusters``."""
    out = {}
    for t in clusters:
        rule = build_green_rule(t, m, delta_scale, cache)
        A = assemble_A_t(rule, basis, t.indices)
        ca = aca_full_pivot(A, tol, max_rank=A.shape[1])
        if ca.rank == 0:
            if np.max(np.abs(A)) > 0.0:
                raise RuntimeError(
                    f"cross approximation of A_t returned rank 0 for a nonzero factor "
                    f"(cluster size {t.size}); the tolerance {tol} is too large")
            raise RuntimeError("cross approximation hit an all-zero Green factor")
        out[t.uid] = (ca, t.indices[ca.rows])
    return out


def build_h_hybrid(operator, block_root, m, delta_scale=0.5, tol=1e-4, threads=1,
                   norm_iters=30):
    """Green hybrid H-matrix.

    Per row cluster: one cross approximation of A_t giving C_t, pivot rows and
    the unit-triangular (P_t C_t).  Per admissible block: evaluate the pivot
    rows of the true Galerkin block and solve (P_t C_t) B~* = P_t G by forward
    substitution; the block is stored as (C_t, B~).
    """
    t0 = time.perf_counter()
    H = HMatrix(root=block_root, shape=operator.shape, method="hybrid")
    cache = _gauss_cache()
    adm = block_leaves(block_root, admissible_only=True)
    by_row = {}
    for b in adm:
        by_row.setdefault(b.t.uid, (b.t, []))[1].append(b)
    interp = _cluster_interpolants(operator, [t for t, _ in by_row.values()],
                                   m, delta_scale, tol, operator.row_basis, cache)

    def cluster_payload(item):
        t, blocks = item
        ca, pivots = interp[t.uid]
        # evaluate every pivot strip of this row cluster in one assembly pass
        # and solve the unit-triangular systems against the concatenation
        PG = operator.block(pivots, np.concatenate([b.s.indices for b in blocks]))
        Bt_all = densela.forward_substitution(ca.pivot_matrix(), PG).T
        offs = np.cumsum([0] + [b.s.size for b in blocks])
        return [Bt_all[offs[k]:offs[k + 1]] for k in range(len(blocks))]

    groups = list(by_row.values())
    rights = _parallel_map(cluster_payload, groups, threads)
    for (t, blocks), parts in zip(groups, rights):
        ca, pivots = interp[t.uid]
        H.cluster_pivots[t.uid] = pivots
        H.cluster_norms[t.uid] = build_interpolant(ca).norm2(iters=norm_iters)
        for b, Bts in zip(blocks, parts):
            H.lowrank[b.uid] = (ca.C, Bts)
            H.stats.farfield_entries += len(pivots) * b.s.size
    _fill_nearfield(H.dense, operator, block_leaves(block_root, admissible_only=False),
                    H.stats, threads)
    H.stats.build_seconds = time.perf_counter() - t0
    return H


def _nested_basis(operator, tree, basis, m, delta_scale, tol, cache, norm_iters=30):
    """Bottom-up nested basis: ACA on A_t at leaves, on son-pivot rows above."""
    cb = ClusterBasis(tree=tree)

    def rec(t):
        rule = build_green_rule(t, m, delta_scale, cache)
        if t.is_leaf:
            rows = t.indices
        else:
            t1, t2 = t.sons
            rec(t1)
            rec(t2)
            rows = np.concatenate([cb.pivots[t1.uid], cb.pivots[t2.uid]])
        A = assemble_A_t(rule, basis, rows)
        ca = aca_full_pivot(A, tol, max_rank=A.shape[1])
        if ca.rank == 0:
            raise RuntimeError(
                f"nested basis: rank-0 cross approximation (cluster size {t.size}, tol {tol})")
        itp = build_interpolant(ca)
        cb.pivots[t.uid] = rows[ca.rows]
        cb.pc[t.uid] = ca.pivot_matrix()
        cb.rank[t.uid] = ca.rank
        cb.norm_v[t.uid] = itp.norm2(iters=norm_iters)
        if t.is_leaf:
            cb.leaf_v[t.uid] = itp.V
            cb.lam[t.uid] = cb.norm_v[t.uid]
        else:
            l1 = cb.rank[t.sons[0].uid]
            cb.transfer[t.uid] = (itp.V[:l1], itp.V[l1:])
            cb.lam[t.uid] = max(cb.lam[t.sons[0].uid], cb.lam[t.sons[1].uid]) * cb.norm_v[t.uid]

    rec(tree)
    return cb


def build_h2(operator, block_root, m, delta_scale=0.5, tol=1e-4, threads=1):
    """Green hybrid H2-matrix with nested row and column bases.

    The column basis runs the identical algorithm on the column tree with the
    kernel arguments exchanged; for the symmetric single layer operator with a
    shared tree that is the same data, so the row basis is reused.
    """
    t0 = time.perf_counter()
    row_tree = block_root.t
    col_tree = block_root.s
    for tree in (row_tree, col_tree):
        for c in iter_clusters(tree):
            if c.sons and len(c.sons) != 2:
                raise ValueError("build_h2 requires binary cluster trees")
    H = H2Matrix(root=block_root, shape=operator.shape)
    cache = _gauss_cache()
    H.row_basis = _nested_basis(operator, row_tree, operator.row_basis, m, delta_scale,
                                tol, cache)
    if col_tree is row_tree and operator.col_basis is operator.row_basis:
        H.col_basis = H.row_basis
    else:
        H.col_basis = _nested_basis(operator, col_tree, operator.col_basis, m, delta_scale,
                                    tol, cache)
    adm = block_leaves(block_root, admissible_only=True)
    if H.col_basis is H.row_basis and getattr(operator, "symmetric", False):
        by_pair = {(b.t.uid, b.s.uid): b for b in adm}
        primary = [b for b in adm
                   if b.t.uid <= b.s.uid or (b.s.uid, b.t.uid) not in by_pair]
        couplings = operator.block_many(
            [(H.row_basis.pivots[b.t.uid], H.col_basis.pivots[b.s.uid]) for b in primary])
        for b, S in zip(primary, couplings):
            H.coupling[b.uid] = S
            H.stats.farfield_entries += S.size
            mirror = by_pair.get((b.s.uid, b.t.uid))
            if mirror is not None and mirror is not b and mirror.uid not in H.coupling:
                H.coupling[mirror.uid] = S.T.copy()
    else:
        couplings = operator.block_many(
            [(H.row_basis.pivots[b.t.uid], H.col_basis.pivots[b.s.uid]) for b in adm])
        for b, S in zip(adm, couplings):
            H.coupling[b.uid] = S
            H.stats.farfield_entries += S.size
    _fill_nearfield(H.dense, operator, block_leaves(block_root, admissible_only=False),
                    H.stats, threads)
    H.stats.build_seconds = time.perf_counter() - t0
    return H


def build_h_aca_baseline(operator, block_root, eps_aca=1e-4, threads=1):
    """Partial-pivot ACA directly on Galerkin entries, block by block.

    Standard heuristic stopping rule ||c_k|| ||d_k|| <= eps * ||C D*||_F with
    the Frobenius norm accumulated on the fly; zero pivot rows are skipped,
    with a hard error once every row of the block has been tried.
    """
    t0 = time.perf_counter()
    H = HMatrix(root=block_root, shape=operator.shape, method="aca")
    adm = block_leaves(block_root, admissible_only=True)

    def payload(b):
        rows = b.t.indices
        cols = b.s.indices
        return _aca_partial(operator, rows, cols, eps_aca)

    payloads = _parallel_map(payload, adm, threads)
    for b, (C, D, nevals) in zip(adm, payloads):
        H.lowrank[b.uid] = (C, D)
        H.stats.farfield_entries += nevals
    _fill_nearfield(H.dense, operator, block_leaves(block_root, admissible_only=False),
                    H.stats, threads)
    H.stats.build_seconds = time.perf_counter() - t0
    return H


def _aca_partial(operator, rows, cols, eps):
    n, mcols = len(rows), len(cols)
    max_rank = min(n, mcols)
    cs, ds = [], []
    used = np.zeros(n, dtype=bool)
    norm_sq = 0.0
    nevals = 0
    i = 0
    tried = 0
    while len(cs) < max_rank and tried < n:
        d = operator.entries(np.full(mcols, rows[i]), cols)
        nevals += mcols
        for c_prev, d_prev in zip(cs, ds):
            d = d - c_prev[i] * d_prev
        j = int(np.argmax(np.abs(d)))
        used[i] = True
        tried += 1
        if np.abs(d[j]) < 1e-300:
            nxt = np.flatnonzero(~used)
            if nxt.size == 0:
                break
            i = int(nxt[0])
            continue
        c = operator.entries(rows, np.full(n, cols[j]))
        nevals += n
        for c_prev, d_prev in zip(cs, ds):
            c = c - d_prev[j] * c_prev
        c = c / d[j]
        for c_prev, d_prev in zip(cs, ds):
            norm_sq += 2.0 * float(c @ c_prev) * float(d @ d_prev)
        cd = float(c @ c) * float(d @ d)
        norm_sq += cd
        cs.append(c)
        ds.append(d)
        if np.sqrt(cd) <= eps * np.sqrt(max(norm_sq, 0.0)):
            break
        cand = np.where(used, -1.0, np.abs(c))
        if cand.max() < 0.0:
            break
        i = int(np.argmax(cand))
    if not cs:
        raise RuntimeError("partial-pivot ACA broke down on an all-zero block")
    return np.column_stack(cs), np.column_stack(ds), nevals


# ---------------------------------------------------------------------------
# application and diagnostics


def matvec_h(H, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != H.shape[1]:
        raise ValueError(f"matvec_h: length {x.shape[0]} vs columns {H.shape[1]}")
    y = np.zeros(H.shape[0])
    for b in block_leaves(H.root):
        if b.uid in H.lowrank:
            left, right = H.lowrank[b.uid]
            y[b.t.indices] += left @ (right.T @ x[b.s.indices])
        else:
            y[b.t.indices] += H.dense[b.uid] @ x[b.s.indices]
    return y


def matvec_h2(H, x):
    """Forward sweep over the column tree, couple, backward sweep over the row tree."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != H.shape[1]:
        raise ValueError(f"matvec_h2: length {x.shape[0]} vs columns {H.shape[1]}")
    rb, cb = H.row_basis, H.col_basis
    xhat = {}

    def forward(s):
        if s.is_leaf:
            xhat[s.uid] = cb.leaf_v[s.uid].T @ x[s.indices]
        else:
            s1, s2 = s.sons
            forward(s1)
            forward(s2)
            e1, e2 = cb.transfer[s.uid]
            xhat[s.uid] = e1.T @ xhat[s1.uid] + e2.T @ xhat[s2.uid]

    forward(cb.tree)
    y = np.zeros(H.shape[0])
    yhat = {uid: np.zeros(r) for uid, r in rb.rank.items()}
    for b in block_leaves(H.root):
        if b.uid in H.coupling:
            yhat[b.t.uid] += H.coupling[b.uid] @ xhat[b.s.uid]
        else:
            y[b.t.indices] += H.dense[b.uid] @ x[b.s.indices]

    def backward(t):
        if t.is_leaf:
            y[t.indices] += rb.leaf_v[t.uid] @ yhat[t.uid]
        else:
            t1, t2 = t.sons
            e1, e2 = rb.transfer[t.uid]
            yhat[t1.uid] += e1 @ yhat[t.uid]
            yhat[t2.uid] += e2 @ yhat[t.uid]
            backward(t1)
            backward(t2)

    backward(rb.tree)
    return y


def to_dense(H):
    """Materialize the represented matrix (diagnostics; sizes are guarded upstream)."""
    out = np.zeros(H.shape)
    if isinstance(H, H2Matrix):
        vrow = H.row_basis.expand()
        vcol = H.col_basis.expand() if H.col_basis is not H.row_basis else vrow
        for b in block_leaves(H.root):
            if b.uid in H.coupling:
                out[np.ix_(b.t.indices, b.s.indices)] = \
                    vrow[b.t.uid] @ H.coupling[b.uid] @ vcol[b.s.uid].T
            else:
                out[np.ix_(b.t.indices, b.s.indices)] = H.dense[b.uid]
        return out
    for b in block_leaves(H.root):
        if b.uid in H.lowrank:
            left, right = H.lowrank[b.uid]
            out[np.ix_(b.t.indices, b.s.indices)] = left @ right.T
        else:
            out[np.ix_(b.t.indices, b.s.indices)] = H.dense[b.uid]
    return out


def storage_report(H, operator=None, sample_columns=0, seed=0):
    """Payload bytes, bytes/DOF, rank histogram, and the stability ledger.

    Shared left factors (hybrid) count once.  With an operator and
    sample_columns > 0, a sampled farfield-column proxy of the per-cluster
    approximation error is added for a few row clusters (H2 only).
    """
    seen = set()
    total = 0
    ranks = Counter()

    def add(arr):
        nonlocal total
        if id(arr) not in seen:
            seen.add(id(arr))
            total += arr.nbytes

    if isinstance(H, H2Matrix):
        for basis in {id(H.row_basis): H.row_basis, id(H.col_basis): H.col_basis}.values():
            for v in basis.leaf_v.values():
                add(v)
            for e1, e2 in basis.transfer.values():
                add(e1)
                add(e2)
        for s in H.coupling.values():
            add(s)
            ranks[min(s.shape)] += 1
        lam = dict(H.row_basis.lam)
        norms = dict(H.row_basis.norm_v)
    else:
        for left, right in H.lowrank.values():
            add(left)
            add(right)
            ranks[left.shape[1]] += 1
        lam = dict(H.cluster_norms)
        norms = dict(H.cluster_norms)
    for d in H.dense.values():
        add(d)
    report = {
        "bytes": total,
        "bytes_per_dof": total / H.shape[0],
        "rank_histogram": dict(sorted(ranks.items())),
        "lambda": lam,
        "cluster_norms": norms,
        "method": H.method,
    }
    if sample_columns and operator is not None and isinstance(H, H2Matrix):
        report["eps_proxy"] = _eps_proxy(H, operator, sample_columns, seed)
    return report


def _eps_proxy(H, operator, sample_columns, seed):
    """Sampled ||G|_{t x F_t} - J_t G|_{t x F_t}||_2 for a few row clusters."""
    from .cluster import farfield_indices

    rng = np.random.default_rng(seed)
    lo, hi = operator.col_basis.support_boxes()
    vrow = H.row_basis.expand()
    out = {}
    clusters = [c for c in iter_clusters(H.row_basis.tree) if c.uid in H.row_basis.pivots]
    for t in clusters[: min(8, len(clusters))]:
        far = farfield_indices(t, lo, hi)
        if far.size == 0:
            continue
        cols = rng.choice(far, size=min(sample_columns, far.size), replace=False)
        G = operator.block(t.indices, cols)
        # pivot rows are global ids; locate them inside t.indices
        loc = {g: k for k, g in enumerate(t.indices)}
        rows_local = np.array([loc[g] for g in H.row_basis.pivots[t.uid]])
        approx = vrow[t.uid] @ G[rows_local]
        out[t.uid] = densela.spectral_error(G, approx, iters=50, seed=seed)
    return out


def compare_dense(H, dense, iters=100, guard=8192, seed=0):
    """Relative Frobenius and spectral errors of a compressed matrix vs a dense reference."""
    dense = np.asarray(dense, dtype=float)
    if max(dense.shape) > guard:
        raise ValueError(f"compare_dense: {dense.shape} exceeds the n <= {guard} guard")
    mat = to_dense(H)
    rel_f = densela.frobenius_norm(mat - dense) / densela.frobenius_norm(dense)
    rel_2 = densela.spectral_error(mat, dense, iters=iters, seed=seed) \
        / max(estimate_norm2(dense, iters=iters, seed=seed), 1e-300)
    return {"rel_frobenius": rel_f, "rel_spectral": rel_2}
