"""Cluster trees over index sets, block trees, and box admissibility.

Clusters carry contiguous ranges into a shared permutation of the global
index set, so every submatrix tied to a cluster is contiguous in the
permuted numbering.  Boxes are axis-parallel and tight over the support
boxes of the contained indices; diameters and distances use the max norm.
"""

import numpy as np

__all__ = ["Cluster", "Block", "build_cluster_tree", "build_block_tree",
           "admissible", "farfield_indices", "box_diameter", "box_distance",
           "cluster_leaves", "block_leaves", "iter_clusters"]


def box_diameter(lo, hi):
    """diam_inf of an axis-parallel box = longest side."""
    return float(np.max(hi - lo))


def box_distance(lo1, hi1, lo2, hi2):
    """dist_inf between two boxes = max over axes of the interval gaps."""
    gap = np.maximum(0.0, np.maximum(lo2 - hi1, lo1 - hi2))
    return float(np.max(gap))


class Cluster:
    """Node of a cluster tree: a contiguous index range plus a bounding box."""

    __slots__ = ("perm", "start", "stop", "lo", "hi", "sons", "uid")

    def __init__(self, perm, start, stop, lo, hi, sons=(), uid=-1):
        self.perm = perm
        self.start = start
        self.stop = stop
        self.lo = lo
        self.hi = hi
        self.sons = sons
        self.uid = uid

    @property
    def indices(self):
        return self.perm[self.start:self.stop]

    @property
    def size(self):
        return self.stop - self.start

    @property
    def is_leaf(self):
        return not self.sons

    def diameter(self):
        return box_diameter(self.lo, self.hi)

    def __repr__(self):
        return f"Cluster(size={self.size}, depth_box={self.lo.round(3)}..{self.hi.round(3)})"


def build_cluster_tree(support_lo, support_hi, leaf_size=16):
    """Binary cluster tree by geometric midpoint split of the longest box axis.

    support_lo/support_hi : (n, 3) per-index support boxes.
    Indices whose support-box center falls left of the midpoint go to the
    first son.  Degenerate splits (all centers on one side) fall back to
    halving by cardinality.
    """
    support_lo = np.asarray(support_lo, dtype=float)
    support_hi = np.asarray(support_hi, dtype=float)
    n = len(support_lo)
    if n == 0:
        raise ValueError("build_cluster_tree: need at least one index")
    if leaf_size < 1:
        raise ValueError("build_cluster_tree: leaf_size must be >= 1")
    perm = np.arange(n)
    centers = 0.5 * (support_lo + support_hi)
    counter = [0]

    def build(start, stop):
        idx = perm[start:stop]
        lo = support_lo[idx].min(axis=0)
        hi = support_hi[idx].max(axis=0)
        node = Cluster(perm, start, stop, lo, hi, uid=counter[0])
        counter[0] += 1
        if stop - start <= leaf_size:
            return node
        axis = int(np.argmax(hi - lo))
        mid = 0.5 * (lo[axis] + hi[axis])
        left = centers[idx, axis] <= mid
        n_left = int(left.sum())
        if n_left == 0 or n_left == stop - start:
            # coincident or one-sided supports: halve by cardinality
            order = np.argsort(centers[idx, axis], kind="stable")
            perm[start:stop] = idx[order]
            n_left = (stop - start) // 2
        else:
            perm[start:stop] = np.concatenate([idx[left], idx[~left]])
        node.sons = (build(start, start + n_left), build(start + n_left, stop))
        return node

    return build(0, n)


def admissible(t, s, eta):
    """max{diam_inf(B_t), diam_inf(B_s)} <= eta * dist_inf(B_t, B_s)."""
    d = max(t.diameter(), s.diameter())
    return d <= eta * box_distance(t.lo, t.hi, s.lo, s.hi)


class Block:
    """Node of a block tree: a cluster pair with an admissibility flag."""

    __slots__ = ("t", "s", "admissible", "sons", "uid")

    def __init__(self, t, s, adm, sons=(), uid=-1):
        self.t = t
        self.s = s
        self.admissible = adm
        self.sons = sons
        self.uid = uid

    @property
    def is_leaf(self):
        return not self.sons

    @property
    def shape(self):
        return (self.t.size, self.s.size)


def build_block_tree(row, col, eta, strict=True):
    """Minimal admissible block tree from the root pair downward.

    Inadmissible pairs split by the three-case rule: a cluster is split iff
    it has sons (both of them when both do).  With ``strict`` a leaf must be
    admissible or have two leaf clusters; otherwise one leaf cluster stops
    the recursion.
    """
    counter = [0]

    def build(t, s):
        adm = admissible(t, s, eta)
        node = Block(t, s, adm, uid=counter[0])
        counter[0] += 1
        if adm:
            return node
        stop = (t.is_leaf and s.is_leaf) if strict else (t.is_leaf or s.is_leaf)
        if stop:
            return node
        tsons = t.sons if t.sons else (t,)
        ssons = s.sons if s.sons else (s,)
        node.sons = tuple(build(tt, ss) for tt in tsons for ss in ssons)
        return node

    return build(row, col)


def farfield_indices(t, support_lo, support_hi):
    """Indices whose whole support box is at dist_inf >= diam_inf(B_t) from B_t."""
    support_lo = np.asarray(support_lo, dtype=float)
    support_hi = np.asarray(support_hi, dtype=float)
    gap = np.maximum(0.0, np.maximum(support_lo - t.hi, t.lo - support_hi))
    dist = gap.max(axis=1)
    return np.flatnonzero(dist >= t.diameter())


def iter_clusters(root):
    """All clusters of a tree, parents before children."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.sons)


def cluster_leaves(root):
    return [c for c in iter_clusters(root) if c.is_leaf]


def block_leaves(root, admissible_only=None):
    """Leaf blocks; filter with admissible_only=True/False if given."""
    out = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            if admissible_only is None or node.admissible == admissible_only:
                out.append(node)
        else:
            stack.extend(node.sons)
    return out
