import numpy as np
import pytest

from greenhybrid import bem
from greenhybrid.cluster import (
    Cluster, admissible, block_leaves, build_block_tree, build_cluster_tree,
    cluster_leaves, farfield_indices, iter_clusters,
)


def boxes_of(mesh):
    p = mesh.triangle_points()
    return p.min(axis=1), p.max(axis=1)


def make_cluster(lo, hi):
    perm = np.arange(1)
    return Cluster(perm, 0, 1, np.asarray(lo, float), np.asarray(hi, float))


def leaf_index_union(root):
    out = []
    for leaf in cluster_leaves(root):
        out.extend(leaf.indices.tolist())
    return out


def test_single_index():
    lo = np.array([[0.0, 0, 0]])
    hi = np.array([[1.0, 1, 1]])
    root = build_cluster_tree(lo, hi, leaf_size=4)
    assert root.is_leaf
    assert np.allclose(root.lo, lo[0]) and np.allclose(root.hi, hi[0])


def test_octahedron_tree(sphere):
    lo, hi = boxes_of(sphere(0))
    root = build_cluster_tree(lo, hi, leaf_size=2)
    assert all(leaf.size <= 2 for leaf in cluster_leaves(root))
    # disjoint union of leaves == all indices (traversal oracle)
    assert sorted(leaf_index_union(root)) == list(range(8))
    depth = 0
    node = root
    while node.sons:
        node = node.sons[0]
        depth += 1
    assert depth >= 2


def test_sphere_tree_partition(sphere):
    mesh = sphere(4)
    lo, hi = boxes_of(mesh)
    root = build_cluster_tree(lo, hi, leaf_size=16)
    leaves = cluster_leaves(root)
    assert all(leaf.size <= 16 for leaf in leaves)
    assert sorted(leaf_index_union(root)) == list(range(mesh.n_triangles))
    # boxes tight over supports
    for node in iter_clusters(root):
        idx = node.indices
        assert np.allclose(node.lo, lo[idx].min(axis=0))
        assert np.allclose(node.hi, hi[idx].max(axis=0))


def test_degenerate_supports_fall_back():
    lo = np.zeros((8, 3))
    hi = np.zeros((8, 3))
    root = build_cluster_tree(lo, hi, leaf_size=2)
    assert sorted(leaf_index_union(root)) == list(range(8))


def test_admissible_cases():
    a = make_cluster([0, 0, 0], [1, 1, 1])
    assert not admissible(a, a, 1.0)
    b = make_cluster([2, 2, 2], [3, 3, 3])
    assert admissible(a, b, 1.0)          # diam 1, dist 1
    assert not admissible(a, b, 0.5)      # 1 <= 0.5 fails
    assert admissible(a, b, 2.0)


def test_admissibility_monotone_in_eta(sphere, rng):
    lo, hi = boxes_of(sphere(3))
    root = build_cluster_tree(lo, hi, leaf_size=16)
    nodes = list(iter_clusters(root))
    for _ in range(200):
        t, s = rng.choice(len(nodes), 2)
        t, s = nodes[t], nodes[s]
        if admissible(t, s, 1.0):
            assert admissible(t, s, 2.0)


def test_block_tree_trivial_cases():
    t = make_cluster([0, 0, 0], [1, 1, 1])
    root = build_block_tree(t, t, eta=1.0)
    assert root.is_leaf and not root.admissible
    s = make_cluster([5, 5, 5], [6, 6, 6])
    root = build_block_tree(t, s, eta=1.0)
    assert root.is_leaf and root.admissible


def test_block_tree_partitions_product(sphere):
    mesh = sphere(4)
    n = mesh.n_triangles
    lo, hi = boxes_of(mesh)
    tree = build_cluster_tree(lo, hi, leaf_size=16)
    root = build_block_tree(tree, tree, eta=2.0, strict=True)
    leaves = block_leaves(root)
    assert sum(b.t.size * b.s.size for b in leaves) == n * n
    # strict: every leaf is admissible or pairs two leaf clusters
    assert all(b.admissible or (b.t.is_leaf and b.s.is_leaf) for b in leaves)


def test_block_tree_nonstrict_leaf_rule(sphere):
    mesh = sphere(3)
    lo, hi = boxes_of(mesh)
    tree = build_cluster_tree(lo, hi, leaf_size=16)
    root = build_block_tree(tree, tree, eta=1.0, strict=False)
    for b in block_leaves(root):
        assert b.admissible or b.t.is_leaf or b.s.is_leaf


def test_farfield_whole_mesh_is_empty(sphere):
    mesh = sphere(2)
    lo, hi = boxes_of(mesh)
    root = build_cluster_tree(lo, hi, leaf_size=16)
    assert farfield_indices(root, lo, hi).size == 0


def test_farfield_opposite_patch(sphere):
    mesh = sphere(3)
    lo, hi = boxes_of(mesh)
    root = build_cluster_tree(lo, hi, leaf_size=8)
    leaf = cluster_leaves(root)[0]
    far = farfield_indices(leaf, lo, hi)
    direction = 0.5 * (leaf.lo + leaf.hi)
    direction /= np.linalg.norm(direction)
    # the triangle diametrically opposite the patch must be in the farfield
    antipode = int(np.argmin(np.linalg.norm(mesh.centroids + direction, axis=1)))
    assert antipode in far


def test_admissible_blocks_lie_in_farfield(sphere):
    mesh = sphere(3)
    lo, hi = boxes_of(mesh)
    tree = build_cluster_tree(lo, hi, leaf_size=16)
    root = build_block_tree(tree, tree, eta=1.0, strict=True)
    for b in block_leaves(root, admissible_only=True)[:50]:
        far = set(farfield_indices(b.t, lo, hi).tolist())
        assert set(b.s.indices.tolist()) <= far


def test_indices_contiguous_permutation(sphere):
    mesh = sphere(3)
    lo, hi = boxes_of(mesh)
    root = build_cluster_tree(lo, hi, leaf_size=16)
    for node in iter_clusters(root):
        assert node.perm is root.perm
        assert node.stop > node.start
