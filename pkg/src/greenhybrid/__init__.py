"""Compression of Laplace boundary-element matrices by Green quadrature and
nested cross approximation.

The package builds Galerkin single/double layer potential matrices on closed
triangulated surfaces and compresses them into hierarchical (H) and H2-matrix
form.  The farfield factorization comes from Gauss quadrature applied to
Green's representation formula on the boundary of an inflated bounding box;
full-pivot cross approximation of the resulting thin factors yields an
algebraic interpolation operator that drives both the per-block hybrid
compression and the nested (H2) cluster bases.
"""

from .geometry import TriangleMesh, generate_sphere, load_off, validate
from .cluster import Cluster, Block, build_cluster_tree, build_block_tree, admissible
from .quadrature import gauss_legendre, tensor_face_rule, triangle_tensor_rule, sauter_rule
from .kernel import eval_g, eval_dg_dn_x, eval_dg_dn_y
from .green import GreenRule, build_green_rule, assemble_A_t, assemble_B_ts, green_block
from .crossapprox import CrossApprox, aca_full_pivot, build_interpolant, estimate_norm2
from .hierarchy import (
    HMatrix,
    H2Matrix,
    build_h_green,
    build_h_hybrid,
    build_h2,
    build_h_aca_baseline,
    matvec_h,
    matvec_h2,
    storage_report,
    compare_dense,
    build_trees,
)
from .bem import (
    BemSystem,
    HarmonicTestCase,
    TEST_CASES,
    SingleLayerOperator,
    DoubleLayerOperator,
    mass_matrix,
    l2_projection,
    solve_dirichlet,
    neumann_l2_error,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
