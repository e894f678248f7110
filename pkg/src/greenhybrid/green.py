"""Green-quadrature factorization of the Laplace kernel on cluster boxes.

For a cluster box B_t inflated by delta per axis, Gauss points on the six
faces of the inflated box turn Green's representation formula into a
degenerate kernel: admissible blocks factor as A_t @ B_ts.T, where A_t
depends on the row cluster only.  Column layout of both factors is
[+block | -block] with the +block built from kernel values and the -block
from normal derivatives, carrying the delta scalings that balance the two
singularity orders.
"""

from dataclasses import dataclass

import numpy as np

from . import kernel
from .cluster import box_distance

__all__ = ["GreenRule", "GreenFactor", "build_green_rule", "assemble_A_t",
           "assemble_B_ts", "green_block"]


@dataclass(frozen=True)
class GreenRule:
    """Boundary quadrature of the inflated box omega_t.

    points/weights/normals have one entry per rule node; size is 2*d*m^(d-1)
    = 6 m^2.  Every point sits exactly on a face of omega_t, at inf-distance
    ``delta`` from the cluster box.
    """

    lo: np.ndarray
    hi: np.ndarray
    delta: float
    m: int
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray

    @property
    def size(self):
        return len(self.weights)


@dataclass(frozen=True)
class GreenFactor:
    """Low-rank pairing for one admissible block: dense ~ A @ B.T."""

    A: np.ndarray
    B: np.ndarray

    @property
    def rank(self):
        return self.A.shape[1]


def build_green_rule(t, m, delta_scale, gauss_cache=None):
    """Tensor Gauss rule on the boundary of the per-axis inflated cluster box.

    delta = delta_scale * diam_inf(B_t); the analyzed choice is 0.5, the
    empirically better one 1.0.  Face weights carry the surface measure
    (product of the two in-plane half side lengths of omega_t).
    """
    from .quadrature import gauss_legendre, tensor_face_rule

    diam = t.diameter()
    if diam <= 0.0:
        raise ValueError("build_green_rule: cluster box has zero diameter")
    delta = delta_scale * diam
    lo = t.lo - delta
    hi = t.hi + delta
    rule1d = gauss_cache[m] if gauss_cache else gauss_legendre(m)
    face_pts, face_wts = tensor_face_rule(rule1d)

    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    points, weights, normals = [], [], []
    for axis in range(3):
        free = [a for a in range(3) if a != axis]
        surf = half[free[0]] * half[free[1]]
        for side, pin in ((-1.0, lo[axis]), (1.0, hi[axis])):
            z = np.empty((len(face_wts), 3))
            z[:, axis] = pin
            z[:, free[0]] = center[free[0]] + half[free[0]] * face_pts[:, 0]
            z[:, free[1]] = center[free[1]] + half[free[1]] * face_pts[:, 1]
            n = np.zeros((len(face_wts), 3))
            n[:, axis] = side
            points.append(z)
            weights.append(face_wts * surf)
            normals.append(n)
    return GreenRule(lo=lo, hi=hi, delta=delta, m=m,
                     points=np.concatenate(points),
                     weights=np.concatenate(weights),
                     normals=np.concatenate(normals))


def assemble_A_t(rule, basis, indices):
    """Row factor A_t: (len(indices), 2K) with columns [+block | -block].

    +block entries are sqrt(w_nu) * integral of basis_i(x) g(x, z_nu);
    -block entries carry the extra delta factor and the face-normal
    derivative of g in the z argument.
    """
    pts, wts = basis.quad(indices)  # (n, Q, 3), (n, Q); weights absorb basis values
    z = rule.points
    diff = pts[:, :, None, :] - z[None, None, :, :]  # (n, Q, K, 3)
    r = np.sqrt(np.einsum("nqkd,nqkd->nqk", diff, diff))
    g = 1.0 / (kernel.FOUR_PI * r)
    # <grad_z g(x,z), n> = <x-z, n> / (4 pi r^3)
    dgdn = np.einsum("nqkd,kd->nqk", diff, rule.normals) / (kernel.FOUR_PI * r**3)
    sqw = np.sqrt(rule.weights)
    plus = np.einsum("nq,nqk->nk", wts, g) * sqw
    minus = rule.delta * sqw * np.einsum("nq,nqk->nk", wts, dgdn)
    return np.hstack([plus, minus])


def assemble_B_ts(rule, basis, indices):
    """Column factor B_ts: (len(indices), 2K), columns [+block | -block].

    +block uses the face-normal derivative of g in the first (z) argument,
    -block is -(1/delta) times plain kernel values.
    """
    pts, wts = basis.quad(indices)
    z = rule.points
    diff = z[None, None, :, :] - pts[:, :, None, :]  # z - y, (n, Q, K, 3)
    r = np.sqrt(np.einsum("nqkd,nqkd->nqk", diff, diff))
    g = 1.0 / (kernel.FOUR_PI * r)
    # <grad_z g(z,y), n> = <y-z, n> / (4 pi r^3) = -<z-y, n> / (4 pi r^3)
    dgdn = -np.einsum("nqkd,kd->nqk", diff, rule.normals) / (kernel.FOUR_PI * r**3)
    sqw = np.sqrt(rule.weights)
    plus = np.einsum("nq,nqk->nk", wts, dgdn) * sqw
    minus = -(sqw / rule.delta) * np.einsum("nq,nqk->nk", wts, g)
    return np.hstack([plus, minus])


def green_block(t, s, row_basis, col_basis, m, delta_scale, eta=1.0):
    """Low-rank pairing (A_t, B_ts) for an admissible block; rank = 2K = 12 m^2."""
    if box_distance(t.lo, t.hi, s.lo, s.hi) < max(t.diameter(), s.diameter()) / eta:
        raise ValueError("green_block: block (t, s) is not admissible")
    rule = build_green_rule(t, m, delta_scale)
    A = assemble_A_t(rule, row_basis, t.indices)
    B = assemble_B_ts(rule, col_basis, s.indices)
    return GreenFactor(A=A, B=B)
