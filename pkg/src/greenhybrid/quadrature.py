"""Gauss-Legendre rules, tensor rules on box faces and triangles, and
regularized 4D rules for singular Galerkin triangle pairs.

The singular pair rules follow the Sauter-Schwab recipe: split the pair
integral in relative coordinates so the distance function factors, then apply
corner Duffy maps that turn the transformed integrand into an analytic
function on [0,1]^4.  Tensor Gauss quadrature then converges exponentially in
the number of points per dimension.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussRule1D",
    "TrianglePairRule",
    "gauss_legendre",
    "tensor_face_rule",
    "triangle_tensor_rule",
    "sauter_rule",
]

PAIR_CASES = ("disjoint", "vertex", "edge", "identical")


@dataclass(frozen=True)
class GaussRule1D:
    """m-point Gauss-Legendre rule on [-1, 1]; weights sum to 2."""

    points: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.points.size

    def shifted01(self):
        """Same rule mapped to [0, 1] (weights sum to 1)."""
        return 0.5 * (self.points + 1.0), 0.5 * self.weights


@dataclass(frozen=True)
class TrianglePairRule:
    """4D rule for a double integral over a pair of reference triangles.

    Points are barycentric with respect to each triangle's vertex triple;
    the physical integral is 4*area_x*area_y * sum(w * f(x_k, y_k)).  For the
    "edge" case both triangles must list the shared edge first, traversed in
    the same direction; for "vertex" the shared vertex comes first.
    """

    case: str
    x_bary: np.ndarray
    y_bary: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.weights.size


def gauss_legendre(m):
    """m-point Gauss-Legendre rule on [-1, 1] by Newton iteration.

    Nodes start from the Chebyshev-type guesses cos(pi*(i+3/4)/(m+1/2)) and
    are polished with Newton steps on the Legendre recurrence; weights are
    2 / ((1-x^2) P_m'(x)^2).
    """
    if not 1 <= m <= 64:
        raise ValueError(f"gauss_legendre: m must be in [1, 64], got {m}")
    if m == 1:
        return GaussRule1D(np.zeros(1), np.full(1, 2.0))

    i = np.arange(m)
    x = np.cos(np.pi * (i + 0.75) / (m + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(m, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise RuntimeError("gauss_legendre: Newton iteration did not converge")
    p, dp = _legendre_and_derivative(m, x)
    x = x - p / dp
    # enforce exact antisymmetry of the node set
    x = 0.5 * (x - x[::-1])
    _, dp = _legendre_and_derivative(m, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return GaussRule1D(x[order], w[order])


def _legendre_and_derivative(m, x):
    """Value and derivative of the degree-m Legendre polynomial at x."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, m + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = m * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def tensor_face_rule(rule):
    """Tensor product of a 1D rule with itself on Q = [-1,1]^2.

    Returns (points (m^2, 2), weights (m^2,)); the weights sum to 4.
    """
    xi, w = rule.points, rule.weights
    pts = np.stack(np.meshgrid(xi, xi, indexing="ij"), axis=-1).reshape(-1, 2)
    wts = np.outer(w, w).reshape(-1)
    return pts, wts


def triangle_tensor_rule(order):
    """Duffy-mapped tensor Gauss rule on the unit triangle {x,y >= 0, x+y <= 1}.

    ``order`` is the number of Gauss points per axis; the rule has order^2
    points, positive weights summing to 1/2, and integrates bivariate
    polynomials of total degree <= order-1 exactly (in fact up to 2*order-2).
    """
    if not 1 <= order <= 16:
        raise ValueError(f"triangle_tensor_rule: order must be in [1, 16], got {order}")
    g, w = gauss_legendre(order).shifted01()
    # (x, y) = (u, (1-u) v), Jacobian (1-u)
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x = u.reshape(-1)
    y = ((1.0 - u) * v).reshape(-1)
    wts = (wu * wv * (1.0 - u)).reshape(-1)
    return np.column_stack([x, y]), wts


def triangle_rule_bary(order):
    """triangle_tensor_rule expressed in barycentric coordinates (n, 3)."""
    pts, wts = triangle_tensor_rule(order)
    bary = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    return bary, wts


def _duffy_bary(u, v):
    """Barycentric coords of points (u, v) in {0 <= v <= u <= 1}."""
    return np.stack([1.0 - u, u - v, v], axis=-1)


def _grid4(order, orders=None):
    """Tensor Gauss grid on [0,1]^4; ``orders`` overrides points per axis."""
    orders = orders or (order, order, order, order)
    gw = [gauss_legendre(m).shifted01() for m in orders]
    a, b, c, d = np.meshgrid(*(g for g, _ in gw), indexing="ij")
    w0, w1, w2, w3 = (w for _, w in gw)
    wt = (w0[:, None, None, None] * w1[None, :, None, None]
          * w2[None, None, :, None] * w3[None, None, None, :])
    return (a.ravel(), b.ravel(), c.ravel(), d.ravel()), wt.ravel()


def sauter_rule(case, order):
    """Regularized rule for a pair of triangles sharing a face, edge, vertex, or nothing.

    For the singular cases the rule lives on the Sauter reference triangle
    {0 <= v <= u <= 1} per factor and is returned in barycentric form; every
    relative-coordinate region is emitted twice with the roles of x and y
    exchanged, which also makes the value invariant under exchanging the two
    triangles.
    """
    if not 1 <= order <= 10:
        raise ValueError(f"sauter_rule: order must be in [1, 10], got {order}")
    if case == "disjoint":
        bary, wts = triangle_rule_bary(order)
        nx = bary.shape[0]
        xb = np.repeat(bary, nx, axis=0)
        yb = np.tile(bary, (nx, 1))
        w = np.repeat(wts, nx) * np.tile(wts, nx)
        return TrianglePairRule("disjoint", xb, yb, w)
    if case == "vertex":
        return _vertex_rule(order)
    if case == "edge":
        return _edge_rule(order)
    if case == "identical":
        return _identical_rule(order)
    raise ValueError(f"sauter_rule: unknown case {case!r}")


def _emit(parts):
    """Stack (x, y, w) region contributions plus their x<->y mirrors."""
    xs, ys, ws = [], [], []
    for x, y, w in parts:
        xs += [x, y]
        ys += [y, x]
        ws += [w, w]
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def _vertex_rule(order):
    # shared vertex at chi(0,0) of both triangles; split by which Duffy radius
    # is larger, scale the smaller one
    (xi, eta, w1, w2), wt = _grid4(order)
    x = _duffy_bary(xi, xi * w1)
    y = _duffy_bary(xi * eta, xi * eta * w2)
    w = wt * xi**3 * eta
    xb, yb, wb = _emit([(x, y, w)])
    return TrianglePairRule("vertex", xb, yb, wb)


def _edge_rule(order):
    # shared edge chi(0,0)->chi(1,0) of both triangles, same direction; in the
    # region u1 <= u2 substitute u1 = u2*s and corner-Duffy the remaining
    # singular triple (1-s, w1, w2)
    (u2, rho, alpha, beta), wt = _grid4(order)
    parts = []
    for w1, w2, s in (
        (rho * alpha, rho * beta, 1.0 - rho),
        (rho, rho * beta, 1.0 - rho * alpha),
        (rho * beta, rho, 1.0 - rho * alpha),
    ):
        u1 = u2 * s
        x = _duffy_bary(u1, u1 * w1)
        y = _duffy_bary(u2, u2 * w2)
        parts.append((x, y, wt * u2**3 * s * rho**2))
    xb, yb, wb = _emit(parts)
    return TrianglePairRule("edge", xb, yb, wb)


def _identical_rule(order):
    # y = x + z; the half-space z1 >= 0 of the difference domain splits into
    # three regions with triangular x-sections, each Duffy-mapped in z.  The
    # kernel distance only depends on (xi, eta) and its xi-dependence is a
    # plain power, so eta is the sole slowly-converging axis; give it extra
    # points (cost is linear in the boost, not quartic).
    (xi, eta, a, b), wt = _grid4(order, orders=(order, 2 * order + 2, order, order))
    w = wt * xi * (1.0 - xi) ** 2 * a
    parts = []
    # region I: 0 <= z2 <= z1
    x1 = (1.0 - xi) * a
    x2 = x1 * b
    parts.append((_duffy_bary(x1, x2), _duffy_bary(x1 + xi, x2 + xi * eta), w))
    # region II: 0 <= z1 <= z2
    x1 = xi * (1.0 - eta) + (1.0 - xi) * a
    x2 = (1.0 - xi) * a * b
    parts.append((_duffy_bary(x1, x2), _duffy_bary(x1 + xi * eta, x2 + xi), w))
    # region III: z2 <= 0 <= z1
    x1 = xi * (1.0 - eta) + (1.0 - xi) * a
    x2 = xi * (1.0 - eta) + (1.0 - xi) * a * b
    parts.append((_duffy_bary(x1, x2), _duffy_bary(x1 + xi * eta, x2 - xi * (1.0 - eta)), w))
    xb, yb, wb = _emit(parts)
    return TrianglePairRule("identical", xb, yb, wb)
