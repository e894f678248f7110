"""Vectorized oracle pieces (to be moved into tests once validated)."""
import numpy as np

FOUR_PI = 4 * np.pi


def panel_potential(tri, P):
    """Closed-form int_T 1/(4 pi |p-y|) dA(y), vectorized over P (N,3)."""
    P = np.atleast_2d(P)
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    n = n / np.linalg.norm(n)
    h = (P - tri[0]) @ n
    rho = P - h[:, None] * n
    total = np.zeros(len(P))
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        L = np.linalg.norm(b - a)
        s_hat = (b - a) / L
        m_hat = np.cross(s_hat, n)
        t0 = (a - rho) @ m_hat
        sa = (a - rho) @ s_hat
        sb = (b - rho) @ s_hat
        Ra = np.linalg.norm(P - a, axis=1)
        Rb = np.linalg.norm(P - b, axis=1)
        R0sq = t0 * t0 + h * h
        ok = R0sq > 1e-28 * L * L
        num = np.maximum(Rb + sb, 1e-300)
        den = np.maximum(Ra + sa, 1e-300)
        term = t0 * np.log(num / den)
        term -= np.abs(h) * (
            np.arctan2(t0 * sb, R0sq + np.abs(h) * Rb)
            - np.arctan2(t0 * sa, R0sq + np.abs(h) * Ra)
        )
        total += np.where(ok, term, 0.0)
    return total / FOUR_PI


def _subdivide4(tri):
    a, b, c = tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return (np.array([a, ab, ca]), np.array([ab, b, bc]),
            np.array([ca, bc, c]), np.array([ab, bc, ca]))


def outer_adaptive(tri_outer, inner_fn, tol=1e-10, max_depth=16, lo=4, hi=8):
    """Adaptively integrate a continuous inner_fn (vectorized) over a triangle."""
    from greenhybrid_quad import triangle_rule_bary  # patched at import site

    b_lo, w_lo = triangle_rule_bary(lo)
    b_hi, w_hi = triangle_rule_bary(hi)

    def cell(tri, depth, tol_abs):
        area2 = np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
        v_lo = np.dot(w_lo, inner_fn(b_lo @ tri)) * area2
        v_hi = np.dot(w_hi, inner_fn(b_hi @ tri)) * area2
        if abs(v_hi - v_lo) < tol_abs or depth >= max_depth:
            return v_hi
        return sum(cell(s, depth + 1, tol_abs / 4) for s in _subdivide4(tri))

    return cell(tri_outer, 0, tol)
