"""Throwaway validation of the singular pair rules.

Oracles:
  A. graded 4D subdivision (vertex case; touching set is a point)
  B. analytic inner potential (Wilton closed form) + adaptive outer 2D rule
"""
import importlib.util

import numpy as np

spec = importlib.util.spec_from_file_location("quadrature", "src/greenhybrid/quadrature.py")
quad = importlib.util.module_from_spec(spec)
spec.loader.exec_module(quad)

FOUR_PI = 4 * np.pi


def pair_integral(rule, VX, VY):
    x = rule.x_bary @ VX
    y = rule.y_bary @ VY
    r = np.linalg.norm(x - y, axis=1)
    ax = 0.5 * np.linalg.norm(np.cross(VX[1] - VX[0], VX[2] - VX[0]))
    ay = 0.5 * np.linalg.norm(np.cross(VY[1] - VY[0], VY[2] - VY[0]))
    return 4 * ax * ay * np.sum(rule.weights / (FOUR_PI * r))


def subdivide(tri):
    a, b, c = tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return [np.array([a, ab, ca]), np.array([ab, b, bc]), np.array([ca, bc, c]), np.array([ab, bc, ca])]


def tri_quad(tri, order):
    bary, w = quad.triangle_rule_bary(order)
    pts = bary @ tri
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    return pts, 2 * area * w


def brute_pair(VX, VY, max_depth=22, order=9, sep=1.5):
    total = 0.0
    stack = [(VX, VY, 0)]
    npairs = 0
    while stack:
        tx, ty, d = stack.pop()
        cx, cy = tx.mean(0), ty.mean(0)
        rx = np.linalg.norm(tx - cx, axis=1).max()
        ry = np.linalg.norm(ty - cy, axis=1).max()
        if np.linalg.norm(cx - cy) > sep * (rx + ry) or d >= max_depth:
            px, wx = tri_quad(tx, order)
            py, wy = tri_quad(ty, order)
            r = np.linalg.norm(px[:, None, :] - py[None, :, :], axis=2)
            r = np.maximum(r, 1e-300)
            total += np.einsum("i,j,ij->", wx, wy, 1.0 / (FOUR_PI * r))
            npairs += 1
        elif rx >= ry:
            stack.extend((sx, ty, d + 1) for sx in subdivide(tx))
        else:
            stack.extend((tx, sy, d + 1) for sy in subdivide(ty))
    return total, npairs


def panel_potential(tri, p):
    """Closed-form int_T 1/(4 pi |p-y|) dA(y) for a planar triangle."""
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    n = n / np.linalg.norm(n)
    h = np.dot(p - tri[0], n)
    rho = p - h * n
    total = 0.0
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        L = np.linalg.norm(b - a)
        s_hat = (b - a) / L
        m_hat = np.cross(s_hat, n)
        t0 = np.dot(a - rho, m_hat)
        sa = np.dot(a - rho, s_hat)
        sb = np.dot(b - rho, s_hat)
        Ra = np.linalg.norm(p - a)
        Rb = np.linalg.norm(p - b)
        R0sq = t0 * t0 + h * h
        if R0sq < 1e-28 * L * L:
            continue  # p on the edge line; the limit of this term is 0
        num = Rb + sb
        den = Ra + sa
        term = t0 * np.log(max(num, 1e-300) / max(den, 1e-300))
        if abs(h) > 0:
            term -= abs(h) * (
                np.arctan2(t0 * sb, R0sq + abs(h) * Rb)
                - np.arctan2(t0 * sa, R0sq + abs(h) * Ra)
            )
        total += term
    return total / FOUR_PI


def outer_adaptive(tri_outer, inner_fn, tol=1e-9, max_depth=14):
    """Adaptive 2D integration of a continuous function over a triangle."""
    def cell(tri, d, tol_abs):
        p4, w4 = tri_quad(tri, 4)
        p8, w8 = tri_quad(tri, 8)
        v4 = sum(w * inner_fn(p) for p, w in zip(p4, w4))
        v8 = sum(w * inner_fn(p) for p, w in zip(p8, w8))
        if abs(v8 - v4) < tol_abs or d >= max_depth:
            return v8
        return sum(cell(s, d + 1, tol_abs / 4) for s in subdivide(tri))

    return cell(tri_outer, 0, tol)


print("== volume checks (weights must sum to 1/4) ==")
for case in ["disjoint", "vertex", "edge", "identical"]:
    r = quad.sauter_rule(case, 4)
    print(case, len(r), "sum w =", r.weights.sum())

print("\n== sanity: panel_potential vs plain quadrature (far point) ==")
T = np.array([[0, 0, 0], [1, 0, 0], [0.2, 0.8, 0]], float)
p = np.array([0.3, 0.4, 2.0])
pq, wq = tri_quad(T, 10)
ref = np.sum(wq / (FOUR_PI * np.linalg.norm(pq - p, axis=1)))
print("analytic:", panel_potential(T, p), " quad:", ref, " rel:", abs(panel_potential(T, p) - ref) / ref)

print("\n== vertex case vs graded 4D oracle ==")
VX = np.array([[0, 0, 0], [1, 0, 0], [0.3, 0.9, 0]])
VY = np.array([[0, 0, 0], [-0.8, 0.1, 0.4], [-0.2, -0.7, 0.5]])
ref, np_ = brute_pair(VX, VY)
refB = outer_adaptive(VX, lambda x: panel_potential(VY, x))
print("bruteA:", ref, "pairs:", np_, "  oracleB:", refB)
for order in [3, 4, 5, 6]:
    v = pair_integral(quad.sauter_rule("vertex", order), VX, VY)
    print(f"order {order}: {v:.12f}  rel err vs A {abs(v-ref)/abs(ref):.2e}  vs B {abs(v-refB)/abs(refB):.2e}")

print("\n== edge case vs oracle B (folded ~70deg) ==")
A, B = np.array([0.0, 0, 0]), np.array([1.0, 0, 0])
C1 = np.array([0.5, 0.9, 0.0])
th = np.deg2rad(70.0)
C2 = np.array([0.5, -0.9 * np.cos(th), 0.9 * np.sin(th)])
VX = np.array([A, B, C1])
VY = np.array([A, B, C2])
refB = outer_adaptive(VX, lambda x: panel_potential(VY, x))
print("oracleB:", refB)
for order in [3, 4, 5, 6, 8]:
    v = pair_integral(quad.sauter_rule("edge", order), VX, VY)
    print(f"order {order}: {v:.12f}  rel err vs B {abs(v-refB)/abs(refB):.2e}")

print("\n== edge case nearly flat (~179deg) ==")
th = np.deg2rad(179.0)
C2 = np.array([0.5, -0.9 * np.cos(th), 0.9 * np.sin(th)])
VY = np.array([A, B, C2])
refB = outer_adaptive(VX, lambda x: panel_potential(VY, x))
print("oracleB:", refB)
for order in [3, 4, 5, 6, 8]:
    v = pair_integral(quad.sauter_rule("edge", order), VX, VY)
    print(f"order {order}: {v:.12f}  rel err vs B {abs(v-refB)/abs(refB):.2e}")

print("\n== identical case vs oracle B ==")
VX = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
refB = outer_adaptive(VX, lambda x: panel_potential(VX, x))
print("oracleB:", refB)
vals = {}
for order in [3, 4, 5, 6, 8]:
    v = pair_integral(quad.sauter_rule("identical", order), VX, VX)
    vals[order] = v
    print(f"order {order}: {v:.12f}  rel vs B {abs(v-refB)/abs(refB):.2e}")
print("order5 vs order8 rel:", abs(vals[5] - vals[8]) / abs(vals[8]))
