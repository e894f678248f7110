import numpy as np
import pytest

from greenhybrid.kernel import FOUR_PI, eval_dg_dn_x, eval_dg_dn_y, eval_g


def test_unit_separation():
    assert eval_g((0, 0, 0), (1, 0, 0)) == pytest.approx(1.0 / FOUR_PI, rel=1e-15)
    assert eval_g((0, 0, 0), (1, 0, 0)) == pytest.approx(0.07957747154594767, rel=1e-14)


def test_distance_two_scaling():
    assert eval_g((0, 0, 0), (0, 2, 0)) == pytest.approx(1.0 / (8 * np.pi), rel=1e-15)


def test_symmetry(rng):
    x = rng.standard_normal((50, 3))
    y = rng.standard_normal((50, 3))
    assert np.allclose(eval_g(x, y), eval_g(y, x), rtol=0, atol=0)


def test_dg_dn_y_axis_case():
    val = eval_dg_dn_y((0, 0, 0), (1, 0, 0), (1, 0, 0))
    # d/dt 1/(4 pi t) at t=1 along the separation direction
    assert val == pytest.approx(-1.0 / FOUR_PI, rel=1e-14)


def test_dg_dn_orthogonal():
    assert eval_dg_dn_y((0, 0, 0), (1, 0, 0), (0, 1, 0)) == 0.0
    assert eval_dg_dn_x((0, 0, 0), (1, 0, 0), (0, 0, 1)) == 0.0


def test_dg_dn_x_axis_case():
    assert eval_dg_dn_x((1, 0, 0), (0, 0, 0), (1, 0, 0)) == pytest.approx(-1.0 / FOUR_PI, rel=1e-14)


def test_central_difference(rng):
    h = 1e-5
    for _ in range(10):
        x = rng.standard_normal(3)
        y = rng.standard_normal(3) + 3.0
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        fd = (eval_g(x, y + h * n) - eval_g(x, y - h * n)) / (2 * h)
        assert eval_dg_dn_y(x, y, n) == pytest.approx(fd, rel=1e-8)
        fd_x = (eval_g(x + h * n, y) - eval_g(x - h * n, y)) / (2 * h)
        assert eval_dg_dn_x(x, y, n) == pytest.approx(fd_x, rel=1e-8)


def test_antisymmetry_relation(rng):
    # grad_x g = -grad_y g for a kernel of the difference; by symmetry of g
    # the same derivative also equals the y-derivative with swapped arguments
    for _ in range(10):
        x = rng.standard_normal(3)
        y = x + rng.standard_normal(3) * 2 + 4
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        assert eval_dg_dn_x(x, y, n) == pytest.approx(-eval_dg_dn_y(x, y, n), rel=1e-14)
        assert eval_dg_dn_x(x, y, n) == pytest.approx(eval_dg_dn_y(y, x, n), rel=1e-14)


def test_harmonicity_probe(rng):
    # 6-point discrete Laplacian of g(., y) away from the source is tiny
    # relative to the stencil scale g/h^2
    y = np.zeros(3)
    h = 1e-3
    for _ in range(5):
        x = rng.standard_normal(3)
        x *= (1.0 + rng.random()) / np.linalg.norm(x)
        lap = -6.0 * eval_g(x, y)
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = h
            lap += eval_g(x + e, y) + eval_g(x - e, y)
        lap /= h * h
        assert abs(lap) <= 1e-6 * eval_g(x, y) / h**2


def test_tiny_separation_finite():
    x = np.zeros(3)
    y = np.array([1e-12, 0, 0])
    assert np.isfinite(eval_g(x, y))
    assert np.isfinite(eval_dg_dn_y(x, y, (1, 0, 0)))


def test_coincident_raises():
    with pytest.raises(ValueError):
        eval_g((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        eval_dg_dn_y((1.0, 2.0, 3.0), (1.0, 2.0, 3.0), (1, 0, 0))
