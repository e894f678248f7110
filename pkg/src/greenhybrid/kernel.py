"""Laplace fundamental solution g(x,y) = 1/(4*pi*|x-y|) and its normal derivatives.

All evaluators broadcast over leading axes: ``x`` and ``y`` may be single
points of shape (3,) or stacks of shape (..., 3).  Coincident point pairs are
a domain error.
"""

from dataclasses import dataclass

import numpy as np

FOUR_PI = 4.0 * np.pi

# kernel is singular like |x-y|^-sigma with sigma = 1 in 3D
SINGULARITY_ORDER = 1


@dataclass(frozen=True)
class LaplaceKernel:
    """3D Laplace kernel; symmetric, singularity order 1."""

    singularity_order: int = SINGULARITY_ORDER

    evaluate = staticmethod(lambda x, y: eval_g(x, y))
    normal_derivative_y = staticmethod(lambda x, y, n: eval_dg_dn_y(x, y, n))
    normal_derivative_x = staticmethod(lambda x, y, n: eval_dg_dn_x(x, y, n))


def _separation(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.sqrt(np.einsum("...k,...k->...", d, d))
    if np.any(r == 0.0):
        raise ValueError("kernel evaluated at coincident points")
    return d, r


def eval_g(x, y):
    """Fundamental solution 1/(4*pi*|x-y|)."""
    _, r = _separation(x, y)
    return 1.0 / (FOUR_PI * r)


def eval_dg_dn_y(x, y, n):
    """Normal derivative in the second argument, <grad_y g(x,y), n>.

    Equals <x-y, n> / (4*pi*|x-y|^3); ``n`` broadcasts like the points.
    """
    d, r = _separation(x, y)
    return np.einsum("...k,...k->...", d, np.asarray(n, dtype=float)) / (FOUR_PI * r**3)


def eval_dg_dn_x(x, y, n):
    """Normal derivative in the first argument, <grad_x g(x,y), n> = <y-x, n> / (4*pi*|x-y|^3)."""
    d, r = _separation(x, y)
    return -np.einsum("...k,...k->...", d, np.asarray(n, dtype=float)) / (FOUR_PI * r**3)
