import numpy as np
import pytest

from greenhybrid import bem, generate_sphere

_CACHE = {}


@pytest.fixture(scope="session")
def sphere():
    def get(level):
        key = ("mesh", level)
        if key not in _CACHE:
            _CACHE[key] = generate_sphere(level)
        return _CACHE[key]

    return get


@pytest.fixture(scope="session")
def dense_slp(sphere):
    """Dense single layer matrix at a given level, cached for the whole run."""

    def get(level, regular_order=3, singular_order=5):
        key = ("slp", level, regular_order, singular_order)
        if key not in _CACHE:
            op = bem.SingleLayerOperator(sphere(level), regular_order, singular_order)
            _CACHE[key] = bem.assemble_dense(op)
        return _CACHE[key]

    return get


@pytest.fixture(scope="session")
def dense_dlp(sphere):
    def get(level):
        key = ("dlp", level)
        if key not in _CACHE:
            op = bem.DoubleLayerOperator(sphere(level))
            _CACHE[key] = bem.assemble_dense(op)
        return _CACHE[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
