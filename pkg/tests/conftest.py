"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest
from hypothesis import settings

from specint import (
    DenseSpec,
    eigendecompose,
    get_operator,
    make_truncation,
    stream,
    unit_vector,
)

settings.register_profile("suite", deadline=None, max_examples=100)
settings.load_profile("suite")

REGISTRY_NAMES = ("diag3", "free_jacobi", "discrete_laplacian", "harmonic_oscillator")


def decomposed(name, n, weights=None):
    """Truncation + eigendecomposition for a registry operator."""
    t = make_truncation(get_operator(name), n, weights=weights)
    return t, eigendecompose(t)


def flip_spec():
    """The 2x2 exchange matrix [[0,1],[1,0]]: eigenvalues -1, +1."""
    return DenseSpec(matrix=np.array([[0.0, 1.0], [1.0, 0.0]]), name="flip")


def seeded_vectors(label, n, count, complex_field=False, seed=0):
    gen = stream(seed, label)
    return [unit_vector(gen, n, complex_field=complex_field) for _ in range(count)]


@pytest.fixture
def diag3():
    return decomposed("diag3", 3)


@pytest.fixture
def flip2():
    t = make_truncation(flip_spec(), 2)
    return t, eigendecompose(t)


@pytest.fixture
def jacobi32():
    return decomposed("free_jacobi", 32)
