"""Eigendecomposition, clustering, projections, and graph residuals."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from specint import (
    DenseSpec,
    DiagonalSpec,
    ValidationError,
    eigendecompose,
    eigenprojection_apply,
    make_truncation,
)
from conftest import decomposed, flip_spec


class TestEigendecompose:
    def test_diagonal_clusters(self, diag3):
        t, d = diag3
        np.testing.assert_allclose(d.representatives, [1.0, 2.0, 3.0], atol=1e-14)
        assert d.cluster_count == 3
        for i in range(3):
            assert d.multiplicity(i) == 1
            basis = d.basis(i)
            want = np.zeros((3, 1))
            want[i, 0] = 1.0
            np.testing.assert_allclose(np.abs(basis), want, atol=1e-14)

    def test_flip_eigensystem(self, flip2):
        t, d = flip2
        np.testing.assert_allclose(d.representatives, [-1.0, 1.0], atol=1e-14)
        minus = d.basis(0)[:, 0]
        plus = d.basis(1)[:, 0]
        r = 1 / np.sqrt(2)
        # eigenvectors are (1, -1)/sqrt(2) and (1, 1)/sqrt(2) up to sign
        np.testing.assert_allclose(np.abs(minus), [r, r], atol=1e-14)
        np.testing.assert_allclose(np.abs(plus), [r, r], atol=1e-14)
        assert minus[0] * minus[1] == pytest.approx(-0.5, abs=1e-14)
        assert plus[0] * plus[1] == pytest.approx(0.5, abs=1e-14)

    def test_repeated_entry_clusters(self):
        t = make_truncation(DiagonalSpec(entries=(2.0, 2.0, 5.0), name="deg"), 3)
        d = eigendecompose(t)
        assert d.cluster_count == 2
        np.testing.assert_allclose(d.representatives, [2.0, 5.0], atol=1e-14)
        assert d.multiplicity(0) == 2
        assert d.multiplicity(1) == 1

    def test_multiplicity_from_cycled_entries(self):
        # diag3 cycles (1,2,3), so at size 6 every value has multiplicity 2
        t, d = decomposed("diag3", 6)
        assert d.cluster_count == 3
        assert [d.multiplicity(i) for i in range(3)] == [2, 2, 2]

    def test_representatives_strictly_increasing(self):
        for name in ("free_jacobi", "discrete_laplacian", "harmonic_oscillator"):
            _, d = decomposed(name, 24)
            assert np.all(np.diff(d.representatives) > 0)

    def test_eigenvalue_count(self, jacobi32):
        t, d = jacobi32
        total = sum(d.multiplicity(i) for i in range(d.cluster_count))
        assert total == 32
        assert d.eigenvalues.shape == (32,)

    @given(st.integers(min_value=0, max_value=9))
    def test_random_symmetric_reconstruction(self, trial):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(2, 12))
        m = rng.normal(size=(n, n))
        m = (m + m.T) / 2
        t = make_truncation(DenseSpec(matrix=m, name="rnd"), n)
        d = eigendecompose(t)
        rebuilt = np.zeros((n, n))
        for i in range(d.cluster_count):
            basis = d.basis(i)
            rebuilt += d.representatives[i] * (basis @ basis.T)
        tol = 1e-10 * (1 + t.scale * n)
        assert np.max(np.abs(rebuilt - m)) <= tol

    def test_projectors_resolve_identity(self, jacobi32):
        t, d = jacobi32
        total = np.zeros((32, 32))
        for i in range(d.cluster_count):
            total += d.projection(i)
        np.testing.assert_allclose(total, np.eye(32), atol=1e-12)

    def test_projectors_mutually_orthogonal(self, diag3):
        t, d = diag3
        for i in range(d.cluster_count):
            for j in range(d.cluster_count):
                prod = d.projection(i) @ d.projection(j)
                want = d.projection(i) if i == j else np.zeros((3, 3))
                np.testing.assert_allclose(prod, want, atol=1e-12)

    def test_projection_commutes_with_matrix(self, jacobi32):
        t, d = jacobi32
        rng = np.random.default_rng(17)
        x = rng.normal(size=32)
        tol = 1e-10 * (1 + t.scale * 32) * np.linalg.norm(x)
        for i in range(d.cluster_count):
            lhs = eigenprojection_apply(d, i, t.matrix @ x)
            rhs = t.matrix @ eigenprojection_apply(d, i, x)
            assert np.linalg.norm(lhs - rhs) <= tol


class TestEigenprojectionApply:
    def test_eigenvector_fixed(self, diag3):
        _, d = diag3
        e1 = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(eigenprojection_apply(d, 0, e1), e1, atol=1e-14)

    def test_orthogonal_eigenspace_killed(self, diag3):
        _, d = diag3
        e2 = np.array([0.0, 1.0, 0.0])
        np.testing.assert_allclose(
            eigenprojection_apply(d, 0, e2), np.zeros(3), atol=1e-14
        )

    def test_flip_projection_of_basis_vector(self, flip2):
        _, d = flip2
        e1 = np.array([1.0, 0.0])
        plus = d.cluster_index(1.0)
        np.testing.assert_allclose(
            eigenprojection_apply(d, plus, e1), [0.5, 0.5], atol=1e-14
        )

    def test_cluster_lookup_by_position(self, diag3):
        _, d = diag3
        assert d.cluster_index(2.0) == 1
        with pytest.raises(ValidationError):
            d.cluster_index(2.5)

    def test_dimension_mismatch_rejected(self, diag3):
        _, d = diag3
        with pytest.raises(ValidationError):
            eigenprojection_apply(d, 0, np.ones(4))
