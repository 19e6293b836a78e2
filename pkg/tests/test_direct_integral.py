"""Direct-integral space: embedding isometry, multiplication, projections."""

import math

import numpy as np
import pytest

from specint import (
    ConditioningError,
    DenseSpec,
    DiagonalSpec,
    ScalarField,
    Section,
    ValidationError,
    build_direct_integral,
    eigendecompose,
    embed,
    inner,
    inner_product,
    intertwining_residual,
    make_truncation,
    multiply,
    norm,
    pair_measure,
    project_onto_range,
)
from conftest import REGISTRY_NAMES, decomposed, seeded_vectors


def integral_for(name, n):
    t = make_truncation(__import__("specint").get_operator(name), n)
    return t, build_direct_integral(t)


class TestEmbed:
    def test_basis_vector_gives_frame_section(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        e1 = np.array([1.0, 0, 0])
        xs = embed(di, e1)
        # supported on the first atom only, with the frame's leading vector
        np.testing.assert_allclose(xs.blocks[0], [np.sqrt(7 / 4)], atol=1e-14)
        np.testing.assert_allclose(xs.blocks[1], [0.0], atol=1e-15)
        np.testing.assert_allclose(xs.blocks[2], [0.0], atol=1e-15)
        assert norm(di, xs) == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        with pytest.raises(ValidationError):
            embed(di, np.ones(5))

    @pytest.mark.parametrize("name", REGISTRY_NAMES)
    def test_isometry_on_seeded_vectors(self, name):
        t, di = integral_for(name, 32)
        for x in seeded_vectors(f"iso:{name}", 32, 10):
            xs = embed(di, x)
            assert abs(norm(di, xs) - 1.0) <= 1e-9

    def test_isometry_complex_field(self):
        rng = np.random.default_rng(41)
        raw = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        herm = (raw + raw.conj().T) / 2
        t = make_truncation(
            DenseSpec(matrix=herm, field=ScalarField.COMPLEX, name="c8"), 8
        )
        di = build_direct_integral(t)
        for x in seeded_vectors("iso-c", 8, 5, complex_field=True):
            assert abs(norm(di, embed(di, x)) - 1.0) <= 1e-9


class TestInnerProduct:
    def test_orthonormal_basis_preserved(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        basis_sections = [embed(di, np.eye(32)[j]) for j in range(6)]
        for j, xj in enumerate(basis_sections):
            for l, xl in enumerate(basis_sections):
                want = 1.0 if j == l else 0.0
                assert inner_product(di, xj, xl) == pytest.approx(want, abs=1e-10)

    def test_zero_section(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        zs = embed(di, np.zeros(3))
        assert inner_product(di, zs, zs) == 0.0

    def test_polarization(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        xs = seeded_vectors("ip-x", 32, 8)
        ys = seeded_vectors("ip-y", 32, 8)
        for x, y in zip(xs, ys):
            got = inner_product(di, embed(di, x), embed(di, y))
            assert got == pytest.approx(complex(inner(x, y)), abs=1e-9)

    def test_pair_measure_density_identity(self, jacobi32):
        # per atom: <U(x)(l), U(y)(l)> * mass(l) equals the pair-measure atom
        t, d = jacobi32
        di = build_direct_integral(t, d)
        x = seeded_vectors("rn-x", 32, 1)[0]
        y = seeded_vectors("rn-y", 32, 1)[0]
        nu = pair_measure(t, d, x, y)
        xs, ys = embed(di, x), embed(di, y)
        lookup = dict(zip(nu.positions, nu.masses))
        for i, lam in enumerate(di.measure.positions):
            fiber = complex(inner(xs.blocks[i], ys.blocks[i]))
            want = complex(lookup.get(float(lam), 0.0))
            assert fiber * di.measure.masses[i] == pytest.approx(want, abs=1e-9)


class TestSectionAlgebra:
    def test_add_sub_scale(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        a = embed(di, np.array([1.0, 2.0, 0.0]))
        b = embed(di, np.array([0.0, 1.0, -1.0]))
        lhs = (a + b) - b.scale(1.0)
        for blk_l, blk_a in zip(lhs.blocks, a.blocks):
            np.testing.assert_allclose(blk_l, blk_a, atol=1e-12)
        linear = embed(di, np.array([1.0, 3.0, -1.0]))
        summed = a + b
        for blk_s, blk_lin in zip(summed.blocks, linear.blocks):
            np.testing.assert_allclose(blk_s, blk_lin, atol=1e-12)


class TestMultiply:
    def test_constant_one_is_identity(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        xs = embed(di, seeded_vectors("mul-1", 32, 1)[0])
        same = multiply(di, lambda s: 1.0, xs)
        for a, b in zip(same.blocks, xs.blocks):
            np.testing.assert_allclose(a, b, atol=1e-15)

    def test_indicator_off_support_annihilates(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        xs = embed(di, np.array([1.0, 1.0, 1.0]) / np.sqrt(3))
        killed = multiply(di, lambda s: 1.0 if s > 10 else 0.0, xs)
        assert norm(di, killed) == 0.0

    def test_identity_function_scales_eigen_atom(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        xs = embed(di, np.array([1.0, 0.0, 0.0]))
        scaled = multiply(di, lambda s: s, xs)
        # the only populated atom sits at position 1, so nothing changes
        for a, b in zip(scaled.blocks, xs.blocks):
            np.testing.assert_allclose(a, b, atol=1e-14)

    def test_composition_is_product(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        xs = embed(di, seeded_vectors("mul-c", 32, 1)[0])
        f = lambda s: s + 0.5
        g = lambda s: s * s - 1.0
        twice = multiply(di, f, multiply(di, g, xs))
        once = multiply(di, lambda s: f(s) * g(s), xs)
        for a, b in zip(twice.blocks, once.blocks):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_real_symbol_self_adjoint(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        xs = embed(di, seeded_vectors("sa-x", 32, 1)[0])
        ys = embed(di, seeded_vectors("sa-y", 32, 1)[0])
        f = lambda s: s ** 3 - 2 * s
        lhs = inner_product(di, multiply(di, f, xs), ys)
        rhs = inner_product(di, xs, multiply(di, f, ys))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_array_of_atom_values_accepted(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        xs = embed(di, np.array([1.0, 1.0, 0.0]))
        vals = np.array([2.0, 0.0, 5.0])
        scaled = multiply(di, vals, xs)
        np.testing.assert_allclose(scaled.blocks[0], 2.0 * np.asarray(xs.blocks[0]), atol=1e-14)
        np.testing.assert_allclose(scaled.blocks[1], 0.0 * np.asarray(xs.blocks[1]), atol=1e-14)


class TestIntertwining:
    def test_eigenvector_exact(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        assert intertwining_residual(di, np.array([0.0, 1.0, 0.0])) <= 1e-12

    def test_diagonal_mixture(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        x = np.ones(3) / np.sqrt(3)
        assert intertwining_residual(di, x) <= 1e-10

    def test_seeded_vectors_within_scale_tolerance(self):
        t, di = integral_for("free_jacobi", 64)
        worst = max(
            intertwining_residual(di, x)
            for x in seeded_vectors("intertwine", 64, 100)
        )
        assert worst <= 1e-9 * (1 + t.scale)


class TestProjectOntoRange:
    def test_full_frame_is_identity_on_embedded(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        xs = embed(di, seeded_vectors("pr-full", 32, 1)[0])
        res = project_onto_range(di, 32, xs)
        for a, b in zip(res.section.blocks, xs.blocks):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_range_member_fixed(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        e1_section = embed(di, np.eye(32)[0])
        for m in (1, 4, 16):
            res = project_onto_range(di, m, e1_section)
            for a, b in zip(res.section.blocks, e1_section.blocks):
                np.testing.assert_allclose(a, b, atol=1e-10)

    def test_orthogonal_complement_killed(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        # e_3's section lives on atom 3 alone, orthogonal to span{U(e_1)}
        e3_section = embed(di, np.array([0.0, 0.0, 1.0]))
        res = project_onto_range(di, 1, e3_section)
        assert norm(di, res.section) <= 1e-12

    def test_matches_weighted_least_squares_oracle(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        m = 7
        target = multiply(
            di, lambda s: 1.0 if abs(s) <= 1.0 else 0.0,
            embed(di, seeded_vectors("pr-oracle", 32, 1)[0]),
        )
        res = project_onto_range(di, m, target)
        # flatten sections into sqrt(mass)-weighted stacked coordinates
        w = np.sqrt(di.measure.masses)

        def flat(sec):
            return np.concatenate(
                [np.asarray(b) * wi for b, wi in zip(sec.blocks, w)]
            )

        basis = np.column_stack([flat(embed(di, np.eye(32)[j])) for j in range(m)])
        coeffs = np.linalg.lstsq(basis, flat(target), rcond=None)[0]
        np.testing.assert_allclose(res.coefficients, coeffs, atol=1e-8)
        # residual orthogonal to every generator of the range
        for j in range(m):
            gen = embed(di, np.eye(32)[j])
            resid = target - res.section
            assert abs(inner_product(di, resid, gen)) <= 1e-9

    def test_idempotent_and_self_adjoint(self, jacobi32):
        t, d = jacobi32
        di = build_direct_integral(t, d)
        m = 5
        xs = embed(di, seeded_vectors("pr-idem-x", 32, 1)[0])
        ys = embed(di, seeded_vectors("pr-idem-y", 32, 1)[0])
        once = project_onto_range(di, m, xs).section
        twice = project_onto_range(di, m, once).section
        for a, b in zip(twice.blocks, once.blocks):
            np.testing.assert_allclose(a, b, atol=1e-10)
        lhs = inner_product(di, once, ys)
        rhs = inner_product(di, xs, project_onto_range(di, m, ys).section)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_near_dependent_generators_rejected(self):
        # dropped atoms make the embedded generators lose mass, so a large
        # frame over a thin retained spectrum is numerically singular
        t = make_truncation(DiagonalSpec(entries=lambda j: float(j), name="d64"), 64)
        di = build_direct_integral(t)
        xs = embed(di, np.eye(64)[0])
        with pytest.raises(ConditioningError):
            project_onto_range(di, 64, xs)

    def test_oversized_frame_rejected(self, diag3):
        t, d = diag3
        di = build_direct_integral(t, d)
        xs = embed(di, np.ones(3) / np.sqrt(3))
        with pytest.raises(ValidationError):
            project_onto_range(di, 4, xs)
