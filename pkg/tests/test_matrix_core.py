"""
Unit tests for the small dense matrix kernel.

This module tests matrix validation, singular values, spectral radii
(single and batched), 2x2 eigenpairs and the real Jordan reduction.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.services.matrix_core import (
    MatrixSet,
    as_matrix,
    batch_operator_norm,
    batch_singular_values,
    batch_spectral_radius,
    eigen2x2,
    matrix_rank,
    operator_norm,
    real_jordan_2x2,
    rotation_block,
    singular_values,
    spectral_radius,
)
from src.utils.exceptions import NotComplexSpectrumError, UnsupportedSizeError, ValidationError


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240607)


class TestAsMatrix:
    """Test matrix validation."""

    def test_returns_read_only_float_array(self):
        """Test conversion and immutability."""
        matrix = as_matrix([[1, 2], [3, 4]])
        assert matrix.dtype == np.float64
        with pytest.raises(ValueError):
            matrix[0, 0] = 5.0

    @pytest.mark.parametrize("values", [
        [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
        [[1.0]],
        [1.0, 2.0],
    ])
    def test_rejects_non_square(self, values):
        """Test non-square and 1x1 inputs are rejected."""
        with pytest.raises(ValidationError):
            as_matrix(values)

    def test_rejects_non_finite(self):
        """Test NaN and inf entries are rejected."""
        with pytest.raises(ValidationError) as exc_info:
            as_matrix([[1.0, float("nan")], [0.0, 1.0]])
        assert exc_info.value.invariant == "finite"

    def test_rejects_large_dimension(self):
        """Test dimensions above 8 are unsupported."""
        with pytest.raises(UnsupportedSizeError) as exc_info:
            as_matrix(np.eye(9))
        assert exc_info.value.size == 9
        assert exc_info.value.limit == 8


class TestMatrixSet:
    """Test MatrixSet construction."""

    def test_from_nested(self):
        """Test members, sizes and the stacked view."""
        matrix_set = MatrixSet.from_nested([np.eye(3), 2 * np.eye(3)])
        assert matrix_set.m == 2
        assert matrix_set.n == 3
        assert matrix_set.stack().shape == (2, 3, 3)

    def test_mixed_dimensions_rejected(self):
        """Test a 2x2 and a 3x3 member cannot share a set."""
        with pytest.raises(ValidationError) as exc_info:
            MatrixSet.from_nested([np.eye(2), np.eye(3)])
        assert exc_info.value.invariant == "same-dimension"

    def test_empty_set_rejected(self):
        """Test an empty set is rejected."""
        with pytest.raises(ValidationError):
            MatrixSet.from_nested([])

    def test_equality_is_bitwise(self):
        """Test equality compares member values."""
        a = MatrixSet.from_nested([[[1.0, 0.1], [0.0, 1.0]]])
        b = MatrixSet.from_nested([[[1.0, 0.1], [0.0, 1.0]]])
        c = MatrixSet.from_nested([[[1.0, 0.1 + 1e-16], [0.0, 1.0]]])
        assert a == b
        assert hash(a) == hash(b)
        assert (a == c) == (0.1 == 0.1 + 1e-16)


class TestSingularValues:
    """Test closed-form and LAPACK singular values."""

    def test_rank_one_diagonal(self):
        """Test diag(3, 0) has a one-dimensional kernel."""
        summary = singular_values([[3.0, 0.0], [0.0, 0.0]])
        assert summary.singulars == pytest.approx((0.0, 3.0))
        assert summary.kernel_dim == 1
        assert summary.rank == 1
        assert summary.largest == 3.0

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_matches_lapack(self, rng, n):
        """Test batched singular values against numpy's SVD."""
        stack = rng.normal(size=(200, n, n))
        expected = np.linalg.svd(stack, compute_uv=False)[:, ::-1]
        actual = batch_singular_values(stack)
        scale = expected[:, -1:]
        assert np.all(np.abs(actual - expected) <= 1e-12 * scale)

    def test_small_singular_value_relative_accuracy(self):
        """Test a tiny singular value keeps relative accuracy in 3x3."""
        matrix = np.diag([1.0, 1e-6, 1e-9])
        rotation = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        summary = singular_values(rotation @ matrix)
        assert summary.smallest == pytest.approx(1e-9, rel=1e-6)
        assert summary.singulars[1] == pytest.approx(1e-6, rel=1e-9)

    def test_operator_norm(self):
        """Test the operator norm of a rotation and of a shear."""
        assert operator_norm(rotation_block(1.0, 0.3)) == pytest.approx(1.0)
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        assert operator_norm([[1.0, 1.0], [0.0, 1.0]]) == pytest.approx(golden)
        assert batch_operator_norm(np.stack([np.eye(2), 2 * np.eye(2)])) == pytest.approx([1.0, 2.0])

    @pytest.mark.parametrize("n", [2, 3])
    def test_operator_norm_bounds_sampled_directions(self, rng, n):
        """Test the norm is the largest stretch over 10^4 random unit vectors."""
        for _ in range(5):
            matrix = rng.normal(size=(n, n))
            directions = rng.normal(size=(10_000, n))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            sampled = float(np.max(np.linalg.norm(directions @ matrix.T, axis=1)))
            norm = operator_norm(matrix)
            assert sampled <= norm * (1.0 + 1e-12)
            assert sampled >= norm * (1.0 - 1e-2)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_norms_are_submultiplicative(self, rng, n):
        """Test ||AB|| <= ||A|| ||B|| for batched norms."""
        a = rng.normal(size=(300, n, n))
        b = rng.normal(size=(300, n, n))
        product = batch_operator_norm(np.einsum("kij,kjl->kil", a, b))
        bound = batch_operator_norm(a) * batch_operator_norm(b)
        assert np.all(product <= bound * (1.0 + 1e-12))

    def test_matrix_rank(self):
        """Test numerical rank under the relative tolerance."""
        assert matrix_rank(np.eye(3)) == 3
        assert matrix_rank([[1.0, 2.0], [2.0, 4.0]]) == 1
        assert matrix_rank(np.zeros((2, 2))) == 0


class TestSpectralRadius:
    """Test spectral radii."""

    def test_rotation(self):
        """Test a rotation has spectral radius 1."""
        assert spectral_radius(rotation_block(1.0, 0.2)) == pytest.approx(1.0, abs=1e-15)

    def test_jordan_block(self):
        """Test a defective matrix."""
        assert spectral_radius([[1.0, 1.0], [0.0, 1.0]]) == pytest.approx(1.0, abs=1e-15)

    def test_nilpotent_is_zero(self):
        """Test nilpotent matrices snap to exactly 0."""
        assert spectral_radius([[0.0, 1.0], [0.0, 0.0]]) == 0.0
        assert spectral_radius([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]) == 0.0

    def test_rank_one_uses_trace(self, rng):
        """Test rank-one 3x3 matrices report |v . u| exactly."""
        u = rng.normal(size=3)
        v = rng.normal(size=3)
        assert spectral_radius(np.outer(u, v)) == pytest.approx(abs(v @ u), rel=1e-14)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_matches_eigvals(self, rng, n):
        """Test batched spectral radii against numpy's eigenvalues."""
        stack = rng.normal(size=(500, n, n))
        expected = np.max(np.abs(np.linalg.eigvals(stack)), axis=1)
        actual = batch_spectral_radius(stack)
        assert actual == pytest.approx(expected, rel=1e-9)

    def test_rank_two_3x3(self, rng):
        """Test singular 3x3 matrices with two nonzero eigenvalues."""
        stack = rng.normal(size=(200, 3, 3))
        stack[:, :, 2] = stack[:, :, 0] + 0.5 * stack[:, :, 1]
        expected = np.max(np.abs(np.linalg.eigvals(stack)), axis=1)
        assert batch_spectral_radius(stack) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("n", [2, 3])
    def test_similarity_invariance(self, rng, n):
        """Test rho(P^-1 A P) = rho(A)."""
        checked = 0
        while checked < 50:
            a = rng.normal(size=(n, n))
            p = rng.normal(size=(n, n))
            if np.linalg.cond(p) > 20:
                continue
            moved = np.linalg.solve(p, a @ p)
            assert spectral_radius(moved) == pytest.approx(spectral_radius(a), rel=1e-8)
            checked += 1

    def test_empty_stack(self):
        """Test an empty stack gives an empty result."""
        assert batch_spectral_radius(np.zeros((0, 2, 2))).shape == (0,)


class TestEigen2x2:
    """Test 2x2 eigenpairs."""

    def test_singular_diagonal(self):
        """Test diag(2, 0): image direction first, kernel second."""
        image, kernel = eigen2x2([[2.0, 0.0], [0.0, 0.0]])
        assert image.value == 2.0
        assert kernel.value == 0.0
        assert np.allclose(image.vector, [1.0, 0.0])
        assert np.allclose(np.abs(kernel.vector), [0.0, 1.0])
        assert image.is_real

    def test_complex_pair_order(self):
        """Test the positive imaginary part comes first."""
        first, second = eigen2x2(rotation_block(1.0, 0.25))
        assert first.value.imag > 0
        assert second.value == pytest.approx(first.value.conjugate())

    def test_scalar_matrix_falls_back_to_basis(self):
        """Test lambda*I gets the standard basis."""
        first, second = eigen2x2(3.0 * np.eye(2))
        assert np.allclose(first.vector, [1.0, 0.0])
        assert np.allclose(second.vector, [0.0, 1.0])

    def test_residuals(self, rng):
        """Test M v = lambda v for random matrices."""
        for matrix in rng.normal(size=(50, 2, 2)):
            for pair in eigen2x2(matrix):
                residual = matrix @ pair.vector - pair.value * pair.vector
                assert np.linalg.norm(residual) <= 1e-12 * (1.0 + np.linalg.norm(matrix))
                assert np.linalg.norm(pair.vector) == pytest.approx(1.0)

    def test_rejects_3x3(self):
        """Test only 2x2 matrices are accepted."""
        with pytest.raises(ValidationError):
            eigen2x2(np.eye(3))


class TestRealJordan:
    """Test the real Jordan reduction."""

    def test_known_reduction(self):
        """Test [[1, -1], [1, 1]] has rho = sqrt(2) and alpha = 1/4."""
        p, rho, alpha = real_jordan_2x2([[1.0, -1.0], [1.0, 1.0]])
        assert rho == pytest.approx(math.sqrt(2.0))
        assert alpha == pytest.approx(0.25)
        assert abs(np.linalg.det(p)) == pytest.approx(1.0)

    def test_reconstruction(self, rng):
        """Test M = P J P^-1 for random complex-spectrum matrices."""
        checked = 0
        for matrix in rng.normal(size=(200, 2, 2)):
            a, b = matrix[0]
            c, d = matrix[1]
            if (a - d) ** 2 + 4 * b * c > -1e-3:
                continue
            p, rho, alpha = real_jordan_2x2(matrix)
            j = rotation_block(rho, alpha)
            assert 0.0 < alpha < 1.0
            assert p @ j @ np.linalg.inv(p) == pytest.approx(matrix, abs=1e-11)
            checked += 1
        assert checked > 20

    @pytest.mark.parametrize("matrix", [
        [[2.0, 0.0], [0.0, 0.5]],
        [[1.0, 1.0], [0.0, 1.0]],
        [[1.0, 0.0], [0.0, 1.0]],
    ])
    def test_real_spectrum_rejected(self, matrix):
        """Test real or repeated eigenvalues are rejected."""
        with pytest.raises(NotComplexSpectrumError):
            real_jordan_2x2(matrix)

    def test_rotation_block(self):
        """Test the scaled rotation layout."""
        block = rotation_block(2.0, 0.5)
        assert block == pytest.approx(np.array([[0.0, 2.0], [-2.0, 0.0]]), abs=1e-15)
