"""
Tests for Gram matrices, Gamma and the Phi matrices.
"""
import numpy as np
import pytest

from kdn.errors import MissingW, NonFiniteInput, SizeMismatch
from kdn.services import ism
from kdn.services.kernelkit import (
    KernelDescriptor,
    build_gamma,
    center_gram,
    export_matrix,
    gamma_sign_check,
    gaussian_gram,
    gram,
    hsic_value,
    label_gram,
    laplacian_quadratic,
    phi_matrix,
)
from kdn.utils.csv_parser import read_matrix_csv


def brute_force_pairs(X, psi):
    total = np.zeros((X.shape[1], X.shape[1]))
    for i in range(X.shape[0]):
        for j in range(X.shape[0]):
            diff = (X[i] - X[j])[:, None]
            total += psi[i, j] * diff @ diff.T
    return total


def random_symmetric(rng, n):
    A = rng.standard_normal((n, n))
    return A + A.T


class TestGaussianGram:

    def test_identical_rows(self):
        K = gaussian_gram(np.array([[1.0, 2.0], [1.0, 2.0]]), 0.7)
        assert K.values[0, 1] == 1.0

    def test_distance_two_sigma_squared(self):
        K = gaussian_gram(np.array([[0.0, 0.0], [np.sqrt(2.0), 0.0]]), 1.0)
        assert K.values[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_wide_bandwidth(self, rng):
        K = gaussian_gram(rng.standard_normal((10, 3)), 1e6)
        assert K.values.min() >= 1 - 1e-9

    def test_symmetric_unit_diagonal(self, rng):
        K = gaussian_gram(rng.standard_normal((15, 4)), 1.3).values
        assert np.array_equal(K, K.T)
        assert np.all(np.diag(K) == 1.0)
        assert K.min() >= 0.0 and K.max() <= 1.0

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            gaussian_gram(np.array([[0.0], [np.nan]]), 1.0)

    def test_descriptor_validation(self):
        with pytest.raises(ValueError):
            KernelDescriptor.polynomial(1)
        with pytest.raises(ValueError):
            KernelDescriptor.gaussian(0.0)


class TestCentering:

    def test_balanced_label_gram(self, balanced_labels):
        gamma = center_gram(label_gram(balanced_labels))
        same = balanced_labels[:, None] == balanced_labels[None, :]
        assert np.allclose(gamma[same], 0.5)
        assert np.allclose(gamma[~same], -0.5)

    def test_two_by_two_identity(self):
        assert np.allclose(center_gram(np.eye(2)), [[0.5, -0.5], [-0.5, 0.5]])

    def test_constant_kernel(self):
        assert np.allclose(center_gram(np.ones((5, 5))), 0.0)

    def test_gamma_rows_sum_to_zero(self, rng):
        gamma = build_gamma(rng.integers(0, 4, 40))
        assert np.abs(gamma.values.sum(axis=1)).max() <= 1e-10


class TestGammaSigns:

    def test_balanced_three_classes(self):
        report = gamma_sign_check(build_gamma(np.repeat([0, 1, 2], 10)))
        assert report.holds
        assert report.violating_pairs == []

    def test_dominant_class_lists_violations(self):
        report = gamma_sign_check(build_gamma(np.repeat([0, 1, 2], [10, 1, 1])))
        assert not report.holds
        assert (10, 11) in report.violating_pairs

    def test_single_class(self):
        gamma = build_gamma(np.zeros(6, dtype=int))
        assert np.allclose(gamma.values, 0.0)
        report = gamma_sign_check(gamma)
        assert report.holds
        assert 'single class' in report.note

    def test_signed_mode(self, balanced_labels):
        gamma = build_gamma(balanced_labels, 'signed')
        assert gamma.values.tolist() == [[1, 1, -1, -1], [1, 1, -1, -1], [-1, -1, 1, 1], [-1, -1, 1, 1]]
        assert gamma_sign_check(gamma).holds

    def test_unknown_mode(self, balanced_labels):
        with pytest.raises(ValueError):
            build_gamma(balanced_labels, 'raw')


class TestLaplacian:

    def test_zero_weights(self, rng):
        assert np.allclose(laplacian_quadratic(rng.standard_normal((4, 3)), np.zeros((4, 4))), 0.0)

    def test_two_points(self):
        result = laplacian_quadratic(np.array([[1.0], [-1.0]]), np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert result.tolist() == [[8.0]]

    @pytest.mark.parametrize('seed', range(5))
    def test_matches_pair_sum(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 21))
        X = rng.standard_normal((n, 3))
        psi = random_symmetric(rng, n)
        assert np.allclose(laplacian_quadratic(X, psi), brute_force_pairs(X, psi), atol=1e-10)

    def test_size_mismatch(self, rng):
        with pytest.raises(SizeMismatch):
            laplacian_quadratic(rng.standard_normal((4, 2)), np.zeros((3, 3)))


class TestPhi:

    def test_gaussian_initial_equals_r_gamma_r(self, rng):
        R = rng.standard_normal((12, 4))
        gamma = build_gamma(rng.integers(0, 3, 12))
        phi0 = phi_matrix(KernelDescriptor.gaussian(1.0), R, gamma, initial=True)
        assert np.allclose(phi0, R.T @ gamma.values @ R, atol=1e-10)

    def test_linear_two_points(self):
        gamma = build_gamma(np.array([0, 1]))
        phi = phi_matrix(KernelDescriptor.linear(), np.array([[1.0], [-1.0]]), gamma)
        assert phi.tolist() == [[2.0]]

    @pytest.mark.parametrize('descriptor', [
        KernelDescriptor.linear(),
        KernelDescriptor.squared(),
        KernelDescriptor.polynomial(3),
        KernelDescriptor.gaussian(0.8),
        KernelDescriptor.multiquadratic(0.8),
    ])
    def test_symmetric(self, rng, descriptor):
        R = rng.standard_normal((10, 5))
        W, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        gamma = build_gamma(rng.integers(0, 2, 10))
        for initial in (True, False):
            phi = phi_matrix(descriptor, R, gamma, W, initial=initial)
            assert phi.shape == (5, 5)
            assert np.abs(phi - phi.T).max() <= 1e-10

    def test_gaussian_phi_is_update_q(self, rng):
        R = rng.standard_normal((9, 3))
        W, _ = np.linalg.qr(rng.standard_normal((3, 2)))
        gamma = build_gamma(rng.integers(0, 2, 9))
        expected = ism.update_q(R, gamma, W, 0.9)
        assert np.allclose(phi_matrix(KernelDescriptor.gaussian(0.9), R, gamma, W), expected, atol=1e-12)

    def test_missing_w(self, rng):
        gamma = build_gamma(np.array([0, 0, 1, 1]))
        with pytest.raises(MissingW):
            phi_matrix(KernelDescriptor.gaussian(1.0), rng.standard_normal((4, 2)), gamma)

    def test_squared_kernel_gram(self):
        K = gram(np.array([[0.0], [3.0]]), KernelDescriptor.squared())
        assert K.values.tolist() == [[0.0, 9.0], [9.0, 0.0]]


class TestHsic:

    def test_label_gram_balanced(self, balanced_labels):
        K_Y = label_gram(balanced_labels)
        assert hsic_value(K_Y, K_Y) == pytest.approx(4.0)

    def test_constant_kernel(self, balanced_labels):
        assert hsic_value(np.ones((4, 4)), label_gram(balanced_labels)) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_and_nonnegative(self, rng):
        A = gaussian_gram(rng.standard_normal((20, 2)), 1.0)
        B = gaussian_gram(rng.standard_normal((20, 3)), 2.0)
        assert hsic_value(A, B) == pytest.approx(hsic_value(B, A), abs=1e-10)
        assert hsic_value(A, A) >= 0.0

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            hsic_value(np.eye(3), np.eye(4))


def test_export_matrix(tmp_path, rng):
    K = gaussian_gram(rng.standard_normal((6, 2)), 0.5)
    path = tmp_path / 'K.csv'
    export_matrix(path, K)
    assert np.array_equal(read_matrix_csv(path), K.values)
