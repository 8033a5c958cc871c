"""
Tests for evaluation metrics and the per-sample penalty identity.
"""
import logging
import sys

import numpy as np
import pytest

from kdn.errors import TooFewSamples
from kdn.services.kernelkit import GammaMatrix, build_gamma, gaussian_gram, label_gram
from kdn.services.metrics import (
    block_gap,
    csr,
    hsic_star,
    penalty_terms,
    scatter_ratio,
    silhouette,
)


class TestHsicStar:

    def test_self_is_one(self, balanced_labels):
        K_Y = label_gram(balanced_labels)
        assert hsic_star(K_Y, K_Y) == pytest.approx(1.0)

    def test_constant_kernel_is_zero(self, balanced_labels, caplog):
        with caplog.at_level(logging.WARNING, logger='kdn.services.metrics'):
            assert hsic_star(np.ones((4, 4)), label_gram(balanced_labels)) == 0.0
        assert 'Degenerate kernel' in caplog.text

    def test_unit_interval(self, blobs):
        value = hsic_star(gaussian_gram(blobs.features, 1.0), label_gram(blobs.labels))
        assert 0.0 <= value <= 1.0 + 1e-12

    def test_symmetric(self, blobs):
        A = gaussian_gram(blobs.features, 1.0)
        B = gaussian_gram(blobs.features, 3.0)
        assert hsic_star(A, B) == pytest.approx(hsic_star(B, A), abs=1e-10)

    def test_scale_invariant(self, blobs):
        K = gaussian_gram(blobs.features, 1.0).values
        K_Y = label_gram(blobs.labels)
        assert hsic_star(3.7 * K, K_Y) == pytest.approx(hsic_star(K, K_Y), abs=1e-10)

    def test_features_independent_of_labels(self):
        rng = np.random.default_rng(7)
        F = rng.standard_normal((200, 5))
        labels = rng.permutation(np.repeat([0, 1], 100))
        assert abs(hsic_star(gaussian_gram(F, np.sqrt(5.0)), label_gram(labels))) <= 0.15


class TestCsr:

    def test_identical_rows(self, balanced_labels):
        assert csr(np.ones((4, 1)), balanced_labels) == pytest.approx(2.0)

    def test_orthogonal_classes(self, balanced_labels):
        F = np.eye(2)[balanced_labels]
        assert csr(F, balanced_labels) == 0.0

    def test_no_same_class_pairs(self, caplog):
        with caplog.at_level(logging.WARNING, logger='kdn.services.metrics'):
            assert csr(np.ones((2, 1)), np.array([0, 1])) == sys.float_info.max


class TestScatterRatio:

    def test_line(self, balanced_labels):
        R = np.array([[0.0], [1.0], [3.0], [4.0]])
        assert scatter_ratio(R, np.eye(1), 1.0, balanced_labels) == pytest.approx(1.0 / 19.0)

    def test_sigma_cancels(self, balanced_labels):
        R = np.array([[0.0], [1.0], [3.0], [4.0]])
        a = scatter_ratio(R, np.eye(1), 0.3, balanced_labels)
        b = scatter_ratio(R, np.eye(1), 3.0, balanced_labels)
        assert a == pytest.approx(b)

    def test_collapsed_classes(self, balanced_labels):
        R = np.array([[0.0], [0.0], [1.0], [1.0]])
        assert scatter_ratio(R, np.eye(1), 1.0, balanced_labels) == 0.0

    def test_single_class_is_float_max(self):
        assert scatter_ratio(np.array([[0.0], [1.0]]), np.eye(1), 1.0, np.array([0, 0])) == sys.float_info.max

    def test_swapping_pair_sets_inverts(self):
        # with two points the only pair is same-class under one labelling and
        # cross-class under the other
        R = np.array([[0.0], [2.0]])
        assert scatter_ratio(R, np.eye(1), 1.0, np.array([0, 1])) == 0.0
        assert scatter_ratio(R, np.eye(1), 1.0, np.array([1, 1])) == sys.float_info.max


def test_block_gap(balanced_labels):
    K = np.array([
        [1.0, 0.9, 0.1, 0.2],
        [0.9, 1.0, 0.3, 0.1],
        [0.1, 0.3, 1.0, 0.8],
        [0.2, 0.1, 0.8, 1.0],
    ])
    assert block_gap(K, balanced_labels) == pytest.approx(0.5)


class TestSilhouette:

    def test_separated_blobs(self, blobs):
        assert silhouette(blobs.features, blobs.labels) > 0.9

    def test_identical_points(self):
        assert silhouette(np.zeros((4, 2)), np.array([0, 0, 1, 1])) == 0.0

    def test_single_class(self):
        with pytest.raises(TooFewSamples):
            silhouette(np.zeros((3, 1)), np.zeros(3, dtype=int))

    def test_singleton_class(self):
        with pytest.raises(TooFewSamples):
            silhouette(np.arange(3.0).reshape(-1, 1), np.array([0, 0, 1]))


class TestPenaltyTerms:

    @pytest.mark.parametrize('mode', ['centered', 'signed'])
    def test_identity_holds_with_sign_pattern(self, rng, mode):
        R = rng.standard_normal((20, 4))
        W, _ = np.linalg.qr(rng.standard_normal((4, 2)))
        gamma = build_gamma(np.repeat([0, 1], 10), mode)
        terms = penalty_terms(R, W, 1.3, gamma)
        assert terms.D.shape == (20,)
        assert terms.relative_residual < 1e-10

    def test_identity_on_random_instances(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(4, 51))
            labels = rng.integers(0, 3, n)
            m = int(rng.integers(2, 6))
            W, _ = np.linalg.qr(rng.standard_normal((m, int(rng.integers(1, m + 1)))))
            gamma = build_gamma(labels, 'signed')
            terms = penalty_terms(rng.standard_normal((n, m)), W, float(rng.uniform(0.3, 3.0)), gamma)
            assert terms.relative_residual <= 1e-9, seed

    def test_zero_gamma(self, rng):
        gamma = GammaMatrix(np.zeros((6, 6)), np.array([0, 0, 0, 1, 1, 1]))
        terms = penalty_terms(rng.standard_normal((6, 3)), np.eye(3)[:, :2], 1.0, gamma)
        assert np.array_equal(terms.D, np.zeros(6))
        assert terms.residual == 0.0

    def test_identity_breaks_without_sign_pattern(self, rng):
        R = rng.standard_normal((12, 3))
        W = np.eye(3)[:, :2]
        gamma = build_gamma(np.repeat([0, 1, 2], [10, 1, 1]))
        terms = penalty_terms(R, W, 2.0, gamma)
        assert terms.residual > 1e-6
