"""
Tests for per-layer bandwidth selection.
"""
import numpy as np
import pytest

from kdn.errors import ConfigError, EigenFailure, SingleClass
from kdn.services import sigsel
from kdn.services.dataio import standardize
from kdn.services.kernelkit import build_gamma, gaussian_gram, squared_distances


class TestQLabel:

    def test_balanced_four(self, balanced_labels):
        Q = sigsel.build_q_label(balanced_labels)
        same = balanced_labels[:, None] == balanced_labels[None, :]
        off = ~np.eye(4, dtype=bool)
        assert np.allclose(np.diag(Q), 0.0)
        assert np.allclose(Q[same & off], -0.25)
        assert np.allclose(Q[~same], 0.125)

    def test_trace_is_negated_mean_gap(self, rng):
        labels = np.repeat([0, 1, 2], [4, 6, 5])
        X = rng.standard_normal((15, 2))
        K = gaussian_gram(X, 0.8).values
        same = labels[:, None] == labels[None, :]
        off = ~np.eye(15, dtype=bool)
        gap = K[same & off].mean() - K[~same].mean()
        assert np.sum(K * sigsel.build_q_label(labels)) == pytest.approx(-gap, abs=1e-12)

    def test_single_class(self):
        with pytest.raises(SingleClass):
            sigsel.build_q_label(np.zeros(4, dtype=int))

    def test_all_singletons(self):
        with pytest.raises(SingleClass):
            sigsel.build_q_label(np.array([0, 1, 2]))


class TestSeparation:

    def test_not_worse_than_a_dense_grid(self, blobs):
        result = sigsel.sigma_by_separation(blobs.features, blobs.labels, interval=(0.05, 20.0))
        sq = squared_distances(blobs.features)
        Q = sigsel.build_q_label(blobs.labels)
        dense = min(sigsel.separation_objective(sq, Q, s) for s in np.geomspace(0.05, 20.0, 2000))
        assert sigsel.separation_objective(sq, Q, result.sigma) <= dense + 1e-9
        assert 0.05 <= result.sigma <= 20.0
        assert result.strategy == 'max_separation'
        assert len(result.objective_curve) == 200

    def test_scales_with_the_data(self, blobs):
        base = sigsel.sigma_by_separation(blobs.features, blobs.labels)
        scaled = sigsel.sigma_by_separation(3.0 * blobs.features, blobs.labels)
        assert scaled.sigma == pytest.approx(3.0 * base.sigma, rel=1e-4)

    def test_bad_interval(self, blobs):
        with pytest.raises(ConfigError):
            sigsel.sigma_by_separation(blobs.features, blobs.labels, interval=(2.0, 1.0))


class TestHsicGrid:

    @pytest.fixture
    def layer_input(self, blobs):
        scaled, _ = standardize(blobs)
        return scaled.features, build_gamma(scaled.labels)

    def test_picks_from_grid(self, layer_input):
        R, gamma = layer_input
        result = sigsel.sigma_by_hsic_grid(R, gamma, [0.5, 1.0, 2.0, 4.0])
        assert result.sigma in (0.5, 1.0, 2.0, 4.0)
        assert result.ism_result is not None
        assert [s for s, _ in result.objective_curve] == [0.5, 1.0, 2.0, 4.0]
        assert all(0.0 <= v <= 1.0 + 1e-12 for _, v in result.objective_curve)
        assert dict(result.objective_curve)[result.sigma] == max(v for _, v in result.objective_curve)

    def test_ties_go_to_the_smaller_sigma(self, layer_input, monkeypatch):
        R, gamma = layer_input
        monkeypatch.setattr(sigsel, 'hsic_star', lambda K_f, K_Y: 0.5)
        assert sigsel.sigma_by_hsic_grid(R, gamma, [4.0, 1.0, 2.0]).sigma == 1.0

    def test_failed_points_are_skipped(self, layer_input, monkeypatch):
        R, gamma = layer_input
        real_solve = sigsel.ism.solve

        def flaky(R, gamma, sigma, cfg=None):
            if sigma == 1.0:
                raise EigenFailure('no convergence')
            return real_solve(R, gamma, sigma, cfg)

        monkeypatch.setattr(sigsel.ism, 'solve', flaky)
        result = sigsel.sigma_by_hsic_grid(R, gamma, [0.5, 1.0, 2.0])
        assert [s for s, _ in result.objective_curve] == [0.5, 2.0]

    def test_every_point_failing(self, layer_input, monkeypatch):
        R, gamma = layer_input

        def broken(R, gamma, sigma, cfg=None):
            raise EigenFailure('no convergence')

        monkeypatch.setattr(sigsel.ism, 'solve', broken)
        with pytest.raises(EigenFailure):
            sigsel.sigma_by_hsic_grid(R, gamma, [0.5, 1.0])

    def test_threads_match_serial(self, layer_input):
        R, gamma = layer_input
        serial = sigsel.sigma_by_hsic_grid(R, gamma, [0.5, 1.0, 2.0], jobs=1)
        threaded = sigsel.sigma_by_hsic_grid(R, gamma, [0.5, 1.0, 2.0], jobs=3)
        assert serial.sigma == threaded.sigma
        assert serial.objective_curve == threaded.objective_curve

    def test_default_grid_uses_median_distance(self, layer_input):
        R, _ = layer_input
        grid = sigsel.default_grid(R)
        assert len(grid) == len(sigsel.DEFAULT_GRID_FACTORS)
        assert grid == sorted(grid)

    def test_rejects_non_positive(self, layer_input):
        R, gamma = layer_input
        with pytest.raises(ConfigError):
            sigsel.sigma_by_hsic_grid(R, gamma, [0.0, 1.0])


class TestFixed:

    def test_per_layer(self):
        assert sigsel.sigma_fixed([2.0, 1.0], 1).sigma == 2.0
        assert sigsel.sigma_fixed([2.0, 1.0], 2).sigma == 1.0

    def test_last_entry_repeats(self):
        assert sigsel.sigma_fixed([2.0, 1.0], 5).sigma == 1.0

    def test_empty(self):
        with pytest.raises(ConfigError):
            sigsel.sigma_fixed([], 1)
