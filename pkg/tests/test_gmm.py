"""UBM training, Baum-Welch statistics, and MAP adaptation."""

import numpy as np
import pytest
from scipy.stats import norm

from voicerank.errors import DimensionMismatch, InsufficientData
from voicerank.gmm import (DiagonalGmm, SuffStats, UbmConfig, compute_stats,
                           map_adapt_means, train_ubm)


def four_cluster_frames(rng, per_cluster=600):
    # deliberately not mirror-symmetric: binary splitting perturbs along
    # the per-dimension sigma, and a layout symmetric about that axis
    # (e.g. corners of a square) is a textbook local-optimum trap
    centers = np.array([[-6.0, -2.0], [-2.0, 5.0], [3.0, -5.0], [6.0, 3.0]])
    frames = np.vstack([c + 0.5 * rng.standard_normal((per_cluster, 2))
                        for c in centers])
    return frames, centers


class TestTrainUbm:
    def test_recovers_separated_clusters(self):
        rng = np.random.default_rng(0)
        frames, centers = four_cluster_frames(rng)
        ubm = train_ubm([frames], 4)
        assert ubm.num_components == 4
        # every true center has a component mean nearby, and weights are even
        dists = np.linalg.norm(centers[:, None, :] - ubm.means[None], axis=2)
        assert dists.min(axis=1).max() < 0.2
        assert np.allclose(ubm.weights, 0.25, atol=0.03)
        assert np.allclose(ubm.variances, 0.25, atol=0.08)

    def test_em_log_likelihood_nondecreasing(self):
        rng = np.random.default_rng(1)
        frames, _ = four_cluster_frames(rng)
        ubm = train_ubm([frames], 4)
        final_stage = np.array(ubm.em_log_likelihoods[-1])
        assert (np.diff(final_stage) >= -1e-6 * np.abs(final_stage[:-1])).all()

    def test_component_count_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            train_ubm([np.zeros((1000, 2))], 3)

    def test_insufficient_frames(self):
        rng = np.random.default_rng(2)
        with pytest.raises(InsufficientData):
            train_ubm([rng.standard_normal((150, 2))], 4)

    def test_variances_stay_positive_with_constant_dim(self):
        rng = np.random.default_rng(3)
        frames = rng.standard_normal((500, 3))
        frames[:, 2] = 1.0  # zero spread in one dimension
        ubm = train_ubm([frames], 2)
        assert (ubm.variances > 0).all()

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        frames, _ = four_cluster_frames(rng, per_cluster=300)
        a = train_ubm([frames], 4)
        b = train_ubm([frames], 4)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.variances, b.variances)

    def test_pools_multiple_utterances(self):
        rng = np.random.default_rng(5)
        frames, _ = four_cluster_frames(rng)
        pooled = train_ubm([frames], 2)
        split = train_ubm([frames[:1200], frames[1200:]], 2)
        assert np.allclose(pooled.means, split.means)


class TestDiagonalGmm:
    def test_single_component_log_likelihood(self):
        rng = np.random.default_rng(6)
        frames = rng.standard_normal((40, 3)) * 2.0 + 1.0
        mean = np.array([[0.5, -0.2, 1.5]])
        var = np.array([[1.2, 0.7, 2.0]])
        gmm = DiagonalGmm(weights=np.ones(1), means=mean, variances=var)
        expected = norm.logpdf(frames, loc=mean, scale=np.sqrt(var)).sum()
        assert np.isclose(gmm.log_likelihood(frames), expected, rtol=1e-12)

    def test_responsibilities_normalized(self):
        rng = np.random.default_rng(7)
        gmm = DiagonalGmm(weights=np.array([0.3, 0.7]),
                          means=rng.standard_normal((2, 4)),
                          variances=np.ones((2, 4)))
        resp = gmm.responsibilities(rng.standard_normal((25, 4)))
        assert np.allclose(resp.sum(axis=1), 1.0)
        assert (resp >= 0).all()


class TestSuffStats:
    def test_additive_over_utterance_split(self):
        rng = np.random.default_rng(8)
        gmm = DiagonalGmm(weights=np.array([0.4, 0.6]),
                          means=np.array([[-1.0, 0.0], [1.0, 0.5]]),
                          variances=np.ones((2, 2)))
        frames = rng.standard_normal((300, 2))
        whole = compute_stats(frames, gmm)
        parts = compute_stats(frames[:120], gmm) + compute_stats(frames[120:], gmm)
        assert np.allclose(whole.n, parts.n, rtol=1e-12)
        assert np.allclose(whole.f, parts.f, rtol=1e-12)

    def test_mass_equals_frame_count(self):
        rng = np.random.default_rng(9)
        gmm = DiagonalGmm(weights=np.array([0.5, 0.5]),
                          means=rng.standard_normal((2, 3)),
                          variances=np.ones((2, 3)))
        stats = compute_stats(rng.standard_normal((77, 3)), gmm)
        assert np.isclose(stats.n.sum(), 77.0)

    def test_dimension_mismatch(self):
        gmm = DiagonalGmm(weights=np.ones(1), means=np.zeros((1, 4)),
                          variances=np.ones((1, 4)))
        with pytest.raises(DimensionMismatch):
            compute_stats(np.zeros((10, 3)), gmm)


class TestMapAdaptMeans:
    def ubm(self, rng, C=4, F=3):
        return DiagonalGmm(weights=np.full(C, 1.0 / C),
                           means=rng.standard_normal((C, F)),
                           variances=np.ones((C, F)))

    def test_zero_stats_keep_prior_means(self):
        rng = np.random.default_rng(10)
        ubm = self.ubm(rng)
        stats = SuffStats(n=np.zeros(4), f=np.zeros((4, 3)))
        sv = map_adapt_means(stats, ubm, relevance=16.0)
        assert np.array_equal(sv, ubm.means.ravel())

    def test_mass_equal_to_relevance_gives_midpoint(self):
        rng = np.random.default_rng(11)
        ubm = self.ubm(rng)
        r = 16.0
        data_mean = rng.standard_normal((4, 3))
        stats = SuffStats(n=np.full(4, r), f=r * data_mean)
        sv = map_adapt_means(stats, ubm, relevance=r).reshape(4, 3)
        assert np.allclose(sv, 0.5 * (data_mean + ubm.means), rtol=1e-12)

    def test_adapted_mean_is_convex_combination(self):
        rng = np.random.default_rng(12)
        ubm = self.ubm(rng, C=8, F=5)
        for _ in range(1000):
            n = rng.uniform(0.0, 200.0, size=8)
            data_mean = rng.standard_normal((8, 5))
            stats = SuffStats(n=n, f=n[:, None] * data_mean)
            sv = map_adapt_means(stats, ubm, relevance=16.0).reshape(8, 5)
            lo = np.minimum(data_mean, ubm.means) - 1e-12
            hi = np.maximum(data_mean, ubm.means) + 1e-12
            assert ((sv >= lo) & (sv <= hi)).all()

    def test_more_mass_pulls_toward_data(self):
        ubm = DiagonalGmm(weights=np.ones(1), means=np.zeros((1, 1)),
                          variances=np.ones((1, 1)))
        target = np.array([[1.0]])
        gaps = []
        for n in (1.0, 16.0, 256.0):
            stats = SuffStats(n=np.array([n]), f=n * target)
            gaps.append(abs(map_adapt_means(stats, ubm, 16.0)[0] - 1.0))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_supervector_is_component_major(self):
        ubm = DiagonalGmm(weights=np.full(2, 0.5),
                          means=np.array([[1.0, 2.0], [3.0, 4.0]]),
                          variances=np.ones((2, 2)))
        stats = SuffStats(n=np.zeros(2), f=np.zeros((2, 2)))
        assert np.array_equal(map_adapt_means(stats, ubm),
                              np.array([1.0, 2.0, 3.0, 4.0]))

    def test_rejects_bad_relevance_and_shape(self):
        rng = np.random.default_rng(13)
        ubm = self.ubm(rng)
        stats = SuffStats(n=np.zeros(4), f=np.zeros((4, 3)))
        with pytest.raises(ValueError):
            map_adapt_means(stats, ubm, relevance=0.0)
        with pytest.raises(DimensionMismatch):
            map_adapt_means(SuffStats(n=np.zeros(3), f=np.zeros((3, 3))), ubm)
