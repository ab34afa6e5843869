import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from gmnds.errors import DegenerateCovarianceError, InvalidInputError
from gmnds.gaussmix import (GaussianComponent, GaussianMixture, condense, derive_rng,
                            log_density, mixture_moments, moment_matched_gaussian, sample)

from conftest import random_gm


def bimodal_1d():
    return GaussianMixture([0.5, 0.5], [[-1.0], [1.0]], [[[1.0]], [[1.0]]])


class TestConstruction:
    def test_weights_renormalized_within_tolerance(self):
        gm = GaussianMixture([0.5, 0.5 + 5e-7], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
        assert gm.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_weights_far_from_one_rejected(self):
        with pytest.raises(InvalidInputError):
            GaussianMixture([0.5, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]])

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(InvalidInputError):
            GaussianMixture([1.0, 0.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]])

    def test_singular_covariance_rejected(self):
        with pytest.raises(DegenerateCovarianceError):
            GaussianComponent(1.0, [0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(InvalidInputError):
            GaussianComponent(1.0, [0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            GaussianMixture([1.0], [[0.0, 0.0]], [[[1.0]]])

    def test_json_round_trip(self):
        gm = random_gm(3, 2, 3)
        back = GaussianMixture.from_dict(gm.to_dict())
        np.testing.assert_array_equal(back.means, gm.means)
        np.testing.assert_array_equal(back.covs, gm.covs)
        np.testing.assert_allclose(back.weights, gm.weights, rtol=1e-15)

    def test_from_dict_dimension_check(self):
        data = {"dim": 2, "components": [{"weight": 1.0, "mean": [0.0], "cov": [[1.0]]}]}
        with pytest.raises(InvalidInputError):
            GaussianMixture.from_dict(data)


class TestMoments:
    def test_single_component_identity(self):
        mu = np.array([1.0, -2.0])
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        m, c = mixture_moments(GaussianMixture.single(mu, cov))
        np.testing.assert_allclose(m, mu)
        np.testing.assert_allclose(c, cov)

    def test_two_component_1d(self):
        m, c = mixture_moments(bimodal_1d())
        assert m[0] == pytest.approx(0.0, abs=1e-15)
        assert c[0, 0] == pytest.approx(2.0)

    def test_matches_raw_moment_formula(self):
        gm = random_gm(5, 3, 4)
        m, c = mixture_moments(gm)
        raw = sum(w * (S + np.outer(mu, mu)) for w, mu, S in zip(gm.weights, gm.means, gm.covs))
        np.testing.assert_allclose(c, raw - np.outer(m, m), atol=1e-12)

    def test_monte_carlo_2d(self):
        gm = random_gm(7, 2, 3)
        m, c = mixture_moments(gm)
        x = sample(gm, 10**6, seed=1)
        N = x.shape[0]
        se_mean = np.sqrt(np.diag(c) / N)
        assert np.all(np.abs(x.mean(axis=0) - m) < 3 * se_mean)
        d = x - m
        prod = d[:, :, None] * d[:, None, :]
        se_cov = prod.std(axis=0) / np.sqrt(N)
        assert np.all(np.abs(prod.mean(axis=0) - c) < 3 * se_cov)

    def test_moment_matched_gaussian(self):
        g = moment_matched_gaussian(bimodal_1d())
        assert g.weight == 1.0
        assert g.cov[0, 0] == pytest.approx(2.0)
        gm = random_gm(8, 2, 4)
        g = moment_matched_gaussian(gm)
        m, c = mixture_moments(gm)
        np.testing.assert_array_equal(g.mean, m)
        np.testing.assert_array_equal(g.cov, c)


class TestSampling:
    def test_determinism(self):
        gm = random_gm(1, 2, 3)
        np.testing.assert_array_equal(sample(gm, 100, 9), sample(gm, 100, 9))
        assert not np.array_equal(sample(gm, 100, 9), sample(gm, 100, 10))

    def test_streams_independent(self):
        a = derive_rng(5, 0).standard_normal(4)
        b = derive_rng(5, 1).standard_normal(4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, derive_rng(5, 0).standard_normal(4))

    def test_standard_normal_mean(self):
        gm = GaussianMixture.single([0.0, 0.0], np.eye(2))
        x = sample(gm, 10**6, seed=2)
        assert np.all(np.abs(x.mean(axis=0)) < 4 / np.sqrt(10**6))

    def test_component_frequencies(self):
        gm = GaussianMixture([0.3, 0.7], [[-50.0], [50.0]], [[[1.0]], [[1.0]]])
        N = 10**5
        x = sample(gm, N, seed=3)
        frac = np.mean(x[:, 0] < 0)
        assert abs(frac - 0.3) < 4 * np.sqrt(0.3 * 0.7 / N)

    def test_count_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            sample(bimodal_1d(), 0, 1)


class TestLogDensity:
    def test_standard_normal_at_zero(self):
        gm = GaussianMixture.single([0.0], [[1.0]])
        assert float(log_density(gm, [0.0])) == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-15)

    def test_integrates_to_one(self):
        gm = random_gm(11, 1, 4)
        grid = np.linspace(-40, 40, 200001)
        dens = np.exp(log_density(gm, grid[:, None]))
        assert integrate.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)

    def test_matches_naive_sum(self):
        gm = random_gm(12, 3, 4)
        pts = np.random.default_rng(0).normal(size=(20, 3))
        naive = sum(w * stats.multivariate_normal(m, c).pdf(pts)
                    for w, m, c in zip(gm.weights, gm.means, gm.covs))
        np.testing.assert_allclose(log_density(gm, pts), np.log(naive), rtol=1e-12)

    def test_far_point_is_finite(self):
        gm = bimodal_1d()
        assert np.isfinite(log_density(gm, [1e3]))


class TestCondense:
    def test_no_op_when_small(self):
        gm = random_gm(2, 2, 3)
        assert condense(gm, 3) is gm

    def test_identical_pair(self):
        gm = GaussianMixture([0.4, 0.6], [[1.0, 2.0], [1.0, 2.0]], [np.eye(2), np.eye(2)])
        out = condense(gm, 1)
        assert out.size == 1
        np.testing.assert_allclose(out.means[0], [1.0, 2.0])
        np.testing.assert_allclose(out.covs[0], np.eye(2), atol=1e-15)
        assert out.weights[0] == pytest.approx(1.0)

    def test_moment_preservation(self):
        gm = random_gm(21, 3, 10)
        out = condense(gm, 4)
        assert out.size == 4
        m0, c0 = mixture_moments(gm)
        m1, c1 = mixture_moments(out)
        np.testing.assert_allclose(m1, m0, atol=1e-10)
        np.testing.assert_allclose(c1, c0, atol=1e-10)

    def test_merges_nearest_pair_first(self):
        gm = GaussianMixture([1 / 3] * 3, [[0.0], [0.1], [10.0]], [[[1.0]]] * 3)
        out = condense(gm, 2)
        np.testing.assert_allclose(np.sort(out.means[:, 0]), [0.05, 10.0])

    def test_target_validation(self):
        with pytest.raises(InvalidInputError):
            condense(bimodal_1d(), 0)

    def test_input_unchanged(self):
        gm = random_gm(22, 2, 8)
        before = gm.means.copy()
        condense(gm, 2)
        np.testing.assert_array_equal(gm.means, before)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 4), G=st.integers(2, 12),
           target=st.integers(1, 6))
    def test_property_moments_and_count(self, seed, n, G, target):
        gm = random_gm(seed, n, G)
        out = condense(gm, target)
        assert out.size == min(G, target)
        assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)
        m0, c0 = mixture_moments(gm)
        m1, c1 = mixture_moments(out)
        scale = 1.0 + np.abs(c0).max()
        np.testing.assert_allclose(m1, m0, atol=1e-10 * scale)
        np.testing.assert_allclose(c1, c0, atol=1e-10 * scale)
