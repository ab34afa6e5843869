import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gmnds.errors import DegenerateCovarianceError, InvalidInputError
from gmnds.gaussmix import GaussianMixture, mixture_moments, sample
from gmnds.genchi2 import MixtureCdf, mixture_mean
from gmnds.nds import (_top_product, gaussian_nds_dist, gm_nds_dist, group_eigenvalues,
                       merge_terms, nds_statistic, quad_form_coeffs, sum_nds_dist,
                       sum_nds_dist_blockdiag)

from conftest import random_gm


def random_spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + 0.5 * np.eye(n)


def ks_distance(samples, cdf):
    x = np.sort(samples)
    F = cdf(x)
    i = np.arange(1, x.size + 1)
    return max(np.max(i / x.size - F), np.max(F - (i - 1) / x.size))


class TestQuadForm:
    def test_identity(self):
        qf = quad_form_coeffs(np.zeros(2), np.eye(2))
        np.testing.assert_allclose(qf.A, np.eye(2))
        np.testing.assert_allclose(qf.q1, 0.0)
        assert qf.q0 == 0.0

    def test_1d_arithmetic(self):
        qf = quad_form_coeffs([1.0], [[4.0]])
        assert qf.A[0, 0] == pytest.approx(0.25)
        assert qf.q1[0] == pytest.approx(-0.5)
        assert qf.q0 == pytest.approx(0.25)

    def test_inverse_residual(self, rng):
        S = random_spd(rng, 5)
        qf = quad_form_coeffs(rng.normal(size=5), S)
        np.testing.assert_allclose(qf.A @ S, np.eye(5), atol=1e-10)

    def test_degenerate(self):
        with pytest.raises(DegenerateCovarianceError):
            quad_form_coeffs([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])


class TestStatistic:
    def test_zero_at_mean(self):
        assert nds_statistic([1.0, 2.0], [1.0, 2.0], np.eye(2)) == 0.0

    def test_1d(self):
        assert nds_statistic([5.0], [1.0], [[4.0]]) == pytest.approx(4.0)

    def test_matches_quadratic_form(self, rng):
        S = random_spd(rng, 3)
        mu = rng.normal(size=3)
        x = rng.normal(size=3)
        qf = quad_form_coeffs(mu, S)
        assert nds_statistic(x, mu, S) == pytest.approx(float(qf(x)), abs=1e-10)

    def test_vectorized(self, rng):
        S = random_spd(rng, 2)
        X = rng.normal(size=(6, 2))
        q = nds_statistic(X, np.zeros(2), S)
        assert q.shape == (6,)
        np.testing.assert_allclose(q, [nds_statistic(x, np.zeros(2), S) for x in X])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            nds_statistic([1.0, 2.0, 3.0], [0.0, 0.0], np.eye(2))


class TestGrouping:
    def test_chaining(self):
        groups = group_eigenvalues([1.0, 3.0, 1.0 + 5e-9, 1.0 + 1e-8])
        assert sorted(len(g) for g in groups) == [1, 3]

    def test_merge_terms(self):
        w, k, lam = merge_terms([2.0, 1.0, 2.0], [1, 2, 3], [0.5, 0.0, 1.0])
        np.testing.assert_allclose(w, [1.0, 2.0])
        np.testing.assert_array_equal(k, [2, 4])
        np.testing.assert_allclose(lam, [0.0, 1.5])


class TestGaussianNds:
    def test_standard_normal_reduces_to_chi2(self):
        g = gaussian_nds_dist(np.zeros(3), np.eye(3), np.zeros(3), np.eye(3))
        np.testing.assert_allclose(g.w, [1.0])
        np.testing.assert_array_equal(g.k, [3])
        np.testing.assert_allclose(g.lam, [0.0], atol=1e-30)
        assert g.t == pytest.approx(0.0, abs=1e-15)

    def test_1d_closed_form(self):
        m, s2 = 1.5, 2.5
        g = gaussian_nds_dist([m], [[s2]], [0.0], [[1.0]])
        np.testing.assert_allclose(g.w, [s2])
        np.testing.assert_allclose(g.lam, [m * m / s2])
        assert g.t == pytest.approx(0.0, abs=1e-12)

    def test_4d_monte_carlo(self, rng):
        mean, cov = rng.normal(size=4), random_spd(rng, 4)
        ref_mean, ref_cov = rng.normal(size=4), random_spd(rng, 4)
        g = gaussian_nds_dist(mean, cov, ref_mean, ref_cov)
        x = sample(GaussianMixture.single(mean, cov), 10**5, seed=4)
        q = nds_statistic(x, ref_mean, ref_cov)
        from gmnds.genchi2 import GenChi2Mixture
        assert ks_distance(q, MixtureCdf(GenChi2Mixture.single(g))) < 0.01

    def test_square_root_invariance(self, rng):
        for n in (2, 3, 5):
            args = (rng.normal(size=n), random_spd(rng, n), rng.normal(size=n), random_spd(rng, n))
            a = gaussian_nds_dist(*args, sqrt="cholesky")
            b = gaussian_nds_dist(*args, sqrt="symmetric")
            np.testing.assert_allclose(a.w, b.w, rtol=1e-8)
            np.testing.assert_array_equal(a.k, b.k)
            np.testing.assert_allclose(a.lam, b.lam, rtol=1e-8, atol=1e-10)
            assert a.t == pytest.approx(b.t, abs=1e-8)

    def test_repeated_eigenvalues_grouped(self):
        cov = np.diag([2.0, 2.0, 0.5])
        g = gaussian_nds_dist([1.0, 1.0, 0.0], cov, np.zeros(3), np.eye(3))
        np.testing.assert_allclose(g.w, [0.5, 2.0])
        np.testing.assert_array_equal(g.k, [1, 2])
        np.testing.assert_allclose(g.lam, [0.0, 1.0], atol=1e-12)

    def test_rejects_bad_sqrt(self):
        with pytest.raises(InvalidInputError):
            gaussian_nds_dist([0.0], [[1.0]], [0.0], [[1.0]], sqrt="other")


class TestGmNds:
    def test_single_component_is_central(self):
        gm = GaussianMixture.single([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]])
        m = gm_nds_dist(gm)
        g = m.components[0]
        np.testing.assert_allclose(g.w, [1.0])
        np.testing.assert_array_equal(g.k, [2])
        assert g.lam[0] < 1e-20

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 5), G=st.integers(1, 6))
    def test_property_invariants(self, seed, n, G):
        gm = random_gm(seed, n, G)
        m = gm_nds_dist(gm)
        assert mixture_mean(m) == pytest.approx(n, abs=1e-9)
        mu, cov = mixture_moments(gm)
        for comp, mean_g in zip(m.components, gm.means):
            assert comp.dof == n
            assert np.all(comp.w > 0)
            assert abs(comp.t) <= 1e-8 * (1 + nds_statistic(mean_g, mu, cov))

    def test_scalar_four_component_monte_carlo(self):
        gm = GaussianMixture([0.1, 0.4, 0.3, 0.2], [[-4.0], [-1.0], [1.5], [5.0]],
                             [[[0.5]], [[1.0]], [[0.3]], [[2.0]]])
        mu, cov = mixture_moments(gm)
        q = nds_statistic(sample(gm, 10**5, seed=6), mu, cov)
        assert ks_distance(q, MixtureCdf(gm_nds_dist(gm))) < 0.01

    def test_bimodal_departs_from_chi2_1(self):
        gm = GaussianMixture([0.5, 0.5], [[-3.0], [3.0]], [[[0.25]], [[0.25]]])
        x = np.linspace(0.0, 3.0, 301)
        gap = np.max(np.abs(MixtureCdf(gm_nds_dist(gm))(x) - stats.chi2.cdf(x, 1)))
        assert gap > 0.1


class TestSumNds:
    def test_single_mixture_identity(self):
        gm = random_gm(1, 2, 3)
        a, b = sum_nds_dist([gm]), gm_nds_dist(gm)
        np.testing.assert_allclose(a.weights, b.weights)
        for ca, cb in zip(a.components, b.components):
            np.testing.assert_allclose(ca.w, cb.w)
            np.testing.assert_allclose(ca.lam, cb.lam)

    def test_two_scalar_pairs(self):
        gms = [random_gm(2, 1, 2), random_gm(3, 1, 2)]
        m = sum_nds_dist(gms)
        assert len(m) == 4
        assert mixture_mean(m) == pytest.approx(2.0, abs=1e-9)
        assert m.truncation_mass == 0.0

    def test_weights_are_products(self):
        gms = [random_gm(4, 1, 2), random_gm(5, 2, 3)]
        m = sum_nds_dist(gms)
        expected = [a * b for a, b in itertools.product(gms[0].weights, gms[1].weights)]
        np.testing.assert_allclose(m.weights, expected)

    def test_matches_block_diagonal(self):
        gms = [random_gm(6, 2, 2), random_gm(7, 1, 3)]
        x = np.linspace(0.1, 12.0, 20)
        a = MixtureCdf(sum_nds_dist(gms))(x)
        b = MixtureCdf(sum_nds_dist_blockdiag(gms))(x)
        assert np.max(np.abs(a - b)) < 1e-8

    def test_top_g_truncation(self):
        gms = [random_gm(8 + i, 1, 4) for i in range(3)]
        full = sum_nds_dist(gms)
        top = sum_nds_dist(gms, top_g=10)
        assert len(top) == 10
        assert top.renormalized
        kept = np.sort(full.weights)[::-1][:10].sum()
        assert top.truncation_mass == pytest.approx(1.0 - kept, abs=1e-12)
        assert top.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_top_product_is_exact(self):
        rng = np.random.default_rng(3)
        lists = [rng.dirichlet(np.ones(4)) for _ in range(4)]
        _, wts = _top_product(lists, 17)
        brute = np.sort([np.prod(c) for c in itertools.product(*lists)])[::-1][:17]
        np.testing.assert_allclose(np.sort(wts)[::-1], brute)

    def test_overflow_guard(self):
        gm = GaussianMixture(np.full(10, 0.1), np.arange(10.0)[:, None], np.ones((10, 1, 1)))
        with pytest.raises(InvalidInputError):
            sum_nds_dist([gm] * 8)
        m = sum_nds_dist([gm] * 8, top_g=5)
        assert len(m) == 5

    def test_underflowing_products_dropped(self):
        gm = GaussianMixture([1.0 - 2e-200, 1e-200, 1e-200], [[0.0], [1.0], [2.0]],
                             np.ones((3, 1, 1)))
        m = sum_nds_dist([gm] * 3)
        # only realizations with at most one 1e-200 factor survive
        assert len(m) == 1 + 3 * 2
        assert m.truncation_mass == 0.0 and not m.renormalized
        assert mixture_mean(m) == pytest.approx(3.0, abs=1e-9)

    def test_empty_list(self):
        with pytest.raises(InvalidInputError):
            sum_nds_dist([])

    def test_mean_is_total_dimension(self):
        gms = [random_gm(20, 1, 2), random_gm(21, 2, 3), random_gm(22, 4, 2)]
        assert mixture_mean(sum_nds_dist(gms)) == pytest.approx(7.0, abs=1e-9)
