import numpy as np
import pytest

from gmnds.gaussmix import GaussianMixture
from gmnds.gmfilter import LinearGmModel
from gmnds.harness import (CdfComparison, calibrate_filter, compare_cdf, kolmogorov_bound,
                           to_csv, validate_static, validate_sum)
from gmnds.hypotest import NdsTestResult

from conftest import random_gm
from test_gmfilter import load_fixture


def test_compare_cdf_exact_distance():
    cmp = compare_cdf([0.5], lambda x: np.asarray(x))
    assert cmp.ks_distance == pytest.approx(0.5)
    cmp = compare_cdf([0.1, 0.2, 0.9], lambda x: np.clip(np.asarray(x), 0, 1))
    # jumps: F(0.1)=0.1 vs 1/3, F(0.2)=0.2 vs 2/3, F(0.9)=0.9 vs 2/3 before the jump
    assert cmp.ks_distance == pytest.approx(2 / 3 - 0.2)
    assert isinstance(cmp, CdfComparison)
    assert np.all(np.diff(cmp.grid) >= 0)


def test_kolmogorov_bound_value():
    assert kolmogorov_bound(10**5) == pytest.approx(1.628 / np.sqrt(10**5), rel=1e-3)


def test_static_single_gaussian_references_coincide():
    gm = GaussianMixture.single([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]])
    res = validate_static(gm, 5000, seed=1)
    np.testing.assert_allclose(res.exact.theoretical, res.naive.theoretical, atol=1e-9)
    assert res.exact.ks_distance == pytest.approx(res.naive.ks_distance, abs=1e-9)
    assert res.exact.ks_distance < kolmogorov_bound(5000)


def test_static_bimodal_contrast():
    gm = GaussianMixture([0.5, 0.5], [[-3.0], [3.0]], [[[0.5]], [[0.5]]])
    res = validate_static(gm, 10**5, seed=2)
    assert res.exact.ks_distance < 0.0052
    assert res.naive.ks_distance > 0.1


def test_static_histogram_shape():
    res = validate_static(random_gm(3, 2, 3), 500, seed=3, bins=25)
    assert res.counts.sum() == 500
    assert res.bin_edges.size == 26
    assert res.to_dict()["sample_count"] == 500


def test_static_exact_beats_naive_on_multimodal():
    for seed in range(3):
        res = validate_static(random_gm(40 + seed, 2, 4, spread=4.0), 20000, seed=seed)
        assert res.exact.ks_distance < res.naive.ks_distance


def test_sum_single_gaussian_level():
    gm = GaussianMixture.single([0.0, 0.0], np.eye(2))
    rep = validate_sum([gm], 20000, 0.05, seed=4)
    assert rep.tau == pytest.approx(5.991465, abs=1e-4)
    assert abs(rep.fraction - 0.05) < 4 * np.sqrt(0.05 * 0.95 / 20000)
    assert rep.ci_low <= rep.fraction <= rep.ci_high


def test_sum_extreme_alpha():
    gms = [random_gm(5, 1, 2), random_gm(6, 1, 2)]
    rep = validate_sum(gms, 100, 0.999, seed=5)
    assert rep.tau >= 0.0
    assert rep.fraction > 0.9


def test_calibrate_single_run_is_test_result():
    m = load_fixture("localization_1d")
    res = calibrate_filter(m, m, 1, 0.05, seed=1, steps=20, max_m=1)
    assert isinstance(res, NdsTestResult)


def test_calibrate_report_and_determinism():
    m = load_fixture("localization_1d")
    a = calibrate_filter(m, m, 3, 0.05, seed=2, steps=20, max_m=1)
    b = calibrate_filter(m, m, 3, 0.05, seed=2, steps=20, max_m=1)
    assert a.to_dict(include_runs=True) == b.to_dict(include_runs=True)
    assert a.rate == a.rejections / 3
    assert 0.0 <= a.mean_p_value <= 1.0
    assert len({r.statistic for r in a.results}) == 3


def test_to_csv_round_trip_floats():
    text = to_csv(["a", "b"], [[0.1, 1], [1 / 3, 2]])
    lines = text.splitlines()
    assert lines[0] == "a,b"
    assert float(lines[2].split(",")[0]) == 1 / 3
