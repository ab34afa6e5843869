"""Validation and calibration experiments built on the library.

* :func:`validate_static` -- empirical CDF of the NDS statistic of one mixture
  against the exact law and against the naive central chi-square law.
* :func:`validate_sum` -- coverage of the critical threshold for a sum of
  independent mixtures.
* :func:`calibrate_filter` -- rejection rate of repeated filter consistency
  runs (level for matched models, power for mismatched ones).
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats

from .errors import InvalidInputError
from .gaussmix import GaussianMixture, _draw, derive_rng, mixture_moments
from .genchi2 import MixtureCdf, mixture_cdf
from .gmfilter import LinearGmModel, consistency_run
from .hypotest import NdsTestResult, critical_threshold
from .nds import gm_nds_dist, nds_statistic, sum_nds_dist


@dataclass
class CdfComparison:
    """Empirical vs reference CDF of a sample.

    ``ks_distance`` is the exact Kolmogorov-Smirnov distance, taken over the
    jump points of the empirical CDF; ``grid`` is a coarser set of points kept
    for plotting.
    """

    grid: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    ks_distance: float
    sample_count: int

    def to_dict(self) -> dict:
        return {"ks_distance": self.ks_distance, "sample_count": self.sample_count}


def compare_cdf(samples, cdf, grid_size: int = 200) -> CdfComparison:
    """Build a :class:`CdfComparison` of ``samples`` against the callable ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    N = x.size
    if N == 0:
        raise InvalidInputError("need at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, N + 1)
    ks = float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))
    grid = np.quantile(x, np.linspace(0.0, 1.0, min(grid_size, N)))
    emp = np.searchsorted(x, grid, side="right") / N
    return CdfComparison(grid, emp, np.asarray(cdf(grid), dtype=float), ks, N)


def kolmogorov_bound(n: int, level: float = 0.99) -> float:
    """Asymptotic critical KS distance, e.g. ``1.628 / sqrt(n)`` at 99%."""
    return float(stats.kstwobign.ppf(level) / np.sqrt(n))


@dataclass
class StaticValidation:
    exact: CdfComparison
    naive: CdfComparison
    bin_edges: np.ndarray
    counts: np.ndarray
    statistics: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "sample_count": self.exact.sample_count,
            "ks_exact": self.exact.ks_distance,
            "ks_naive": self.naive.ks_distance,
            "ks_bound_99": kolmogorov_bound(self.exact.sample_count),
        }


def validate_static(gm: GaussianMixture, samples: int, seed: int, bins: int = 50,
                    stream: int = 0) -> StaticValidation:
    """Draw from ``gm``, compute NDS statistics and compare their CDF with
    the exact mixture law and with the central chi-square law of ``gm.dim``
    degrees of freedom (what a moment-matched Gaussian would predict)."""
    if samples < 1:
        raise InvalidInputError("samples must be positive")
    rng = derive_rng(seed, stream)
    x = _draw(gm, samples, rng)
    mu, cov = mixture_moments(gm)
    q = np.atleast_1d(nds_statistic(x, mu, cov))
    exact = compare_cdf(q, MixtureCdf(gm_nds_dist(gm), 1e-10))
    naive = compare_cdf(q, partial(stats.chi2.cdf, df=gm.dim))
    counts, edges = np.histogram(q, bins=bins)
    return StaticValidation(exact, naive, edges, counts, q)


@dataclass
class CoverageReport:
    alpha: float
    tau: float
    samples: int
    exceedances: int
    fraction: float
    ci_low: float
    ci_high: float
    truncation_mass: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=level)
    return float(ci.low), float(ci.high)


def validate_sum(gms, samples: int, alpha: float, seed: int, top_g: int | None = None,
                 stream: int = 0) -> CoverageReport:
    """Fraction of joint draws whose summed NDS statistic reaches ``tau(alpha)``."""
    gms = list(gms)
    if samples < 1:
        raise InvalidInputError("samples must be positive")
    law = sum_nds_dist(gms, top_g=top_g)
    tau = critical_threshold(law, alpha)
    rng = derive_rng(seed, stream)
    Q = np.zeros(samples)
    for gm in gms:
        mu, cov = mixture_moments(gm)
        Q += np.atleast_1d(nds_statistic(_draw(gm, samples, rng), mu, cov))
    hits = int(np.count_nonzero(Q >= tau))
    lo, hi = _binomial_ci(hits, samples)
    return CoverageReport(float(alpha), tau, samples, hits, hits / samples, lo, hi,
                          float(law.truncation_mass))


@dataclass
class CalibrationReport:
    runs: int
    alpha: float
    rejections: int
    rate: float
    ci_low: float
    ci_high: float
    mean_p_value: float
    results: list = field(repr=False)

    def to_dict(self, include_runs: bool = False) -> dict:
        out = {k: getattr(self, k) for k in
               ("runs", "alpha", "rejections", "rate", "ci_low", "ci_high", "mean_p_value")}
        if include_runs:
            out["results"] = [r.to_dict() for r in self.results]
        return out


def calibrate_filter(model_true: LinearGmModel, model_filter: LinearGmModel, runs: int,
                     alpha: float, seed: int, steps: int = 35, max_m: int = 3,
                     spacing: int | None = 15, threshold: float = 0.02,
                     top_g: int | None = None, mode: str = "state", start: int = 5,
                     workers: int = 1):
    """Run ``runs`` independent consistency tests; run ``i`` uses stream ``i``.

    Returns the single :class:`NdsTestResult` when ``runs == 1``, otherwise a
    :class:`CalibrationReport`. Results do not depend on ``workers``.
    """
    if runs < 1:
        raise InvalidInputError("runs must be positive")
    job = partial(consistency_run, model_true, model_filter, steps, alpha, threshold, max_m,
                  top_g, seed, mode=mode, start=start, spacing=spacing)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_call_stream, [job] * runs, range(runs)))
    else:
        results = [job(stream=i) for i in range(runs)]
    if runs == 1:
        return results[0]
    hits = sum(r.reject for r in results)
    lo, hi = _binomial_ci(hits, runs)
    return CalibrationReport(runs, float(alpha), hits, hits / runs, lo, hi,
                             float(np.mean([r.p_value for r in results])), results)


def _call_stream(job, stream):
    return job(stream=stream)


def to_csv(header, rows) -> str:
    """CSV text with a header row; floats use their shortest round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v
