"""Exact NDS-statistic laws for Gaussian mixtures and consistency tests for GM filters."""
from .errors import (DegenerateCovarianceError, GmndsError, InvalidInputError,
                     MeasurementInconsistentError, MethodInapplicableError, NumericalFailure,
                     SpacingNotFoundError, UndefinedAutocorrelationError)
from .gaussmix import (GaussianComponent, GaussianMixture, condense, derive_rng, log_density,
                       mixture_moments, moment_matched_gaussian, sample)
from .genchi2 import (GenChi2, GenChi2Mixture, MixtureCdf, cdf_imhof, cdf_ruben, mixture_cdf,
                      mixture_mean, mixture_variance, quantile, sample_mixture)
from .gmfilter import (FilterTrace, LinearGmModel, autocorrelation, consistency_run,
                       error_series, measurement_update, run_filter, select_test_steps,
                       simulate_truth, step, time_update)
from .harness import CdfComparison, calibrate_filter, validate_static, validate_sum
from .hypotest import NdsTestResult, critical_threshold, nds_test
from .nds import (QuadFormCoeffs, gaussian_nds_dist, gm_nds_dist, nds_statistic,
                  quad_form_coeffs, sum_nds_dist)

__version__ = "0.1.0"
