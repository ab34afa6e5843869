"""NDS hypothesis test: critical threshold, p-value, verdict."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import InvalidInputError
from .genchi2 import GenChi2Mixture, MixtureCdf, quantile

QUANTILE_TOL = 1e-6


@dataclass(frozen=True)
class NdsTestResult:
    """Outcome of one NDS consistency test.

    The critical region is the closed interval ``[tau, inf)``, so an observed
    statistic exactly equal to ``tau`` rejects.
    """

    statistic: float
    tau: float
    alpha: float
    p_value: float
    reject: bool
    truncation_mass: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError("alpha must lie in (0, 1)")


def critical_threshold(m: GenChi2Mixture, alpha: float, tol: float = QUANTILE_TOL,
                       cdf: MixtureCdf | None = None) -> float:
    """``tau`` with ``P(Q >= tau) = alpha`` under the reference law ``m``."""
    _check_alpha(alpha)
    return quantile(m, 1.0 - alpha, tol, cdf=cdf)


def nds_test(q_obs: float, m: GenChi2Mixture, alpha: float,
             tol: float = QUANTILE_TOL) -> NdsTestResult:
    """Test an observed NDS statistic against the reference law ``m``."""
    _check_alpha(alpha)
    cdf = MixtureCdf(m, min(1e-10, tol * 1e-3))
    tau = critical_threshold(m, alpha, tol, cdf=cdf)
    q_obs = float(q_obs)
    p_value = min(1.0, max(0.0, 1.0 - cdf(q_obs)))
    return NdsTestResult(
        statistic=q_obs,
        tau=tau,
        alpha=float(alpha),
        p_value=p_value,
        reject=bool(q_obs >= tau),
        truncation_mass=float(m.truncation_mass),
    )
