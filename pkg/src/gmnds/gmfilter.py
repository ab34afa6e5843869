"""Exact Gaussian-mixture Bayes filter for linear models with GM noise.

The model is

    x_{k+1} = F x_k + B u_k + w_k,    w_k ~ process_noise
    y_{k+1} = H x_{k+1} + v_{k+1},    v_{k+1} ~ meas_noise

with a GM prior on ``x_0``. Each time update multiplies the component count by
the process-noise size, each measurement update by the measurement-noise size,
and the posterior is then condensed back to ``g_max`` components.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (InvalidInputError, MeasurementInconsistentError,
                     SpacingNotFoundError, UndefinedAutocorrelationError)
from .gaussmix import GaussianMixture, _draw, condense, derive_rng, mixture_moments
from .hypotest import NdsTestResult, nds_test
from .nds import nds_statistic, sum_nds_dist

_LOG_2PI = np.log(2.0 * np.pi)


def _as_matrix(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be a matrix")
    return a


@dataclass(frozen=True, eq=False)
class LinearGmModel:
    F: np.ndarray
    H: np.ndarray
    prior: GaussianMixture
    process_noise: GaussianMixture
    meas_noise: GaussianMixture
    g_max: int = 10
    B: np.ndarray | None = None

    def __post_init__(self):
        F = _as_matrix(self.F, "F")
        H = _as_matrix(self.H, "H")
        n = F.shape[0]
        if F.shape != (n, n):
            raise InvalidInputError("F must be square")
        if H.shape[1] != n:
            raise InvalidInputError("H must have as many columns as the state")
        B = np.zeros((n, 0)) if self.B is None else np.asarray(self.B, dtype=float).reshape(n, -1)
        if self.prior.dim != n or self.process_noise.dim != n:
            raise InvalidInputError("prior and process noise must match the state dimension")
        if self.meas_noise.dim != H.shape[0]:
            raise InvalidInputError("measurement noise must match the measurement dimension")
        if int(self.g_max) < 1:
            raise InvalidInputError("g_max must be positive")
        for arr in (F, H, B):
            arr.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "g_max", int(self.g_max))

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[0]

    def replace(self, **changes) -> "LinearGmModel":
        fields = dict(F=self.F, H=self.H, prior=self.prior, process_noise=self.process_noise,
                      meas_noise=self.meas_noise, g_max=self.g_max, B=self.B)
        fields.update(changes)
        return LinearGmModel(**fields)

    def to_dict(self) -> dict:
        return {
            "F": self.F.tolist(),
            "B": self.B.tolist(),
            "H": self.H.tolist(),
            "prior": self.prior.to_dict(),
            "process_noise": self.process_noise.to_dict(),
            "meas_noise": self.meas_noise.to_dict(),
            "g_max": self.g_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearGmModel":
        try:
            B = data.get("B")
            if B is not None and np.size(B) == 0:
                B = None
            return cls(
                F=data["F"],
                H=data["H"],
                prior=GaussianMixture.from_dict(data["prior"]),
                process_noise=GaussianMixture.from_dict(data["process_noise"]),
                meas_noise=GaussianMixture.from_dict(data["meas_noise"]),
                g_max=data.get("g_max", 10),
                B=B,
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed model JSON: {exc}") from exc


@dataclass
class FilterTrace:
    """Per-step filter output; index 0 is the prior (no measurement yet).

    ``pred_meas[k]`` is the predicted measurement mixture for ``y_k`` and is
    ``None`` at step 0. ``states``/``measurements`` hold ground truth when the
    run was simulated (``measurements[0]`` is NaN).
    """

    posteriors: list = field(default_factory=list)
    means: list = field(default_factory=list)
    covs: list = field(default_factory=list)
    pred_meas: list = field(default_factory=list)
    states: np.ndarray | None = None
    measurements: np.ndarray | None = None

    def append(self, posterior: GaussianMixture, pred_meas: GaussianMixture | None) -> None:
        mean, cov = mixture_moments(posterior)
        self.posteriors.append(posterior)
        self.means.append(mean)
        self.covs.append(cov)
        self.pred_meas.append(pred_meas)

    def __len__(self) -> int:
        return len(self.posteriors)


def _control(model: LinearGmModel, u) -> np.ndarray:
    if u is None or model.B.shape[1] == 0:
        return np.zeros(model.n)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (model.B.shape[1],):
        raise InvalidInputError("control input has the wrong length")
    return model.B @ u


def time_update(post: GaussianMixture, model: LinearGmModel, u=None) -> GaussianMixture:
    """Chapman-Kolmogorov prediction; one component per (posterior, noise) pair."""
    if post.dim != model.n:
        raise InvalidInputError("posterior dimension does not match the model")
    F = model.F
    wn = model.process_noise
    drift = _control(model, u)
    means = (post.means @ F.T + drift)[:, None, :] + wn.means[None, :, :]
    covs = np.einsum("ij,djk,lk->dil", F, post.covs, F)[:, None] + wn.covs[None]
    weights = np.outer(post.weights, wn.weights).ravel()
    G = post.size * wn.size
    # products of tiny weights can underflow; those components carry no mass
    live = weights > 0.0
    return GaussianMixture(weights[live], means.reshape(G, model.n)[live],
                           covs.reshape(G, model.n, model.n)[live])


def measurement_update(prior: GaussianMixture, model: LinearGmModel, y):
    """Bayes update with a GM measurement noise.

    Returns ``(posterior, pred_meas)``. Covariances use the Joseph form and are
    symmetrized. Weights are normalized in log space.

    Raises
    ------
    MeasurementInconsistentError
        If every component assigns zero likelihood to ``y``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.p,):
        raise InvalidInputError("measurement has the wrong length")
    H = model.H
    vn = model.meas_noise
    L, J, n, p = prior.size, vn.size, model.n, model.p

    y_mean = (prior.means @ H.T)[:, None, :] + vn.means[None, :, :]           # (L, J, p)
    HP = np.einsum("ij,ljk->lik", H, prior.covs)                             # (L, p, n)
    S = (np.einsum("lik,jk->lij", HP, H))[:, None] + vn.covs[None]           # (L, J, p, p)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    Ls = np.linalg.cholesky(S)
    innov = y - y_mean                                                        # (L, J, p)
    # K^T = S^{-1} H P
    Kt = np.linalg.solve(S, np.broadcast_to(HP[:, None], (L, J, p, n)))      # (L, J, p, n)
    K = np.swapaxes(Kt, -1, -2)
    white = np.linalg.solve(Ls, innov[..., None])[..., 0]
    with np.errstate(over="ignore"):
        # an overflowing Mahalanobis term is a zero likelihood, handled below
        loglik = (-0.5 * np.sum(white ** 2, axis=-1)
                  - np.sum(np.log(np.diagonal(Ls, axis1=-2, axis2=-1)), axis=-1)
                  - 0.5 * p * _LOG_2PI)

    means = prior.means[:, None, :] + np.einsum("ljnp,ljp->ljn", K, innov)
    IKH = np.eye(n) - K @ H
    P = prior.covs[:, None]
    covs = IKH @ P @ np.swapaxes(IKH, -1, -2) + K @ vn.covs[None] @ Kt
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))

    prior_w = np.outer(prior.weights, vn.weights)
    logw = np.log(prior.weights)[:, None] + np.log(vn.weights)[None, :] + loglik
    peak = np.max(logw)
    if not np.isfinite(peak):
        raise MeasurementInconsistentError(
            "measurement has zero likelihood under every component", estimate=float(np.max(loglik)))
    logw = logw - logsumexp(logw)
    w = np.exp(logw).ravel()
    keep = w > 0.0
    if not np.any(keep):
        raise MeasurementInconsistentError(
            "measurement has zero likelihood under every component", estimate=float(np.max(loglik)))
    posterior = GaussianMixture(w[keep], means.reshape(L * J, n)[keep],
                                covs.reshape(L * J, n, n)[keep])
    live = prior_w.ravel() > 0.0
    pred_meas = GaussianMixture(prior_w.ravel()[live], y_mean.reshape(L * J, p)[live],
                                S.reshape(L * J, p, p)[live])
    return posterior, pred_meas


def step(post: GaussianMixture, model: LinearGmModel, u, y):
    """One filter cycle: predict, update, condense to ``model.g_max``.

    Returns ``(posterior, pred_meas)``.
    """
    prior = time_update(post, model, u)
    posterior, pred_meas = measurement_update(prior, model, y)
    return condense(posterior, model.g_max), pred_meas


def run_filter(model: LinearGmModel, measurements, inputs=None, states=None) -> FilterTrace:
    """Filter a measurement log.

    ``measurements[k]`` is ``y_k``; row 0 is ignored (the filter starts from the
    prior at step 0).
    """
    ys = np.asarray(measurements, dtype=float).reshape(len(measurements), -1)
    trace = FilterTrace(states=None if states is None else np.asarray(states, dtype=float),
                        measurements=ys)
    post = model.prior
    trace.append(post, None)
    for k in range(1, ys.shape[0]):
        u = None if inputs is None else inputs[k - 1]
        post, pred = step(post, model, u, ys[k])
        trace.append(post, pred)
    return trace


def simulate_truth(model: LinearGmModel, steps: int, seed: int, stream: int = 0, inputs=None):
    """Ground-truth trajectory and measurements.

    Returns ``(states, measurements)`` of shapes ``(steps + 1, n)`` and
    ``(steps + 1, p)``; ``measurements[0]`` is NaN.
    """
    if steps < 1:
        raise InvalidInputError("steps must be positive")
    rng = derive_rng(seed, stream)
    x = _draw(model.prior, 1, rng)[0]
    w = _draw(model.process_noise, steps, rng)
    v = _draw(model.meas_noise, steps, rng)
    states = np.empty((steps + 1, model.n))
    ys = np.full((steps + 1, model.p), np.nan)
    states[0] = x
    for k in range(1, steps + 1):
        u = None if inputs is None else inputs[k - 1]
        x = model.F @ x + _control(model, u) + w[k - 1]
        states[k] = x
        ys[k] = model.H @ x + v[k - 1]
    return states, ys


def error_series(trace: FilterTrace) -> tuple[np.ndarray, np.ndarray]:
    """MMSE errors ``x_k - mean_k`` and their 2-sigma bounds, per step."""
    if trace.states is None:
        raise InvalidInputError("trace has no ground truth")
    means = np.asarray(trace.means)
    errors = trace.states[: len(means)] - means
    bounds = 2.0 * np.sqrt(np.array([np.diag(c) for c in trace.covs]))
    return errors, bounds


def innovation_series(trace: FilterTrace) -> np.ndarray:
    """``y_k - E[y_k | Y_{k-1}]`` for steps 1..T (row 0 is NaN)."""
    out = np.full((len(trace), trace.measurements.shape[1]), np.nan)
    for k in range(1, len(trace)):
        mean, _ = mixture_moments(trace.pred_meas[k])
        out[k] = trace.measurements[k] - mean
    return out


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation ``rho(0..max_lag)`` normalized by lag 0."""
    x = np.asarray(series, dtype=float).ravel()
    if max_lag < 0 or x.size <= max_lag:
        raise InvalidInputError("series must be longer than max_lag")
    d = x - x.mean()
    c0 = d @ d
    if c0 <= 0.0:
        raise UndefinedAutocorrelationError("autocorrelation of a constant series is undefined")
    return np.array([d[: x.size - lag] @ d[lag:] for lag in range(max_lag + 1)]) / c0


def select_spacing(errors, threshold: float, max_lag: int | None = None) -> int:
    """Smallest lag ``dk`` with ``|rho(lag)| < threshold`` for every lag in ``[dk, max_lag]``.

    ``errors`` is ``(T,)`` or ``(T, d)``; the worst coordinate decides.
    """
    e = np.asarray(errors, dtype=float)
    e = e.reshape(e.shape[0], -1)
    e = e[np.all(np.isfinite(e), axis=1)]
    if max_lag is None:
        max_lag = max(1, min(10, e.shape[0] // 4))
    worst = np.max(np.abs([autocorrelation(e[:, j], max_lag) for j in range(e.shape[1])]), axis=0)
    ok = worst[1:] < threshold
    if not ok[-1]:
        raise SpacingNotFoundError(
            f"autocorrelation at lag {max_lag} is {worst[-1]:.3g} >= {threshold}")
    bad = np.flatnonzero(~ok)
    return int(bad[-1] + 2) if bad.size else 1


def select_test_steps(trace, threshold: float, count: int, start: int = 5,
                      max_lag: int | None = None, spacing: int | None = None) -> list[int]:
    """Test-step indices ``start, start + dk, ...`` (at most ``count``).

    ``trace`` may be a :class:`FilterTrace` (its MMSE error series from step 1
    on is analysed) or an error array. ``spacing`` skips the autocorrelation
    analysis.
    """
    if isinstance(trace, FilterTrace):
        errors, _ = error_series(trace)
        errors = errors[1:]
        last = len(trace) - 1
    else:
        errors = np.asarray(trace, dtype=float)
        last = errors.shape[0] - 1
    if spacing is None:
        spacing = select_spacing(errors, threshold, max_lag)
    if count < 1 or spacing < 1:
        raise InvalidInputError("count and spacing must be positive")
    steps = list(range(start, last + 1, spacing))[:count]
    if not steps:
        raise InvalidInputError("no test step fits inside the trace")
    return steps


def consistency_run(model_true: LinearGmModel, model_filter: LinearGmModel, steps: int,
                    alpha: float, threshold: float, max_m: int, top_g: int | None,
                    seed: int, stream: int = 0, mode: str = "state", start: int = 5,
                    spacing: int | None = None, max_lag: int | None = None,
                    full_output: bool = False):
    """Simulate, filter and run one NDS test over well-separated steps.

    ``mode="state"`` compares true states with posterior mixtures;
    ``mode="measurement"`` compares recorded measurements with the
    predicted-measurement mixtures. Test steps are spaced by the error (or
    innovation) autocorrelation unless ``spacing`` is given.
    """
    if mode not in ("state", "measurement"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    states, ys = simulate_truth(model_true, steps, seed, stream)
    trace = run_filter(model_filter, ys, states=states)
    series = error_series(trace)[0] if mode == "state" else innovation_series(trace)
    if spacing is None:
        spacing = select_spacing(series[1:], threshold, max_lag)
    # row k of the series is step k, so the indices below are step numbers
    test_steps = select_test_steps(series, threshold, max_m, start=max(start, 1),
                                   spacing=spacing)
    if mode == "state":
        gms = [trace.posteriors[k] for k in test_steps]
        obs = [states[k] for k in test_steps]
    else:
        gms = [trace.pred_meas[k] for k in test_steps]
        obs = [ys[k] for k in test_steps]
    q = 0.0
    for gm, x in zip(gms, obs):
        mean, cov = mixture_moments(gm)
        q += nds_statistic(x, mean, cov)
    reference = sum_nds_dist(gms, top_g=top_g)
    result = nds_test(q, reference, alpha)
    if full_output:
        return result, trace, test_steps
    return result
