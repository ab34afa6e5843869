"""Gaussian mixtures: representation, moments, densities, sampling, condensation.

Mixtures are stored as stacked arrays (weights ``(G,)``, means ``(G, n)``,
covariances ``(G, n, n)``) so that the filter can push hundreds of components
through each step without per-component Python objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import DegenerateCovarianceError, InvalidInputError

_LOG_2PI = np.log(2.0 * np.pi)
_SYM_RTOL = 1e-12
_WEIGHT_RENORM_TOL = 1e-6


def derive_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return an independent generator for substream ``stream`` of ``seed``.

    The ``(seed, stream)`` pair is mapped through :class:`numpy.random.SeedSequence`
    so that Monte Carlo runs indexed by ``stream`` are reproducible no matter
    which order (or which process) they execute in.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


def cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor(s); raises DegenerateCovarianceError on failure.

    Works on a single matrix or a stack of matrices.
    """
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise DegenerateCovarianceError("covariance contains non-finite entries")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("covariance is not positive definite") from exc


def _symmetrize_checked(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    scale = np.max(np.abs(cov), axis=(-2, -1), keepdims=True)
    asym = np.abs(cov - np.swapaxes(cov, -1, -2))
    if np.any(asym > _SYM_RTOL * np.maximum(scale, np.finfo(float).tiny)):
        raise InvalidInputError("covariance is not symmetric")
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def _logdet_from_chol(chol: np.ndarray) -> np.ndarray:
    return 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)


@dataclass(frozen=True)
class GaussianComponent:
    """A single weighted Gaussian ``weight * N(mean, cov)``."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InvalidInputError(
                f"mean shape {mean.shape} and cov shape {cov.shape} are inconsistent")
        if not (0.0 < self.weight <= 1.0 + _WEIGHT_RENORM_TOL):
            raise InvalidInputError(f"component weight {self.weight} outside (0, 1]")
        cov = _symmetrize_checked(cov)
        cholesky(cov)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Finite Gaussian mixture ``sum_g weights[g] * N(means[g], covs[g])``.

    Parameters
    ----------
    weights : array_like, shape (G,)
        Positive weights. Renormalized when their sum is within 1e-6 of one;
        any larger discrepancy is an error.
    means : array_like, shape (G, n)
    covs : array_like, shape (G, n, n)
        Symmetric positive-definite covariances.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    chols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise InvalidInputError("a mixture needs at least one component")
        G = weights.size
        if means.ndim == 1 and G == 1:
            means = means[None, :]
        if means.ndim != 2 or means.shape[0] != G or means.shape[1] == 0:
            raise InvalidInputError(f"means must have shape (G, n); got {means.shape}")
        n = means.shape[1]
        if covs.ndim == 2 and G == 1:
            covs = covs[None]
        if covs.shape != (G, n, n):
            raise InvalidInputError(f"covs must have shape {(G, n, n)}; got {covs.shape}")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0.0):
            raise InvalidInputError("mixture weights must be positive and finite")
        total = weights.sum()
        if abs(total - 1.0) > _WEIGHT_RENORM_TOL:
            raise InvalidInputError(f"mixture weights sum to {total}, not 1")
        weights = weights / total
        if not np.all(np.isfinite(means)):
            raise InvalidInputError("mixture means must be finite")
        covs = _symmetrize_checked(covs)
        chols = cholesky(covs)
        for arr in (weights, means, covs, chols):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "chols", chols)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def __len__(self) -> int:
        return self.size

    @property
    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(w, m, c)
                for w, m, c in zip(self.weights, self.means, self.covs)]

    @classmethod
    def from_components(cls, components) -> "GaussianMixture":
        components = list(components)
        if not components:
            raise InvalidInputError("a mixture needs at least one component")
        return cls([c.weight for c in components],
                   np.stack([c.mean for c in components]),
                   np.stack([c.cov for c in components]))

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls([1.0], mean[None], cov[None])

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "components": [
                {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covs)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixture":
        try:
            comps = data["components"]
            weights = [c["weight"] for c in comps]
            means = [np.atleast_1d(np.asarray(c["mean"], dtype=float)) for c in comps]
            covs = [np.atleast_2d(np.asarray(c["cov"], dtype=float)) for c in comps]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed mixture JSON: {exc}") from exc
        if not comps:
            raise InvalidInputError("a mixture needs at least one component")
        dim = data.get("dim", means[0].size)
        if any(m.size != dim for m in means) or any(c.shape != (dim, dim) for c in covs):
            raise InvalidInputError(f"component dimensions disagree with dim={dim}")
        return cls(weights, np.stack(means), np.stack(covs))


def mixture_moments(gm: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    """Overall mean and covariance of a mixture (law of total covariance).

    Raises
    ------
    DegenerateCovarianceError
        If the mixture covariance is not positive definite.
    """
    w = gm.weights
    mean = w @ gm.means
    dev = gm.means - mean
    cov = np.einsum("g,gij->ij", w, gm.covs) + np.einsum("g,gi,gj->ij", w, dev, dev)
    cov = 0.5 * (cov + cov.T)
    cholesky(cov)
    return mean, cov


def moment_matched_gaussian(gm: GaussianMixture) -> GaussianComponent:
    mean, cov = mixture_moments(gm)
    return GaussianComponent(1.0, mean, cov)


def sample(gm: GaussianMixture, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """Draw ``count`` points from the mixture; returns an array of shape (count, n).

    Each draw picks a component by weight, then samples that Gaussian.
    """
    if count < 1:
        raise InvalidInputError("count must be at least 1")
    rng = derive_rng(seed, stream)
    return _draw(gm, count, rng)


def _draw(gm: GaussianMixture, count: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(gm.size, size=count, p=gm.weights)
    z = rng.standard_normal((count, gm.dim))
    return gm.means[idx] + np.einsum("kij,kj->ki", gm.chols[idx], z)


def component_log_densities(gm: GaussianMixture, x) -> np.ndarray:
    """Per-component log N(x; mu_g, Sigma_g); shape (..., G)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (gm.dim,):
        raise InvalidInputError(f"point dimension {x.shape[-1:]} != mixture dim {gm.dim}")
    flat = x.reshape(-1, gm.dim)
    out = np.empty((flat.shape[0], gm.size))
    logdets = _logdet_from_chol(gm.chols)
    for g in range(gm.size):
        y = solve_triangular(gm.chols[g], (flat - gm.means[g]).T, lower=True)
        out[:, g] = -0.5 * (np.sum(y * y, axis=0) + logdets[g] + gm.dim * _LOG_2PI)
    return out.reshape(x.shape[:-1] + (gm.size,))


def log_density(gm: GaussianMixture, x):
    """Log of the mixture density at ``x`` (a point or an array of points)."""
    terms = component_log_densities(gm, x) + np.log(gm.weights)
    return logsumexp(terms, axis=-1)


@nb.njit(cache=True)
def _logdet_spd(P):
    n = P.shape[0]
    if n == 1:
        return np.log(P[0, 0])
    if n == 2:
        return np.log(P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0])
    L = np.zeros((n, n))
    out = 0.0
    for j in range(n):
        s = P[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return np.nan
        L[j, j] = np.sqrt(s)
        out += np.log(s)
        for i in range(j + 1, n):
            t = P[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return out


@nb.njit(cache=True)
def _pair_cost(w, mu, P, logdet, i, j, scratch):
    wn = w[i] + w[j]
    ai = w[i] / wn
    aj = w[j] / wn
    n = mu.shape[1]
    if n == 1:
        d = mu[i, 0] - mu[j, 0]
        v = ai * P[i, 0, 0] + aj * P[j, 0, 0] + ai * aj * d * d
        cost = 0.5 * (wn * np.log(v) - w[i] * logdet[i] - w[j] * logdet[j])
        return cost if np.isfinite(cost) else np.inf
    for r in range(n):
        dr = mu[i, r] - mu[j, r]
        for c in range(n):
            dc = mu[i, c] - mu[j, c]
            scratch[r, c] = ai * P[i, r, c] + aj * P[j, r, c] + ai * aj * dr * dc
    ld = _logdet_spd(scratch)
    cost = 0.5 * (wn * ld - w[i] * logdet[i] - w[j] * logdet[j])
    if not np.isfinite(cost):
        return np.inf
    return cost


@nb.njit(cache=True)
def _runnalls(w, mu, P, target):
    G, n = mu.shape
    scratch = np.empty((n, n))
    logdet = np.empty(G)
    for g in range(G):
        logdet[g] = _logdet_spd(P[g])
    cost = np.full((G, G), np.inf)
    for a in range(G):
        for b in range(a + 1, G):
            c = _pair_cost(w, mu, P, logdet, a, b, scratch)
            cost[a, b] = c
            cost[b, a] = c
    alive = np.ones(G, dtype=np.bool_)
    best = np.empty(G, dtype=np.int64)
    bestc = np.empty(G)
    for a in range(G):
        k = np.argmin(cost[a])
        best[a] = k
        bestc[a] = cost[a, k]

    for _ in range(G - target):
        i = -1
        cmin = np.inf
        for a in range(G):
            if alive[a] and (i < 0 or bestc[a] < cmin):
                i = a
                cmin = bestc[a]
        j = best[i]
        if j < i:
            i, j = j, i
        wn = w[i] + w[j]
        ai = w[i] / wn
        aj = w[j] / wn
        for r in range(n):
            dr = mu[i, r] - mu[j, r]
            for c in range(n):
                dc = mu[i, c] - mu[j, c]
                scratch[r, c] = ai * P[i, r, c] + aj * P[j, r, c] + ai * aj * dr * dc
        for r in range(n):
            mu[i, r] = ai * mu[i, r] + aj * mu[j, r]
            for c in range(n):
                P[i, r, c] = 0.5 * (scratch[r, c] + scratch[c, r])
        w[i] = wn
        logdet[i] = _logdet_spd(P[i])
        alive[j] = False
        for a in range(G):
            cost[j, a] = np.inf
            cost[a, j] = np.inf
        for a in range(G):
            if alive[a] and a != i:
                c = _pair_cost(w, mu, P, logdet, i, a, scratch)
                cost[i, a] = c
                cost[a, i] = c
        for a in range(G):
            if not alive[a]:
                continue
            if best[a] == i and cost[a, i] <= bestc[a]:
                bestc[a] = cost[a, i]
            elif a == i or best[a] == i or best[a] == j:
                k = np.argmin(cost[a])
                best[a] = k
                bestc[a] = cost[a, k]
            elif cost[a, i] < bestc[a]:
                best[a] = i
                bestc[a] = cost[a, i]
    return alive


def condense(gm: GaussianMixture, target: int) -> GaussianMixture:
    """Greedy pairwise reduction to at most ``target`` components.

    At each step the pair with the smallest Runnalls KL-divergence upper bound

        B(i, j) = 0.5 [(w_i + w_j) log|P_ij| - w_i log|P_i| - w_j log|P_j|]

    is replaced by its moment-matched Gaussian, so the mixture mean and
    covariance are unchanged by every merge.
    """
    if target < 1:
        raise InvalidInputError("target must be at least 1")
    if gm.size <= target:
        return gm
    w = gm.weights.copy()
    mu = np.ascontiguousarray(gm.means)
    mu = mu.copy()
    P = gm.covs.copy()
    alive = _runnalls(w, mu, P, int(target))
    return GaussianMixture(w[alive], mu[alive], P[alive])
