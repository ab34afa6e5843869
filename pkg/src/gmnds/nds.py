"""Exact laws of normalized-deviation-squared (NDS) statistics.

For ``x ~ N(mean, cov)`` and a reference ``(ref_mean, ref_cov)`` the statistic

    q(x) = (x - ref_mean)^T ref_cov^{-1} (x - ref_mean)

follows a generalized chi-square law. For a Gaussian mixture referenced to its
own overall moments, ``q`` follows the mixture of the per-component laws, and
a sum of independent such statistics follows the mixture indexed by every
combination of component choices.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.linalg import cho_solve, eigh, solve_triangular

from .errors import InvalidInputError
from .gaussmix import GaussianMixture, cholesky, mixture_moments
from .genchi2 import GenChi2, GenChi2Mixture

EIG_GROUP_RTOL = 1e-8
MAX_SUPER_INDEX = 10**7


@dataclass(frozen=True, eq=False)
class QuadFormCoeffs:
    """``q(x) = x^T A x + q1^T x + q0``."""

    A: np.ndarray
    q1: np.ndarray
    q0: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.A, x) + x @ self.q1 + self.q0


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


def _mat(m) -> np.ndarray:
    return np.atleast_2d(np.asarray(m, dtype=float))


def quad_form_coeffs(mean, cov) -> QuadFormCoeffs:
    mean, cov = _vec(mean), _mat(cov)
    if cov.shape != (mean.size, mean.size):
        raise InvalidInputError("mean and covariance dimensions disagree")
    L = cholesky(cov)
    A = cho_solve((L, True), np.eye(mean.size))
    A = 0.5 * (A + A.T)
    Am = A @ mean
    return QuadFormCoeffs(A, -2.0 * Am, float(mean @ Am))


def nds_statistic(x, mean, cov):
    """``(x - mean)^T cov^{-1} (x - mean)`` via a triangular solve.

    ``x`` may be one point or an ``(N, n)`` array of points.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    mean, cov = _vec(mean), _mat(cov)
    if x.shape[-1:] != mean.shape or cov.shape != (mean.size, mean.size):
        raise InvalidInputError("point, mean and covariance dimensions disagree")
    L = cholesky(cov)
    d = np.atleast_2d(x - mean)
    y = solve_triangular(L, d.T, lower=True)
    q = np.sum(y * y, axis=0)
    return float(q[0]) if x.ndim <= 1 else q


def _group_starts(sorted_values: np.ndarray, rtol: float) -> np.ndarray:
    a, b = sorted_values[:-1], sorted_values[1:]
    breaks = (b - a) > rtol * np.maximum(np.abs(a), np.abs(b))
    return np.concatenate([[0], np.flatnonzero(breaks) + 1])


def group_eigenvalues(values, rtol: float = EIG_GROUP_RTOL) -> list[np.ndarray]:
    """Partition indices of ``values`` into runs of numerically equal entries.

    Sorted neighbours closer than ``rtol`` (relative) are chained together.
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    starts = _group_starts(values[order], rtol)
    return np.split(order, starts[1:])


def _symmetric_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = eigh(cov)
    return (vecs * np.sqrt(vals)) @ vecs.T


def gaussian_nds_dist(mean, cov, ref_mean, ref_cov, sqrt: str = "cholesky") -> GenChi2:
    """Law of ``(x - ref_mean)^T ref_cov^{-1} (x - ref_mean)`` for ``x ~ N(mean, cov)``.

    Whitening ``x = mean + S z`` with ``cov = S S^T`` and diagonalizing
    ``S^T ref_cov^{-1} S = P D P^T`` turns ``q`` into
    ``sum_i D_i (s_i + b_i / 2 D_i)^2 + t`` with ``s ~ N(0, I)`` and
    ``b = 2 P^T S^T ref_cov^{-1} (mean - ref_mean)``.

    Parameters
    ----------
    sqrt : {"cholesky", "symmetric"}
        Which square root of ``cov`` to whiten with. The result does not
        depend on it (up to rounding); the option exists for checking that.
    """
    mean, cov = _vec(mean), _mat(cov)
    ref_mean, ref_cov = _vec(ref_mean), _mat(ref_cov)
    n = mean.size
    if n == 0:
        raise InvalidInputError("dimension must be positive")
    if cov.shape != (n, n) or ref_mean.shape != (n,) or ref_cov.shape != (n, n):
        raise InvalidInputError("mean/covariance dimensions disagree")
    if sqrt == "cholesky":
        S = cholesky(cov)
    elif sqrt == "symmetric":
        cholesky(cov)
        S = _symmetric_sqrt(cov)
    else:
        raise InvalidInputError(f"unknown square root {sqrt!r}")
    Lr = cholesky(ref_cov)
    # S^T ref_cov^{-1} S = M^T M with M = Lr^{-1} S
    M = solve_triangular(Lr, S, lower=True)
    D, P = eigh(M.T @ M)
    delta = mean - ref_mean
    v = cho_solve((Lr, True), delta)
    b = 2.0 * P.T @ (S.T @ v)
    q_mean = float(delta @ v)

    groups = group_eigenvalues(D)
    w = np.array([D[g].mean() for g in groups])
    k = np.array([g.size for g in groups])
    lam = np.array([np.sum(b[g] ** 2) for g in groups]) / (4.0 * w ** 2)
    t = q_mean - float(w @ lam)
    return GenChi2(w, k, lam, t)


def gm_nds_dist(gm: GaussianMixture) -> GenChi2Mixture:
    """Law of the NDS statistic of ``gm`` against its own mean and covariance."""
    mu, cov = mixture_moments(gm)
    comps = tuple(gaussian_nds_dist(m, c, mu, cov) for m, c in zip(gm.means, gm.covs))
    return GenChi2Mixture(gm.weights, comps)


def merge_terms(w, k, lam, rtol: float = EIG_GROUP_RTOL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Combine chi-square terms whose coefficients coincide.

    ``w chi2(k1, l1) + w chi2(k2, l2)`` is ``w chi2(k1 + k2, l1 + l2)``; near-equal
    coefficients are replaced by their dof-weighted mean.
    """
    w, k, lam = (np.asarray(a, dtype=float) for a in (w, k, lam))
    order = np.argsort(w, kind="stable")
    w, k, lam = w[order], k[order], lam[order]
    starts = _group_starts(w, rtol)
    kw = np.add.reduceat(k, starts)
    ww = np.add.reduceat(w * k, starts) / kw
    ll = np.add.reduceat(lam, starts)
    return ww, kw, ll


def _convolve(comps) -> GenChi2:
    w = np.concatenate([c.w for c in comps])
    k = np.concatenate([c.k for c in comps])
    lam = np.concatenate([c.lam for c in comps])
    ww, kk, ll = merge_terms(w, k, lam)
    # merging leaves coefficients separated by more than the distinctness tolerance
    return GenChi2._trusted(ww, kk.astype(np.int64), ll, sum(c.t for c in comps))


def _top_product(weight_lists, top_g):
    """Indices and weights of the ``top_g`` heaviest super-index realizations.

    Pruning after each factor is exact: if a realization is among the
    ``top_g`` heaviest overall, its prefix is among the ``top_g`` heaviest
    prefixes (weights are products of positive factors).
    """
    idx = np.zeros((1, 0), dtype=np.int64)
    wts = np.ones(1)
    for ws in weight_lists:
        ws = np.asarray(ws)
        cand = (wts[:, None] * ws[None, :]).ravel()
        rows = np.repeat(np.arange(wts.size), ws.size)
        cols = np.tile(np.arange(ws.size), wts.size)
        if top_g is not None and cand.size > top_g:
            # stable order: heavier first, ties by enumeration order
            keep = np.sort(np.argsort(-cand, kind="stable")[:top_g])
        else:
            keep = np.arange(cand.size)
        idx = np.concatenate([idx[rows[keep]], cols[keep, None]], axis=1)
        wts = cand[keep]
    return idx, wts


def sum_nds_dist(gms, top_g: int | None = None) -> GenChi2Mixture:
    """Law of ``sum_c q_c(x_c)`` for independent mixtures ``x_c ~ gms[c]``.

    Each realization of the super index (one component per mixture) gives one
    generalized chi-square with concatenated coefficients and summed offsets;
    its weight is the product of the chosen component weights.

    Parameters
    ----------
    gms : sequence of GaussianMixture
    top_g : int, optional
        Keep only the ``top_g`` heaviest realizations and renormalize. The
        discarded probability is reported as ``truncation_mass``.

    Raises
    ------
    InvalidInputError
        For an empty list, or more than 10**7 realizations without ``top_g``.
    """
    gms = list(gms)
    if not gms:
        raise InvalidInputError("need at least one mixture")
    if top_g is not None and top_g < 1:
        raise InvalidInputError("top_g must be positive")
    total = 1
    for gm in gms:
        total *= gm.size
    if top_g is None and total > MAX_SUPER_INDEX:
        raise InvalidInputError(
            f"{total} super-index realizations exceed {MAX_SUPER_INDEX}; pass top_g")
    laws = [gm_nds_dist(gm) for gm in gms]
    idx, wts = _top_product([law.weights for law in laws], top_g)
    # products of tiny weights can underflow; those realizations carry no mass
    live = wts > 0.0
    idx, wts = idx[live], wts[live]
    comps = tuple(_convolve([laws[c].components[i] for c, i in enumerate(row)]) for row in idx)
    kept = float(wts.sum())
    truncated = top_g is not None and top_g < total
    mass = max(0.0, 1.0 - kept) if truncated else 0.0
    return GenChi2Mixture(wts / kept, comps, truncation_mass=mass, renormalized=truncated)


def block_diagonal_mixture(gms) -> GaussianMixture:
    """The joint mixture of independent ``gms`` as one ``sum(n_c)``-dimensional GM.

    Components are the block-diagonal stackings over every super index, in
    lexicographic order. Intended for small inputs (cross-checks).
    """
    gms = list(gms)
    dims = [gm.dim for gm in gms]
    N = sum(dims)
    offsets = np.concatenate([[0], np.cumsum(dims)])
    weights, means, covs = [], [], []
    for combo in product(*[range(gm.size) for gm in gms]):
        w = 1.0
        mu = np.empty(N)
        cov = np.zeros((N, N))
        for c, (gm, i) in enumerate(zip(gms, combo)):
            a, b = offsets[c], offsets[c + 1]
            w *= gm.weights[i]
            mu[a:b] = gm.means[i]
            cov[a:b, a:b] = gm.covs[i]
        weights.append(w)
        means.append(mu)
        covs.append(cov)
    return GaussianMixture(weights, np.array(means), np.array(covs))


def sum_nds_dist_blockdiag(gms) -> GenChi2Mixture:
    """Reference construction of :func:`sum_nds_dist` with literal block matrices.

    The quadratic form uses ``blkdiag(Sigma_1^-1, ..., Sigma_M^-1)`` and the
    stacked per-mixture means, and each super-index component is run through
    :func:`gaussian_nds_dist` in full dimension. Cost grows with the product of
    mixture sizes and cubically in the total dimension.
    """
    gms = list(gms)
    if not gms:
        raise InvalidInputError("need at least one mixture")
    moments = [mixture_moments(gm) for gm in gms]
    ref_mean = np.concatenate([m for m, _ in moments])
    dims = [gm.dim for gm in gms]
    ref_cov = np.zeros((sum(dims), sum(dims)))
    o = 0
    for (_, c), d in zip(moments, dims):
        ref_cov[o:o + d, o:o + d] = c
        o += d
    joint = block_diagonal_mixture(gms)
    comps = tuple(gaussian_nds_dist(m, c, ref_mean, ref_cov)
                  for m, c in zip(joint.means, joint.covs))
    return GenChi2Mixture(joint.weights, comps)
