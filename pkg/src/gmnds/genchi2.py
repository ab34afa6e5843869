"""Generalized chi-square laws and finite mixtures of them.

A generalized chi-square variable is

    Q = sum_j w_j * chi2(k_j, lambda_j) + t

with independent non-central chi-square terms. Two CDF routes are provided:

* :func:`cdf_ruben` -- Ruben's expansion in central chi-square CDFs, valid
  when every ``w_j > 0``. Coefficients are non-negative and sum to one, so the
  unsummed remainder is a hard truncation bound.
* :func:`cdf_imhof` -- numerical inversion of the characteristic function,
  valid for any signs of ``w``.

:class:`MixtureCdf` compiles a mixture once (series coefficients, inversion
groups) so repeated evaluation inside a root-finder stays cheap.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import integrate, optimize
from scipy.special import gammainc, gammaln

from .errors import InvalidInputError, MethodInapplicableError, NumericalFailure
from .gaussmix import derive_rng

_DISTINCT_RTOL = 1e-8
_RUBEN_BETA_FACTOR = 0.90625
_RUBEN_MAX_TERMS = 4000
_RUBEN_ADAPTIVE_TOL = 1e-12
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True, eq=False)
class GenChi2:
    """Parameters ``(w, k, lambda, t)`` of a generalized chi-square law.

    ``w`` holds distinct nonzero coefficients, ``k`` their (positive integer)
    degrees of freedom, ``lam`` the non-centralities and ``t`` the offset.
    """

    w: np.ndarray
    k: np.ndarray
    lam: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        k_raw = np.atleast_1d(np.asarray(self.k, dtype=float))
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if w.ndim != 1 or w.size == 0 or k_raw.shape != w.shape or lam.shape != w.shape:
            raise InvalidInputError("w, k and lambda must be equal-length 1-D vectors")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(lam)) and np.isfinite(self.t)):
            raise InvalidInputError("parameters must be finite")
        if np.any(w == 0.0):
            raise InvalidInputError("coefficients w must be nonzero")
        if np.any(k_raw < 1) or np.any(k_raw != np.round(k_raw)):
            raise InvalidInputError("degrees of freedom k must be positive integers")
        if np.any(lam < 0.0):
            raise InvalidInputError("non-centralities must be non-negative")
        ws = np.sort(w)
        gaps = np.diff(ws)
        if np.any(gaps <= _DISTINCT_RTOL * np.maximum(np.abs(ws[1:]), np.abs(ws[:-1]))):
            raise InvalidInputError("coefficients w must be pairwise distinct")
        k = k_raw.astype(np.int64)
        for arr in (w, k, lam):
            arr.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def _trusted(cls, w, k, lam, t) -> "GenChi2":
        """Build from parameters already known to satisfy the invariants."""
        g = object.__new__(cls)
        for name, arr in (("w", w), ("k", k), ("lam", lam)):
            arr.setflags(write=False)
            object.__setattr__(g, name, arr)
        object.__setattr__(g, "t", float(t))
        return g

    @property
    def dof(self) -> int:
        return int(self.k.sum())

    @property
    def positive(self) -> bool:
        return bool(np.all(self.w > 0.0))

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "k": self.k.tolist(),
                "lambda": self.lam.tolist(), "t": self.t}

    @classmethod
    def from_dict(cls, data: dict) -> "GenChi2":
        try:
            return cls(data["w"], data["k"], data["lambda"], data.get("t", 0.0))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed generalized chi-square JSON: {exc}") from exc


@dataclass(frozen=True, eq=False)
class GenChi2Mixture:
    """Weighted list of :class:`GenChi2` laws.

    ``truncation_mass`` records probability mass discarded before the weights
    were renormalized (0 for an exact mixture).
    """

    weights: np.ndarray
    components: tuple
    truncation_mass: float = 0.0
    renormalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        comps = tuple(self.components)
        if weights.ndim != 1 or weights.size == 0 or weights.size != len(comps):
            raise InvalidInputError("need one positive weight per component")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0.0):
            raise InvalidInputError("mixture weights must be positive")
        total = weights.sum()
        if abs(total - 1.0) > 1e-6:
            raise InvalidInputError(f"mixture weights sum to {total}, not 1")
        if not all(isinstance(c, GenChi2) for c in comps):
            raise InvalidInputError("components must be GenChi2 instances")
        weights = weights / total
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, g: GenChi2) -> "GenChi2Mixture":
        return cls([1.0], (g,))

    def __len__(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        out = {"weights": self.weights.tolist(),
               "components": [c.to_dict() for c in self.components]}
        if self.truncation_mass or self.renormalized:
            out["truncation_mass"] = self.truncation_mass
            out["renormalized"] = self.renormalized
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GenChi2Mixture":
        try:
            comps = tuple(GenChi2.from_dict(c) for c in data["components"])
            return cls(data["weights"], comps,
                       float(data.get("truncation_mass", 0.0)),
                       bool(data.get("renormalized", False)))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed mixture JSON: {exc}") from exc


# ---------------------------------------------------------------- moments

def mean(g: GenChi2) -> float:
    return float(np.sum(g.w * (g.k + g.lam)) + g.t)


def variance(g: GenChi2) -> float:
    return float(2.0 * np.sum(g.w ** 2 * (g.k + 2.0 * g.lam)))


def mixture_mean(m: GenChi2Mixture) -> float:
    return float(sum(eta * mean(g) for eta, g in zip(m.weights, m.components)))


def mixture_variance(m: GenChi2Mixture) -> float:
    means = np.array([mean(g) for g in m.components])
    second = np.array([variance(g) for g in m.components]) + means ** 2
    mu = m.weights @ means
    return float(m.weights @ second - mu ** 2)


# ---------------------------------------------------------------- Ruben series

def _pad(components) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack components into (G, J) arrays; padding entries carry k = lambda = 0."""
    J = max(c.w.size for c in components)
    G = len(components)
    W = np.ones((G, J))
    K = np.zeros((G, J))
    L = np.zeros((G, J))
    T = np.empty(G)
    for g, c in enumerate(components):
        n = c.w.size
        W[g, :n], K[g, :n], L[g, :n] = c.w, c.k, c.lam
        T[g] = c.t
    return W, K, L, T


class _RubenSeries:
    """Series coefficients for a batch of positive-definite components.

    P(Q <= x) = sum_n a_n P(chi2_{M + 2n} <= (x - t) / beta)

    with beta = 0.90625 * min(w), a_0 = exp(-sum(lam)/2) prod (beta/w)^(k/2), and

        a_n = (1 / 2n) sum_{r=1..n} g_r a_{n-r},
        g_r = sum_j k_j (1 - beta/w_j)^r + r beta sum_j (lam_j / w_j) (1 - beta/w_j)^(r-1).
    """

    def __init__(self, components, tols, max_terms=_RUBEN_MAX_TERMS, fixed_terms=None):
        W, K, L, T = _pad(components)
        G = W.shape[0]
        self.t = T
        self.dof = K.sum(axis=1)
        wmin = np.where(K > 0, W, np.inf).min(axis=1)
        self.beta = _RUBEN_BETA_FACTOR * wmin
        ratio = np.where(K > 0, 1.0 - self.beta[:, None] / W, 0.0)
        log_a0 = (-0.5 * L.sum(axis=1)
                  + 0.5 * np.sum(K * np.log(self.beta[:, None] / W), axis=1))
        self.ok = log_a0 > -700.0
        tols = np.broadcast_to(np.asarray(tols, dtype=float), (G,))
        nonc = L / W

        def g_block(rows, lo, hi):
            r = np.arange(lo, hi, dtype=float)
            rat = ratio[rows][:, :, None]
            rp = rat ** r
            rpm1 = rat ** np.maximum(r - 1.0, 0.0)
            return (np.sum(K[rows][:, :, None] * rp, axis=1)
                    + self.beta[rows][:, None] * r * np.sum(nonc[rows][:, :, None] * rpm1, axis=1))

        N = int(fixed_terms) if fixed_terms is not None else min(128, max_terms)
        a = np.zeros((G, N))
        a[:, 0] = np.exp(np.where(self.ok, log_a0, -np.inf))
        gcoef = np.zeros((G, N))
        ok_rows = np.flatnonzero(self.ok)
        if ok_rows.size:
            gcoef[ok_rows] = g_block(ok_rows, 0, N)
        csum = a[:, 0].copy()
        used = np.ones(G, dtype=np.int64)
        if fixed_terms is None:
            active = np.flatnonzero(self.ok & (1.0 - csum > tols))
        else:
            active = ok_rows
        n = 1
        while active.size and n < (N if fixed_terms is not None else max_terms):
            if n == N:
                grow = min(N, max_terms - N)
                a = np.concatenate([a, np.zeros((G, grow))], axis=1)
                gcoef = np.concatenate([gcoef, np.zeros((G, grow))], axis=1)
                gcoef[active, N:N + grow] = g_block(active, N, N + grow)
                N += grow
            a[active, n] = (gcoef[active, n:0:-1] * a[active, :n]).sum(axis=1) / (2.0 * n)
            csum[active] += a[active, n]
            used[active] = n + 1
            if fixed_terms is None:
                active = active[(1.0 - csum[active]) > tols[active]]
            n += 1
        self.converged = self.ok & ((1.0 - csum) <= tols) if fixed_terms is None else self.ok
        self.terms = used
        width = int(used.max())
        self.a = a[:, :width]
        self.residual = np.clip(1.0 - csum, 0.0, 1.0)
        # tail[:, i] = sum_{n > i} a_n over the retained terms
        rev = np.cumsum(self.a[:, ::-1], axis=1)[:, ::-1]
        self.tail = np.concatenate([rev[:, 1:], np.zeros((G, 1))], axis=1)
        self.total = rev[:, 0]
        self.lgam0 = gammaln(self.dof / 2.0 + 1.0)

    def evaluate(self, x, rows=None, weights=None):
        """Weighted CDF sum and truncation bound at points ``x``.

        Uses P(a + 1, z) = P(a, z) - z^a e^-z / Gamma(a + 1) so only one
        incomplete gamma is needed per (point, component).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        rows = np.arange(self.a.shape[0]) if rows is None else np.asarray(rows)
        weights = np.ones(rows.size) if weights is None else np.asarray(weights, dtype=float)
        half_m = self.dof[rows] / 2.0
        t, scale = self.t[rows], 2.0 * self.beta[rows]
        args = (half_m, self.total[rows], self.tail[rows], self.terms[rows],
                self.lgam0[rows], self.residual[rows], weights)
        out = np.empty(x.size)
        bound = np.empty(x.size)
        step = max(1, _CHUNK_ELEMENTS // rows.size)
        for lo in range(0, x.size, step):
            z = (x[lo:lo + step, None] - t[None, :]) / scale[None, :]
            F0 = np.where(z > 0.0, gammainc(half_m[None, :], np.maximum(z, 0.0)), 0.0)
            out[lo:lo + step], bound[lo:lo + step] = _ruben_sum(z, F0, *args)
        return out, bound


@nb.njit(cache=True)
def _ruben_sum(z, F0, half_m, total, tail, terms, lgam0, residual, weights):
    X, G = z.shape
    out = np.zeros(X)
    bound = np.zeros(X)
    for i in range(X):
        for g in range(G):
            zz = z[i, g]
            if zz <= 0.0:
                continue
            logz = np.log(zz)
            # log of z^(m/2 + n) e^-z / Gamma(m/2 + n + 1), advanced in n
            logt = half_m[g] * logz - zz - lgam0[g]
            s_tail = 0.0
            s_all = 0.0
            for n in range(terms[g]):
                term = np.exp(logt)
                s_tail += term * tail[g, n]
                s_all += term
                logt += logz - np.log(half_m[g] + n + 1.0)
            cdf = min(1.0, max(0.0, total[g] * F0[i, g] - s_tail))
            fn = min(1.0, max(0.0, F0[i, g] - s_all))
            out[i] += weights[g] * cdf
            bound[i] += weights[g] * residual[g] * fn
    return out, bound


def cdf_ruben(g: GenChi2, x, terms: int | None = None, full_output: bool = False):
    """CDF of a positive-definite generalized chi-square by Ruben's series.

    Parameters
    ----------
    g : GenChi2
        Must have every ``w_j > 0``.
    x : float or array_like
    terms : int, optional
        Fixed number of series terms (at least 50). By default terms are added
        until the coefficient mass left out is below 1e-12, up to 4000.
    full_output : bool
        Also return the truncation-error bound.

    Raises
    ------
    MethodInapplicableError
        If some coefficient is negative.
    NumericalFailure
        If the leading coefficient underflows.
    """
    if not g.positive:
        raise MethodInapplicableError("Ruben's series needs all coefficients positive")
    if terms is None:
        # stop once the unused coefficient mass, which bounds the error, is negligible
        series = _RubenSeries([g], _RUBEN_ADAPTIVE_TOL)
    elif terms < 50:
        raise InvalidInputError("terms must be at least 50")
    else:
        series = _RubenSeries([g], 0.0, fixed_terms=terms)
    if not series.ok[0]:
        raise NumericalFailure("leading series coefficient underflows", estimate=0.0)
    p, err = series.evaluate(x)
    if np.ndim(x) == 0:
        p, err = float(p[0]), float(err[0])
    return (p, err) if full_output else p


# ---------------------------------------------------------------- Imhof inversion

class _ImhofGroup:
    """Components sharing (nearly) the same offset, inverted with one integral.

    P(Q <= x) = 1/2 - (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du,

    theta(u) = 1/2 sum_j [k_j atan(w_j u) + lam_j w_j u / (1 + w_j^2 u^2)] - (x - t) u / 2,
    rho(u)   = prod_j (1 + w_j^2 u^2)^(k_j/4) exp(1/2 sum_j lam_j w_j^2 u^2 / (1 + w_j^2 u^2)).

    The oscillatory factor exp(-i (x - t0) u / 2) is split off past a cut point
    so the tail is a Fourier integral handled by QUADPACK's QAWF.
    """

    def __init__(self, components, weights):
        self.W, self.K, self.L, T = _pad(components)
        self.eta = np.asarray(weights, dtype=float)
        self.t0 = float(np.average(T, weights=self.eta))
        self.shift = 0.5 * (self.t0 - T)
        wabs = np.abs(np.where(self.K > 0, self.W, 0.0))
        self.cut = 1.0 / wabs.max()
        self.wscale = np.where(self.K > 0, np.abs(self.W), np.inf).min()

    def _phase_amp(self, u):
        u = np.asarray(u, dtype=float)[..., None, None]
        wu = self.W * u
        q = 1.0 + wu * wu
        phi = 0.5 * np.sum(self.K * np.arctan(wu) + self.L * wu / q, axis=-1)
        log_rho = np.sum(0.25 * self.K * np.log(q) + 0.5 * self.L * wu * wu / q, axis=-1)
        phi = phi - self.shift * u[..., 0]
        return phi, np.exp(-log_rho)

    def _full(self, u, omega):
        phi, amp = self._phase_amp(u)
        return np.sum(self.eta * np.sin(phi - omega * np.asarray(u)[..., None]) * amp, axis=-1) / u

    def _sin_part(self, u):
        phi, amp = self._phase_amp(u)
        return np.sum(self.eta * np.sin(phi) * amp, axis=-1) / u

    def _cos_part(self, u):
        phi, amp = self._phase_amp(u)
        return np.sum(self.eta * np.cos(phi) * amp, axis=-1) / u

    def integral(self, x: float, tol: float) -> tuple[float, float]:
        omega = 0.5 * (x - self.t0)
        eps = 0.25 * np.pi * tol
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            head, e1 = integrate.quad(self._full, 0.0, self.cut, args=(omega,),
                                      epsabs=eps, epsrel=0.0, limit=2000)
            if abs(omega) * self.wscale < 1e-14:
                tail, e2 = integrate.quad(self._sin_part, self.cut, np.inf,
                                          epsabs=eps, epsrel=0.0, limit=2000)
                e3 = 0.0
            else:
                sgn = 1.0 if omega > 0 else -1.0
                c, e2 = integrate.quad(self._sin_part, self.cut, np.inf, weight="cos",
                                       wvar=abs(omega), epsabs=eps, limlst=200, limit=2000)
                s, e3 = integrate.quad(self._cos_part, self.cut, np.inf, weight="sin",
                                       wvar=abs(omega), epsabs=eps, limlst=200, limit=2000)
                tail = c - sgn * s
                if e1 + e2 + e3 > np.pi * tol:
                    # slow oscillation relative to the decay: integrate directly
                    direct, ed = integrate.quad(self._full, self.cut, np.inf, args=(omega,),
                                                epsabs=eps, epsrel=0.0, limit=2000)
                    if ed < e2 + e3:
                        tail, e2, e3 = direct, ed, 0.0
        total = head + tail
        p = 0.5 * self.eta.sum() - total / np.pi
        return p, (e1 + e2 + e3) / np.pi


def _imhof_groups(components, weights):
    ts = np.array([c.t for c in components])
    order = np.argsort(ts, kind="stable")
    groups = []
    start = 0
    for pos in range(1, order.size + 1):
        if pos == order.size or abs(ts[order[pos]] - ts[order[start]]) > 1e-9 * (1.0 + abs(ts[order[start]])):
            idx = order[start:pos]
            groups.append(_ImhofGroup([components[i] for i in idx], np.asarray(weights)[idx]))
            start = pos
    return groups


def cdf_imhof(g: GenChi2, x, tol: float = 1e-9, full_output: bool = False):
    """CDF of a generalized chi-square by characteristic-function inversion.

    Works for coefficients of either sign. Raises :class:`NumericalFailure`
    (carrying the achieved error estimate) when the quadrature error estimate
    exceeds ``tol``.
    """
    if not (0.0 < tol <= 1e-3):
        raise InvalidInputError("tol must lie in (0, 1e-3]")
    group = _ImhofGroup([g], [1.0])
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ps = np.empty(xs.size)
    errs = np.empty(xs.size)
    for i, xi in enumerate(xs):
        p, err = group.integral(float(xi), tol)
        if err > tol:
            raise NumericalFailure(f"inversion integral did not converge at x={xi}", estimate=err)
        ps[i] = min(1.0, max(0.0, p))
        errs[i] = err
    if g.positive:
        ps[xs <= g.t] = 0.0
    if np.ndim(x) == 0:
        return (float(ps[0]), float(errs[0])) if full_output else float(ps[0])
    return (ps, errs) if full_output else ps


# ---------------------------------------------------------------- mixtures

class MixtureCdf:
    """Compiled CDF of a :class:`GenChi2Mixture`.

    Components with all-positive coefficients use Ruben's series when it
    converges within the term cap; the rest are inverted numerically, grouped
    by offset. Component ``g`` gets the error budget ``tol / (G * eta_g)``
    (capped at 1e-3) so the weighted total stays within ``tol``.
    """

    def __init__(self, m: GenChi2Mixture, tol: float = 1e-10):
        if not (0.0 < tol <= 1e-3):
            raise InvalidInputError("tol must lie in (0, 1e-3]")
        self.mixture = m
        self.tol = tol
        comps = m.components
        G = len(comps)
        with np.errstate(over="ignore"):
            budgets = np.minimum(1e-3, tol / (G * m.weights))
        pos = np.array([c.positive for c in comps])
        self._ruben = None
        ruben_rows = np.flatnonzero(pos)
        fallback = list(np.flatnonzero(~pos))
        if ruben_rows.size:
            series = _RubenSeries([comps[i] for i in ruben_rows], budgets[ruben_rows])
            good = series.converged
            self._ruben = series
            self._ruben_rows = np.flatnonzero(good)
            self._ruben_weights = m.weights[ruben_rows[good]]
            fallback.extend(ruben_rows[~good].tolist())
        fallback = sorted(fallback)
        self._imhof = _imhof_groups([comps[i] for i in fallback], m.weights[fallback]) if fallback else []
        self._imhof_positive = bool(np.all(pos[fallback])) if fallback else True
        self._imhof_tmin = min((comps[i].t for i in fallback), default=np.inf)
        self.n_series = 0 if self._ruben is None else int(self._ruben_rows.size)
        self.n_inversion = len(fallback)

    def __call__(self, x, full_output: bool = False):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        p = np.zeros(xs.size)
        err = np.zeros(xs.size)
        if self._ruben is not None and self._ruben_rows.size:
            rp, rerr = self._ruben.evaluate(xs, self._ruben_rows, self._ruben_weights)
            p += rp
            err += rerr
        for group in self._imhof:
            for i, xi in enumerate(xs):
                if self._imhof_positive and xi <= self._imhof_tmin:
                    continue
                gp, gerr = group.integral(float(xi), self.tol / max(1, len(self._imhof)))
                if gerr > self.tol:
                    raise NumericalFailure(
                        f"inversion integral did not converge at x={xi}", estimate=gerr)
                p[i] += gp
                err[i] += gerr
        np.clip(p, 0.0, 1.0, out=p)
        if np.ndim(x) == 0:
            return (float(p[0]), float(err[0])) if full_output else float(p[0])
        return (p, err) if full_output else p

    def support_min(self) -> float:
        if all(c.positive for c in self.mixture.components):
            return min(c.t for c in self.mixture.components)
        return -np.inf


def mixture_cdf(m: GenChi2Mixture, x, tol: float = 1e-10):
    """Weighted sum of component CDFs, ``sum_g eta_g P(Q_g <= x)``."""
    return MixtureCdf(m, tol)(x)


def quantile(m: GenChi2Mixture, p: float, tol: float = 1e-6, cdf: MixtureCdf | None = None) -> float:
    """Point ``x`` with ``|mixture_cdf(x) - p| <= tol``.

    The bracket starts at ``[min_g t_g, mean + 10 sd]``; the upper end is pushed
    out by doubling its distance from the lower end until the CDF exceeds
    ``p``. Brent's method then refines the root.
    """
    if not (0.0 < p < 1.0):
        raise InvalidInputError("p must lie in (0, 1)")
    if cdf is None:
        cdf = MixtureCdf(m, min(1e-10, tol * 1e-3))
    mu = mixture_mean(m)
    sd = np.sqrt(max(mixture_variance(m), 0.0))
    scale = max(sd, abs(mu), 1e-300)

    lo = cdf.support_min()
    if not np.isfinite(lo):
        lo = mu - 10.0 * sd
        for _ in range(60):
            if cdf(lo) < p:
                break
            lo = mu - 2.0 * (mu - lo)
        else:
            raise NumericalFailure("could not bracket the quantile from below")
    hi = max(mu + 10.0 * sd, lo + scale)
    for _ in range(60):
        if cdf(hi) >= p:
            break
        hi = lo + 2.0 * (hi - lo)
    else:
        raise NumericalFailure("could not bracket the quantile from above", estimate=hi)

    def f(x):
        return cdf(x) - p

    flo = f(lo)
    if flo >= 0.0:
        return float(lo)
    x = optimize.brentq(f, lo, hi, xtol=1e-14 * scale, rtol=8.9e-16, maxiter=500)
    gap = abs(f(x))
    if gap > tol:
        raise NumericalFailure(f"quantile search stalled with |F(x) - p| = {gap:.3g}", estimate=gap)
    return float(x)


def sample_mixture(m: GenChi2Mixture, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """Constructive draws: pick a component, then sum_j w_j chi2(k_j, lam_j) + t.

    Each non-central chi-square is built as a sum of ``k_j`` squared normals,
    the first shifted by ``sqrt(lam_j)``.
    """
    if count < 1:
        raise InvalidInputError("count must be at least 1")
    rng = derive_rng(seed, stream)
    idx = rng.choice(len(m.components), size=count, p=m.weights)
    out = np.empty(count)
    for g, comp in enumerate(m.components):
        sel = np.flatnonzero(idx == g)
        if sel.size == 0:
            continue
        coef = np.repeat(comp.w, comp.k)
        shift = np.zeros(coef.size)
        starts = np.concatenate([[0], np.cumsum(comp.k)[:-1]])
        shift[starts] = np.sqrt(comp.lam)
        z = rng.standard_normal((sel.size, coef.size)) + shift
        out[sel] = (z * z) @ coef + comp.t
    return out


def sample(g: GenChi2, count: int, seed: int, stream: int = 0) -> np.ndarray:
    return sample_mixture(GenChi2Mixture.single(g), count, seed, stream)
