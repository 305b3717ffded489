"""Robust expectations of Gaussian functionals via the penalty field.

Given the solved penalty kappa_t (a LambdaField), the upper expectation of a
payoff phi(X_t) is

    sup over candidates (mu, sigma^2) of  E_{N(mu, sigma^2)}[phi] - (kappa / k1)^k2,

the lower expectation is -upper(-phi), and the minimax point estimate
minimizes the upper expectation of the squared error.  Candidates are the
grid nodes with finite penalty, sharpened by one coordinate-wise
golden-section pass inside the best node's cell; kappa is only known on the
grid, so optimizing further afield would add error, not accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, NumericalError
from .hjb import LambdaField, bilinear, lambda_to_value
from .model import (CallPayoff, Constant, Functional, Identity, Negated,
                    PenaltyConfig, Square, Tabulated, evaluate, negate)

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianCandidate:
    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ConfigError("GaussianCandidate: sigma2 must be > 0")


@lru_cache(maxsize=4)
def _hermgauss(n: int = 64):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


@lru_cache(maxsize=4)
def _leggauss(n: int = 64):
    return np.polynomial.legendre.leggauss(n)


def _norm_pdf(d):
    return np.exp(-0.5 * np.asarray(d) ** 2) * _INV_SQRT2PI


def _call_mean(mu, sigma, strike):
    d = (mu - strike) / sigma
    return (mu - strike) * ndtr(d) + sigma * _norm_pdf(d)


def _mean_array(phi: Functional, mu, sigma2):
    """E[phi(X)] for X ~ N(mu, sigma2); broadcasts over arrays."""
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if isinstance(phi, Identity):
        return mu + 0.0
    if isinstance(phi, Square):
        return mu**2 + sigma2
    if isinstance(phi, Constant):
        return np.full(np.broadcast(mu, sigma2).shape, phi.value) if mu.ndim or sigma2.ndim \
            else phi.value
    if isinstance(phi, CallPayoff):
        return _call_mean(mu, np.sqrt(sigma2), phi.strike)
    if isinstance(phi, Tabulated):
        x, w = _hermgauss()
        pts = mu[..., None] + _SQRT2 * np.sqrt(sigma2)[..., None] * x
        return np.interp(pts, phi.xs, phi.ys) @ w
    if isinstance(phi, Negated):
        return -_mean_array(phi.inner, mu, sigma2)
    raise TypeError(f"unknown functional {phi!r}")


def gaussian_functional(phi: Functional, cand: GaussianCandidate) -> float:
    """E[phi(X)] under the candidate, by closed form (Tabulated uses 64-node
    Gauss-Hermite; beyond its sample range the payoff extends as a constant)."""
    return float(_mean_array(phi, cand.mu, cand.sigma2))


def gaussian_functional_quadrature(phi: Functional, cand: GaussianCandidate,
                                   n: int = 64) -> float:
    """Quadrature evaluation of E[phi(X)], independent of the closed forms.

    Smooth payoffs integrate with n-node Gauss-Hermite.  The call payoff has
    a kink, which Gauss-Hermite resolves only to ~1e-3, so it is integrated
    with Gauss-Legendre on [K, mu + 12 sigma] where the integrand is analytic.
    """
    mu, sigma2 = cand.mu, cand.sigma2
    sigma = math.sqrt(sigma2)
    if isinstance(phi, Negated):
        return -gaussian_functional_quadrature(phi.inner, cand, n)
    if isinstance(phi, CallPayoff):
        hi = mu + 12.0 * sigma
        if hi <= phi.strike:
            return 0.0
        xl, wl = _leggauss(n)
        half = 0.5 * (hi - phi.strike)
        u = half * xl + 0.5 * (hi + phi.strike)
        dens = _norm_pdf((u - mu) / sigma) / sigma
        return float(half * (wl @ ((u - phi.strike) * dens)))
    x, w = _hermgauss(n)
    return float(w @ evaluate(phi, mu + _SQRT2 * sigma * x))


def payoff_moments(phi: Functional, mu, sigma2):
    """First and second moments (m1, m2) of phi(X); closed forms exist for
    Identity, CallPayoff and Constant, which is what the minimax estimator
    supports."""
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if isinstance(phi, Identity):
        return mu + 0.0, mu**2 + sigma2
    if isinstance(phi, Constant):
        shape = np.broadcast(mu, sigma2).shape
        return np.full(shape, phi.value), np.full(shape, phi.value**2)
    if isinstance(phi, CallPayoff):
        sigma = np.sqrt(sigma2)
        d = (mu - phi.strike) / sigma
        cdf = ndtr(d)
        pdf = _norm_pdf(d)
        m1 = (mu - phi.strike) * cdf + sigma * pdf
        m2 = ((mu - phi.strike) ** 2 + sigma2) * cdf + (mu - phi.strike) * sigma * pdf
        return m1, m2
    raise ConfigError(f"minimax estimate: no second-moment form for "
                      f"{type(phi).__name__}; supported: Identity, CallPayoff, Constant")


def golden_section_min(f, lo: float, hi: float, tol: float = 1.0e-6,
                       max_iter: int = 200) -> tuple[float, float]:
    """Golden-section minimum of a unimodal f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def _candidate_grid(field: LambdaField, t: float, eta_t: float, cfg: PenaltyConfig):
    """Grid candidates at time t: (mu, sigma2, penalty term) flat arrays over
    the nodes with finite kappa, plus their flat indices and slice context."""
    lam, (w1, w2), _ = field.slice_at(t)
    spec = field.spec
    z1 = w1 + spec.zeta1()[:, None]
    z2 = w2 + spec.zeta2()[None, :]
    valid = (z2 > 0) & (lam < -spec.lambda_floor)
    if not valid.any():
        raise NumericalError("expectation: every grid node has infinite penalty")
    flat_idx = np.flatnonzero(valid)
    kap = -1.0 - 1.0 / lam[valid]
    sigma2 = 1.0 / np.broadcast_to(z2, lam.shape)[valid]
    mu = sigma2 * np.broadcast_to(z1 + eta_t, lam.shape)[valid]
    pen = (kap / cfg.k1) ** cfg.k2
    return mu, sigma2, pen, flat_idx, lam, (w1, w2)


def _refine(phi: Functional, field: LambdaField, eta_t: float, cfg: PenaltyConfig,
            lam: np.ndarray, wstar: tuple[float, float], i: int, j: int) -> float:
    """One coordinate-wise golden-section pass within one cell of node (i, j)."""
    spec = field.spec
    zeta1 = spec.zeta1()
    zeta2 = spec.zeta2()
    w1, w2 = wstar

    def objective(c1: float, c2: float) -> float:
        z2 = w2 + c2
        if z2 <= 0:
            return -math.inf
        lam_val = bilinear(lam, c1, c2, spec)
        if math.isnan(lam_val) or lam_val >= -spec.lambda_floor:
            return -math.inf
        kap = lambda_to_value(lam_val, spec.lambda_floor)
        sigma2 = 1.0 / z2
        mu = sigma2 * (w1 + c1 + eta_t)
        return float(_mean_array(phi, mu, sigma2)) - (kap / cfg.k1) ** cfg.k2

    c1, c2 = zeta1[i], zeta2[j]
    lo1 = max(c1 - spec.h1, -spec.z1_half)
    hi1 = min(c1 + spec.h1, spec.z1_half)
    c1, neg = golden_section_min(lambda u: -objective(u, c2), lo1, hi1, tol=1e-6)
    lo2 = max(c2 - spec.h2, -spec.z2_half)
    hi2 = min(c2 + spec.h2, spec.z2_half)
    c2, neg = golden_section_min(lambda u: -objective(c1, u), lo2, hi2, tol=1e-6)
    return -neg


def upper_expectation(phi: Functional, t: float, field: LambdaField,
                      eta_t: float, cfg: PenaltyConfig) -> float:
    """sup over candidates of E[phi] - (kappa/k1)^k2."""
    mu, sigma2, pen, flat_idx, lam, wstar = _candidate_grid(field, t, eta_t, cfg)
    obj = _mean_array(phi, mu, sigma2) - pen
    best = int(np.argmax(obj))
    best_val = float(obj[best])
    i, j = divmod(int(flat_idx[best]), field.spec.n2)
    refined = _refine(phi, field, eta_t, cfg, lam, wstar, i, j)
    return max(best_val, refined)


def lower_expectation(phi: Functional, t: float, field: LambdaField,
                      eta_t: float, cfg: PenaltyConfig) -> float:
    """-upper(-phi); the negation is symbolic for the built-in payoffs."""
    return -upper_expectation(negate(phi), t, field, eta_t, cfg)


def minimax_estimate(phi: Functional, t: float, field: LambdaField,
                     eta_t: float, cfg: PenaltyConfig) -> float:
    """argmin over xi of the upper expectation of (phi(X_t) - xi)^2.

    The objective is a pointwise maximum of unit parabolas in xi, hence
    convex; golden-section search on [lower - 1, upper + 1] to 1e-4.
    """
    mu, sigma2, pen, _, _, _ = _candidate_grid(field, t, eta_t, cfg)
    m1, m2 = payoff_moments(phi, mu, sigma2)
    base = m2 - pen

    def g(xi: float) -> float:
        return xi * xi + float(np.max(base - 2.0 * xi * m1))

    lo = lower_expectation(phi, t, field, eta_t, cfg) - 1.0
    hi = upper_expectation(phi, t, field, eta_t, cfg) + 1.0
    xi_hat, _ = golden_section_min(g, lo, hi, tol=1.0e-4)
    return xi_hat
