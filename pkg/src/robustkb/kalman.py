"""Kalman-Bucy filtering along a discrete observation path.

Conditional mean and variance obey

    dq = alpha * q dt + c * R * (dY - c * q dt),
    dR = (beta + 2*alpha*R - c^2 R^2) dt.

The mean is advanced with explicit Euler-Maruyama (it is driven by the
observation increments), while the deterministic, smooth Riccati equation
for R takes a classical 4th-order step; mixing orders is deliberate.  For
constant coefficients the Riccati equation has the closed-form solution
implemented in :func:`riccati_closed_form`, used throughout the tests as an
accuracy oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, NumericalError
from .model import Gain, ModelParameters, ReferenceParameters, as_gain
from .simulate import SamplePath


@dataclass(frozen=True)
class FilterTrajectory:
    dt: float
    times: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.q) == len(self.r)):
            raise ValueError("filter arrays must share one grid")


def _riccati_rhs(r, alpha, beta, c):
    return beta + 2.0 * alpha * r - c * c * r * r


def run_filter(params: Union[ModelParameters, ReferenceParameters],
               path: SamplePath,
               gain: Union[float, Gain, None] = None) -> FilterTrajectory:
    """Integrate (q, R) along the path.

    ``params`` may be the true ModelParameters (whose own gain is used) or
    ReferenceParameters, in which case the known observation gain must be
    passed explicitly.  Raises NumericalError if R ever becomes non-positive,
    which indicates the step size is too large for the Riccati update.
    """
    if isinstance(params, ModelParameters):
        alpha, beta = params.alpha, params.beta
        g = params.gain() if gain is None else as_gain(gain)
        q0, r0 = params.mu0, params.sigma0**2
    else:
        if gain is None:
            raise ConfigError("run_filter: ReferenceParameters require an explicit gain")
        alpha, beta = params.alpha_star, params.beta_star
        g = as_gain(gain)
        q0, r0 = params.mu0_star, params.sigma0_star**2

    dt = path.dt
    n = len(path.times) - 1
    q = np.empty(n + 1)
    r = np.empty(n + 1)
    q[0], r[0] = q0, r0
    dy = np.diff(path.y)
    for i in range(n):
        t = path.times[i]
        ci = g.at(t)
        q[i + 1] = q[i] + alpha * q[i] * dt + ci * r[i] * (dy[i] - ci * q[i] * dt)
        k1 = _riccati_rhs(r[i], alpha, beta, ci)
        c_mid = g.at(t + 0.5 * dt)
        k2 = _riccati_rhs(r[i] + 0.5 * dt * k1, alpha, beta, c_mid)
        k3 = _riccati_rhs(r[i] + 0.5 * dt * k2, alpha, beta, c_mid)
        k4 = _riccati_rhs(r[i] + dt * k3, alpha, beta, g.at(t + dt))
        r[i + 1] = r[i] + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if r[i + 1] <= 0.0:
            raise NumericalError(
                f"run_filter: conditional variance became non-positive at t={t + dt:g}; "
                "reduce dt")
    return FilterTrajectory(dt=dt, times=path.times.copy(), q=q, r=r)


def riccati_closed_form(alpha: float, beta: float, c: float, r0: float, t):
    """Exact solution of dR/dt = beta + 2*alpha*R - c^2 R^2, R(0) = r0 > 0.

    For c != 0 the equation factors through its equilibrium roots
    R_pm = (alpha +- sqrt(alpha^2 + beta c^2)) / c^2 and the solution is a
    rational interpolation driven by exp(-2*sqrt(alpha^2 + beta c^2) t);
    for c = 0 the equation is linear.  Accepts scalar or ndarray t >= 0.
    """
    if r0 <= 0:
        raise ConfigError("riccati_closed_form: r0 must be > 0")
    t = np.asarray(t, dtype=float)
    if c == 0.0:
        if alpha == 0.0:
            out = r0 + beta * t
        else:
            out = (r0 + beta / (2.0 * alpha)) * np.exp(2.0 * alpha * t) - beta / (2.0 * alpha)
    else:
        disc = math.sqrt(alpha * alpha + beta * c * c)
        if disc == 0.0:
            out = r0 / (1.0 + c * c * r0 * t)
        else:
            rp = (alpha + disc) / (c * c)
            rm = (alpha - disc) / (c * c)
            if r0 == rm:
                out = np.full_like(t, rm)
            else:
                u = (r0 - rp) / (r0 - rm) * np.exp(-2.0 * disc * t)
                out = (rp - rm * u) / (1.0 - u)
    return float(out) if out.ndim == 0 else out
