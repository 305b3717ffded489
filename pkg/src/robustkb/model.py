"""Model parameters and penalty functions.

The signal/observation pair is

    dX = alpha * X dt + sqrt(beta) dB,      X_0 ~ N(mu0, sigma0^2),
    dY = c * X dt + dW,                     Y_0 = 0,

with alpha, beta unknown and the observation gain c known (constant or
piecewise-constant in time).  Plausibility of a parameter choice is scored
by a quadratic running cost on (a, b) around the reference parameters and a
quadratic initial cost on the natural-parameter point z = (mu/s2, 1/s2):

    running_cost(a, b) = c_alpha * (a - alpha*)^2 + c_beta * (b - beta*)^2
    initial_cost(z)    = w1 * (z1 - x1*)^2 + w2 * (z2 - x2*)^2   if z2 > 0
                       = +inf                                     otherwise

where x1* = mu0*/sigma0*^2 and x2* = 1/sigma0*^2.  Infinity saturates
through arithmetic (any sum containing it is infinite), which is exactly
what IEEE ``inf`` does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError

INFINITE_COST = math.inf


@dataclass(frozen=True)
class Gain:
    """Observation gain c(t), piecewise-constant on [breaks[k], breaks[k+1]).

    ``breaks`` must start at 0 and be strictly increasing; ``values[k]`` is
    the gain on the k-th interval, the last one extending to +inf.
    """

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breaks) != len(self.values) or not self.breaks:
            raise ConfigError("gain: breaks and values must have equal, nonzero length")
        if self.breaks[0] != 0.0:
            raise ConfigError("gain: first break must be 0")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ConfigError("gain: breaks must be strictly increasing")
        if any(not math.isfinite(v) for v in self.values):
            raise ConfigError("gain: values must be finite")

    @staticmethod
    def constant(value: float) -> "Gain":
        return Gain((0.0,), (float(value),))

    def at(self, t):
        """Evaluate the gain at time(s) t (scalar or ndarray)."""
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        out = np.asarray(self.values)[idx]
        return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out

    def max_abs(self) -> float:
        return max(abs(v) for v in self.values)


def as_gain(c: Union[float, Gain]) -> Gain:
    return c if isinstance(c, Gain) else Gain.constant(float(c))


@dataclass(frozen=True)
class ModelParameters:
    """True SDE coefficients: drift alpha, diffusion variance rate beta,
    observation gain c, initial mean/stddev mu0, sigma0."""

    alpha: float
    beta: float
    c: Union[float, Gain]
    mu0: float
    sigma0: float

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("model.beta: must be >= 0")
        if self.sigma0 <= 0:
            raise ConfigError("model.sigma0: must be > 0")
        as_gain(self.c)  # validates

    def gain(self) -> Gain:
        return as_gain(self.c)


@dataclass(frozen=True)
class ReferenceParameters:
    """Estimated (reference) coefficients; observation gain is shared with
    ModelParameters because it is assumed known."""

    alpha_star: float
    beta_star: float
    mu0_star: float
    sigma0_star: float

    def __post_init__(self):
        if self.beta_star < 0:
            raise ConfigError("reference.beta_star: must be >= 0")
        if self.sigma0_star <= 0:
            raise ConfigError("reference.sigma0_star: must be > 0")

    def reference_state(self) -> tuple[float, float]:
        """Natural-parameter point (x1*, x2*) of the reference prior."""
        s2 = self.sigma0_star**2
        return self.mu0_star / s2, 1.0 / s2


@dataclass(frozen=True)
class PenaltyConfig:
    """Quadratic penalty weights plus the uncertainty-aversion scalars.

    k1 scales the accumulated cost and k2 is the exponent applied to it when
    the penalty enters an expectation; the quadratic weights give the
    coercivity exponent p = 2 automatically.
    """

    c_alpha: float
    c_beta: float
    w1: float
    w2: float
    k1: float
    k2: float

    def __post_init__(self):
        if self.c_alpha <= 0:
            raise ConfigError("penalty.c_alpha: must be > 0")
        if self.c_beta <= 0:
            raise ConfigError("penalty.c_beta: must be > 0")
        if self.w1 < 0:
            raise ConfigError("penalty.w1: must be >= 0")
        if self.w2 < 0:
            raise ConfigError("penalty.w2: must be >= 0")
        if self.k1 <= 0:
            raise ConfigError("penalty.k1: must be > 0")
        if self.k2 < 1:
            raise ConfigError("penalty.k2: must be >= 1")


def running_cost(t, a, b, cfg: PenaltyConfig, ref: ReferenceParameters):
    """Running cost rate gamma(t, a, b); zero exactly at the reference pair.

    Accepts scalars or ndarrays for a and b; t is accepted for signature
    stability but the quadratic family is time-independent.
    """
    return cfg.c_alpha * (a - ref.alpha_star) ** 2 + cfg.c_beta * (b - ref.beta_star) ** 2


def initial_cost(z, cfg: PenaltyConfig, ref: ReferenceParameters):
    """Initial cost v0 at z = (z1, z2); +inf on the closed half-plane z2 <= 0.

    z may be a pair of scalars or a pair of broadcastable ndarrays.
    """
    z1, z2 = z
    x1s, x2s = ref.reference_state()
    quad = cfg.w1 * (np.asarray(z1) - x1s) ** 2 + cfg.w2 * (np.asarray(z2) - x2s) ** 2
    out = np.where(np.asarray(z2) > 0, quad, INFINITE_COST)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Payoff functionals phi.  A small tagged family; `Negated` exists so that
# lower expectations can negate symbolically.

@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Square:
    pass


@dataclass(frozen=True)
class CallPayoff:
    strike: float


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear payoff from sorted sample points; constant beyond
    the sampled range."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or len(self.xs) < 2:
            raise ConfigError("tabulated: need >= 2 matching sample points")
        if any(not math.isfinite(v) for v in self.xs + self.ys):
            raise ConfigError("tabulated: samples must be finite")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ConfigError("tabulated: abscissae must be strictly increasing")


@dataclass(frozen=True)
class Negated:
    inner: "Functional"


Functional = Union[Identity, Square, CallPayoff, Constant, Tabulated, Negated]


def negate(phi: Functional) -> Functional:
    if isinstance(phi, Negated):
        return phi.inner
    if isinstance(phi, Constant):
        return Constant(-phi.value)
    return Negated(phi)


def evaluate(phi: Functional, x):
    """Pointwise evaluation of phi; x may be scalar or ndarray."""
    if isinstance(phi, Identity):
        return np.asarray(x) + 0.0 if not np.isscalar(x) else float(x)
    if isinstance(phi, Square):
        return np.asarray(x) ** 2 if not np.isscalar(x) else float(x) ** 2
    if isinstance(phi, CallPayoff):
        return np.maximum(np.asarray(x) - phi.strike, 0.0)
    if isinstance(phi, Constant):
        return np.full_like(np.asarray(x, dtype=float), phi.value) if not np.isscalar(x) else phi.value
    if isinstance(phi, Tabulated):
        return np.interp(x, phi.xs, phi.ys)
    if isinstance(phi, Negated):
        return -evaluate(phi.inner, x)
    raise TypeError(f"unknown functional {phi!r}")


def functional_slug(phi: Functional) -> str:
    """Stable short name used in CSV columns and SVG file names."""
    if isinstance(phi, Identity):
        return "identity"
    if isinstance(phi, Square):
        return "square"
    if isinstance(phi, CallPayoff):
        return f"call_{phi.strike:g}"
    if isinstance(phi, Constant):
        return f"const_{phi.value:g}"
    if isinstance(phi, Tabulated):
        return "tabulated"
    if isinstance(phi, Negated):
        return "neg_" + functional_slug(phi.inner)
    raise TypeError(f"unknown functional {phi!r}")
