"""Change of variables to the natural-parameter frame and its dynamics.

The filter state (q, R) maps to w = (q/R - eta, 1/R), which turns the
mean SDE into a pathwise ODE dw/ds = f(w, s, a, b) with

    f(z, t, a, b) = ( -(z1 + eta_t)(a + b z2),  -b z2^2 - 2 a z2 + c_t^2 )

on the half-plane U = {z2 > 0}, extended continuously to z2 <= 0 by

    f(z, t, a, b) = ( -(z1 + eta_t) a,  c_t^2 ).

The reference filter's image w*(t) = (q*/R* - eta, 1/R*) is the moving
frame that centres the PDE grid; it is carried per time node together with
eta and c, and linearly interpolated to solver substeps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigError
from .kalman import run_filter
from .model import Gain, ReferenceParameters, as_gain
from .simulate import SamplePath


@dataclass(frozen=True)
class StateVector:
    """Point in frame coordinates; z2 <= 0 encodes having left U."""

    z1: float
    z2: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.z1, self.z2)


class FrameNode(NamedTuple):
    w1: float
    w2: float
    eta: float
    c: float


@dataclass(frozen=True)
class FrameTrajectory:
    """Reference-frame path data on a uniform time grid."""

    dt: float
    times: np.ndarray
    wstar1: np.ndarray
    wstar2: np.ndarray
    eta: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.wstar1) == len(self.wstar2) == len(self.eta) == len(self.c) == n):
            raise ValueError("frame arrays must share one grid")
        if np.any(self.wstar2 <= 0):
            raise ValueError("frame: wstar2 must stay positive")

    def eta_at(self, t):
        return np.interp(t, self.times, self.eta)

    def c_at(self, t):
        return np.interp(t, self.times, self.c)

    def wstar_at(self, t) -> tuple[float, float]:
        return (float(np.interp(t, self.times, self.wstar1)),
                float(np.interp(t, self.times, self.wstar2)))

    def node_at(self, t) -> FrameNode:
        w1, w2 = self.wstar_at(t)
        return FrameNode(w1, w2, float(self.eta_at(t)), float(self.c_at(t)))

    def bounds(self) -> tuple[float, float]:
        """(max |eta|, max |c|) over the carried grid, for growth estimates."""
        return float(np.max(np.abs(self.eta))), float(np.max(np.abs(self.c)))


def dynamics_f_arrays(z1, z2, a, b, eta_t, c_t):
    """Vectorized frame dynamics; broadcasts over any mix of array inputs."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    on_u = z2 > 0
    f1 = np.where(on_u, -(z1 + eta_t) * (a + b * z2), -(z1 + eta_t) * np.asarray(a))
    f2 = np.where(on_u, -b * z2**2 - 2.0 * np.asarray(a) * z2 + c_t**2,
                  np.asarray(c_t, dtype=float) ** 2)
    return f1, f2


def dynamics_f(z: Union[StateVector, tuple], t: float, a: float, b: float,
               eta_t: float, c_t: float) -> StateVector:
    """Frame dynamics at a single point; continuous across the seam z2 = 0."""
    if b < 0:
        raise ValueError("dynamics_f: b must be >= 0")
    z1, z2 = (z.z1, z.z2) if isinstance(z, StateVector) else (z[0], z[1])
    if z2 > 0:
        return StateVector(-(z1 + eta_t) * (a + b * z2),
                           -b * z2 * z2 - 2.0 * a * z2 + c_t * c_t)
    return StateVector(-(z1 + eta_t) * a, c_t * c_t)


def to_state(mu: float, sigma2: float, eta_t: float) -> StateVector:
    if sigma2 <= 0:
        raise ConfigError("to_state: sigma2 must be > 0")
    return StateVector(mu / sigma2 - eta_t, 1.0 / sigma2)


def from_state(x: Union[StateVector, tuple], eta_t: float) -> tuple[float, float]:
    z1, z2 = (x.z1, x.z2) if isinstance(x, StateVector) else (x[0], x[1])
    if z2 <= 0:
        raise ConfigError("from_state: precision coordinate must be > 0")
    sigma2 = 1.0 / z2
    return sigma2 * (z1 + eta_t), sigma2


def reference_frame(ref: ReferenceParameters, path: SamplePath,
                    gain: Union[float, Gain]) -> FrameTrajectory:
    """Run the reference filter along the path and map it into the frame."""
    g = as_gain(gain)
    filt = run_filter(ref, path, gain=g)
    wstar1 = filt.q / filt.r - path.eta
    wstar2 = 1.0 / filt.r
    return FrameTrajectory(dt=path.dt, times=path.times.copy(),
                           wstar1=wstar1, wstar2=wstar2,
                           eta=path.eta.copy(), c=np.asarray(g.at(path.times), dtype=float))


# ---------------------------------------------------------------------------
# Growth estimates.  Along any trajectory of the (extended) dynamics,
#   d/ds log(1 + |w|^2) <= C (1 + |a| + b)
# with C depending only on bounds for |eta| and |c|: the cubic terms carry a
# sign and drop out on U, and the extension is linear in w.  Keeping track of
# this constant lets tests assert that backward trajectories can shrink only
# at finite speed.

def log_growth_constant(eta_bound: float, c_bound: float) -> float:
    return 4.0 + eta_bound + c_bound**2


def log_growth_margin(w_start, w_end, control_integral: float, constant: float) -> float:
    """Slack in  log(1+|w_end|^2) <= log(1+|w_start|^2) + C * integral.

    ``control_integral`` is int (1 + |a| + b) ds over the forward-time span
    from w_start to w_end.  Nonnegative margin means the bound holds.
    """
    s1 = float(np.log1p(w_start[0]**2 + w_start[1]**2))
    e1 = float(np.log1p(w_end[0]**2 + w_end[1]**2))
    return s1 + constant * control_integral - e1


def dynamics_growth_bound(z, a: float, b: float, eta_bound: float, c_bound: float) -> float:
    """Pointwise bound L*(1 + |a| + |a||z| + b|z| + b|z|^2) valid for |f|."""
    L = max(3.0, eta_bound, c_bound**2)
    zn = float(np.hypot(z[0], z[1]))
    return L * (1.0 + abs(a) + abs(a) * zn + b * zn + b * zn * zn)
