"""Euler-Maruyama simulation of the signal/observation pair.

Left-point evaluation everywhere, matching the Ito convention used for the
integrated observation eta_t = int_0^t c_s dY_s.  The signal and observation
noises are independent streams spawned deterministically from one seed, and
X_0 consumes the first draw of the signal stream, so a run is reproducible
from (params, dt, T, seed) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import Gain, ModelParameters, as_gain


@dataclass(frozen=True)
class SamplePath:
    dt: float
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    seed: int

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.x) == len(self.y) == len(self.eta) == n):
            raise ValueError("sample path arrays must share one grid")
        if self.y[0] != 0.0 or self.eta[0] != 0.0:
            raise ValueError("Y and eta must start at 0")


def simulate_paths(params: ModelParameters, dt: float, T: float, seed: int) -> SamplePath:
    """Simulate X, Y and eta on the uniform grid t_i = i*dt, i = 0..N."""
    if dt <= 0:
        raise ConfigError("simulate.dt: must be > 0")
    if T < dt:
        raise ConfigError("simulate.T: must be >= dt")
    n = int(round(T / dt))
    times = np.arange(n + 1) * dt

    seq_b, seq_w = np.random.SeedSequence(seed).spawn(2)
    rng_b = np.random.default_rng(seq_b)
    rng_w = np.random.default_rng(seq_w)

    gain = params.gain()
    c_left = gain.at(times[:-1])

    x = np.empty(n + 1)
    y = np.empty(n + 1)
    x[0] = params.mu0 + params.sigma0 * rng_b.standard_normal()
    y[0] = 0.0
    sq_bdt = math.sqrt(params.beta * dt)
    sq_dt = math.sqrt(dt)
    xi = rng_b.standard_normal(n)
    zeta = rng_w.standard_normal(n)
    for i in range(n):
        x[i + 1] = x[i] + params.alpha * x[i] * dt + sq_bdt * xi[i]
        y[i + 1] = y[i] + c_left[i] * x[i] * dt + sq_dt * zeta[i]

    path = SamplePath(dt=dt, times=times, x=x, y=y, eta=np.zeros(n + 1), seed=seed)
    return SamplePath(dt=dt, times=times, x=x, y=y, eta=eta_path(path, gain), seed=seed)


def eta_path(path: SamplePath, c) -> np.ndarray:
    """Left-point Ito sum eta_{i+1} = eta_i + c(t_i) * (Y_{i+1} - Y_i)."""
    gain = as_gain(c) if not isinstance(c, Gain) else c
    c_left = gain.at(path.times[:-1])
    eta = np.empty_like(path.y)
    eta[0] = 0.0
    np.cumsum(c_left * np.diff(path.y), out=eta[1:])
    return eta
