"""Brute-force verification of the control-problem value function.

The value v(x, t) is the infimum over controls (a, b) of the running cost
plus the initial cost at the backward-integrated state

    dw/ds = f(w, s, a, b),   w(t) = x,   cost = int_0^t gamma + v0(w(0)).

This module approximates that infimum by exhaustively enumerating
piecewise-constant control schedules on a small grid and integrating each
trajectory backward with a 4th-order one-step method.  Trajectories whose
norm exceeds a cap are treated as having infinite cost, as are those whose
initial point leaves U.  Deliberately slow and simple: it exists to check
the PDE solver, never to replace it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .frame import (FrameTrajectory, StateVector, dynamics_f_arrays,
                    log_growth_constant)
from .model import PenaltyConfig, ReferenceParameters, initial_cost, running_cost

BLOWUP_CAP = 1.0e6
MAX_SEGMENTS = 4
MAX_CONTROL_GRID = 7


@dataclass(frozen=True)
class ControlPair:
    a: float
    b: float

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("ControlPair: b must be >= 0")


@dataclass(frozen=True)
class BackwardResult:
    w0: Optional[StateVector]        # state at s = 0; None if blown up
    blew_up: bool
    exit_time: Optional[float]       # first s (scanning backward) with w2 <= 0
    blowup_time: Optional[float]     # s at which |w| first exceeded the cap
    trail: Optional[np.ndarray]      # (k, 3) rows (s, w1, w2) when recorded


def _f_scalar(w1, w2, s, a, b, frame: FrameTrajectory):
    eta = float(frame.eta_at(s))
    c = float(frame.c_at(s))
    if w2 > 0:
        return -(w1 + eta) * (a + b * w2), -b * w2 * w2 - 2.0 * a * w2 + c * c
    return -(w1 + eta) * a, c * c


def integrate_trajectory_backward(x, t: float, controls: Sequence[ControlPair],
                                  frame: FrameTrajectory,
                                  substeps_per_segment: int = 64,
                                  cap: float = BLOWUP_CAP,
                                  record: bool = False) -> BackwardResult:
    """Integrate w backward from w(t) = x to s = 0 under a piecewise-constant
    schedule (controls[k] on the k-th of len(controls) equal segments of [0, t]).
    Blow-up is a result, not an error.
    """
    if t <= 0:
        raise ValueError("integrate_trajectory_backward: t must be > 0")
    if not controls:
        raise ValueError("integrate_trajectory_backward: empty schedule")
    n_seg = len(controls)
    seg_len = t / n_seg
    w1, w2 = (x.z1, x.z2) if isinstance(x, StateVector) else (float(x[0]), float(x[1]))

    trail = [(t, w1, w2)] if record else None
    exit_time = None if w2 > 0 else t
    h = -seg_len / substeps_per_segment
    s = t
    for k in range(n_seg - 1, -1, -1):
        a, b = controls[k].a, controls[k].b
        for _ in range(substeps_per_segment):
            k11, k12 = _f_scalar(w1, w2, s, a, b, frame)
            k21, k22 = _f_scalar(w1 + 0.5 * h * k11, w2 + 0.5 * h * k12, s + 0.5 * h, a, b, frame)
            k31, k32 = _f_scalar(w1 + 0.5 * h * k21, w2 + 0.5 * h * k22, s + 0.5 * h, a, b, frame)
            k41, k42 = _f_scalar(w1 + h * k31, w2 + h * k32, s + h, a, b, frame)
            nw1 = w1 + h * (k11 + 2 * k21 + 2 * k31 + k41) / 6.0
            nw2 = w2 + h * (k12 + 2 * k22 + 2 * k32 + k42) / 6.0
            ns = s + h
            if not (math.isfinite(nw1) and math.isfinite(nw2)) or math.hypot(nw1, nw2) > cap:
                return BackwardResult(None, True, exit_time, ns,
                                      np.array(trail) if record else None)
            if exit_time is None and nw2 <= 0.0 < w2:
                exit_time = s + h * (w2 / (w2 - nw2))
            w1, w2, s = nw1, nw2, ns
            if record:
                trail.append((s, w1, w2))
    return BackwardResult(StateVector(w1, w2), False, exit_time, None,
                          np.array(trail) if record else None)


def brute_force_value(x, t: float, a_values: Sequence[float], b_values: Sequence[float],
                      segments: int, frame: FrameTrajectory, cfg: PenaltyConfig,
                      ref: ReferenceParameters, substeps_per_segment: int = 64,
                      cap: float = BLOWUP_CAP) -> float:
    """Minimum cost over all piecewise-constant schedules on the control grid.

    Enumerates (len(a_values)*len(b_values))**segments schedules and integrates
    them all backward in one vectorized sweep.  Guarded against combinatorial
    explosion; refusal is a ValueError, not an approximation.
    """
    if segments < 1 or segments > MAX_SEGMENTS:
        raise ValueError(f"brute_force_value: segments must be in 1..{MAX_SEGMENTS}")
    if len(a_values) > MAX_CONTROL_GRID or len(b_values) > MAX_CONTROL_GRID:
        raise ValueError(f"brute_force_value: control grid larger than "
                         f"{MAX_CONTROL_GRID}x{MAX_CONTROL_GRID}")
    if any(b < 0 for b in b_values):
        raise ValueError("brute_force_value: b_values must be >= 0")
    if t <= 0:
        raise ValueError("brute_force_value: t must be > 0")

    pairs = [(float(a), float(b)) for a in a_values for b in b_values]
    schedules = np.array(list(itertools.product(pairs, repeat=segments)))  # (M, K, 2)
    a_sched = schedules[:, :, 0]
    b_sched = schedules[:, :, 1]
    m = len(schedules)
    seg_len = t / segments

    x1, x2 = (x.z1, x.z2) if isinstance(x, StateVector) else (float(x[0]), float(x[1]))
    w1 = np.full(m, x1)
    w2 = np.full(m, x2)
    alive = np.ones(m, dtype=bool)
    h = -seg_len / substeps_per_segment
    s = t
    for k in range(segments - 1, -1, -1):
        a = a_sched[:, k]
        b = b_sched[:, k]
        for _ in range(substeps_per_segment):
            k11, k12 = dynamics_f_arrays(w1, w2, a, b, frame.eta_at(s), frame.c_at(s))
            sm = s + 0.5 * h
            em, cm = frame.eta_at(sm), frame.c_at(sm)
            k21, k22 = dynamics_f_arrays(w1 + 0.5 * h * k11, w2 + 0.5 * h * k12, a, b, em, cm)
            k31, k32 = dynamics_f_arrays(w1 + 0.5 * h * k21, w2 + 0.5 * h * k22, a, b, em, cm)
            se = s + h
            k41, k42 = dynamics_f_arrays(w1 + h * k31, w2 + h * k32, a, b,
                                         frame.eta_at(se), frame.c_at(se))
            n1 = w1 + h * (k11 + 2 * k21 + 2 * k31 + k41) / 6.0
            n2 = w2 + h * (k12 + 2 * k22 + 2 * k32 + k42) / 6.0
            with np.errstate(invalid="ignore", over="ignore"):
                dead = ~(np.isfinite(n1) & np.isfinite(n2)) | (np.hypot(n1, n2) > cap)
            newly_dead = alive & dead
            alive &= ~dead
            w1 = np.where(alive, n1, w1)
            w2 = np.where(alive, n2, w2)
            w1[newly_dead] = np.nan
            w2[newly_dead] = np.nan
            s = se

    run_cost = seg_len * running_cost(0.0, a_sched, b_sched, cfg, ref).sum(axis=1)
    v0 = np.where(alive, initial_cost((np.where(alive, w1, 0.0),
                                       np.where(alive, w2, -1.0)), cfg, ref), np.inf)
    total = run_cost + v0

    # Post-hoc growth sanity: surviving trajectories can only have shrunk at
    # finite speed (see frame.log_growth_margin).
    eta_b, c_b = frame.bounds()
    const = log_growth_constant(eta_b, c_b)
    integral = seg_len * (1.0 + np.abs(a_sched) + b_sched).sum(axis=1)
    lhs = np.log1p(x1 * x1 + x2 * x2)
    rhs = np.where(alive, np.log1p(np.where(alive, w1, 0.0)**2 + np.where(alive, w2, 0.0)**2)
                   + const * integral, np.inf)
    if np.any(lhs > rhs + 1.0e-7 * (1.0 + const * integral)):
        raise AssertionError("oracle: a trajectory violated the log-growth estimate")

    return float(np.min(total))
