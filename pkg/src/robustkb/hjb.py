"""Explicit upwind solver for the transformed penalty PDE.

In the moving frame centred at the reference trajectory w*(t), the value
function v-bar(zeta, t) = v(w*(t) + zeta, t) satisfies

    dv/dt + sup_{a, b >= 0} { fbar(zeta, t, a, b) . grad v - gamma(t, a, b) } = 0,
    fbar(zeta, t, a, b) = f(w*(t) + zeta, t, a, b) - f(w*(t), t, alpha*, beta*).

Because v-bar blows up toward the domain edges we instead evolve the bounded
transform lambda = -1 / (1 + v-bar), which lives in [-1, 0) and satisfies

    dlambda/dt + sup_{a, b >= 0} { fbar . grad lambda - lambda^2 gamma } = 0

with a zero far-field boundary condition, imposed here on the edge of a
finite rectangle.  The sup has a closed form for the quadratic penalty: the
objective is affine in (a, b) minus a separable parabola, so the maximizer is

    a* = alpha* + l_a / (2 c_alpha s),    b* = max(0, beta* + l_b / (2 c_beta s)),

with s = max(lambda^2, s_min) and l_a, l_b the gradient contractions of the
affine coefficients of fbar; (a*, b*) is then shrunk radially onto
|a| + b <= M_trunc, mirroring the bounded-control truncation that makes the
explicit scheme's CFL condition meaningful.

Each step computes (a*, b*) from a limited gradient estimate (minmod of the
two one-sided differences by default; it vanishes at discrete extrema, which
keeps the well floor pinned at v-bar = 0; plain central differences are
available but erode the minimum at first order), then re-applies the
transport term with sign-based one-sided differences (backward difference
where the drift component is positive).  A local Lax-Friedrichs variant is
available behind ``GridSpec.scheme`` as a fallback.  The time step adapts to
the realized CFL bound with safety factor theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .frame import FrameNode, FrameTrajectory, to_state
from .model import PenaltyConfig, ReferenceParameters, initial_cost, running_cost


@dataclass(frozen=True)
class GridSpec:
    """Rectangular frame grid: half-widths, odd node counts, drift truncation
    M_trunc and CFL safety factor theta."""

    z1_half: float = 4.0
    z2_half: float = 4.0
    n1: int = 81
    n2: int = 81
    m_trunc: float = 10.0
    theta: float = 0.8
    s_min: float = 1.0e-6
    lambda_floor: float = 1.0e-9
    dt_floor: float = 1.0e-12
    scheme: str = "upwind"
    grad_limiter: str = "minmod"

    def __post_init__(self):
        if self.n1 < 5 or self.n2 < 5 or self.n1 % 2 == 0 or self.n2 % 2 == 0:
            raise ConfigError("grid: node counts must be odd and >= 5")
        if self.z1_half <= 0 or self.z2_half <= 0:
            raise ConfigError("grid: half-widths must be > 0")
        if self.m_trunc <= 0:
            raise ConfigError("grid.m_trunc: must be > 0")
        if not (0 < self.theta <= 1):
            raise ConfigError("grid.theta: must be in (0, 1]")
        if self.scheme not in ("upwind", "lax_friedrichs"):
            raise ConfigError("grid.scheme: must be 'upwind' or 'lax_friedrichs'")
        if self.grad_limiter not in ("minmod", "central"):
            raise ConfigError("grid.grad_limiter: must be 'minmod' or 'central'")
        if self.s_min <= 0 or self.lambda_floor <= 0 or self.dt_floor <= 0:
            raise ConfigError("grid: s_min, lambda_floor, dt_floor must be > 0")

    @property
    def h1(self) -> float:
        return 2.0 * self.z1_half / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return 2.0 * self.z2_half / (self.n2 - 1)

    def zeta1(self) -> np.ndarray:
        return np.linspace(-self.z1_half, self.z1_half, self.n1)

    def zeta2(self) -> np.ndarray:
        return np.linspace(-self.z2_half, self.z2_half, self.n2)


@dataclass
class SolveDiagnostics:
    steps: int = 0
    dt_min: float = math.inf
    dt_max: float = 0.0
    dt_last: float = 0.0
    cfl_max: float = 0.0
    preclamp_excursion: float = 0.0
    lam_min: float = 0.0
    lam_max: float = -1.0


@dataclass(frozen=True)
class LambdaField:
    """Snapshots of lambda on the moving grid, plus the frame data needed to
    map back to (mu, sigma^2)."""

    spec: GridSpec
    times: np.ndarray            # (S,)
    values: np.ndarray           # (S, n1, n2), in [-1, 0]
    wstar: np.ndarray            # (S, 2)
    eta: np.ndarray              # (S,)
    diagnostics: SolveDiagnostics = field(default_factory=SolveDiagnostics)

    def slice_at(self, t: float) -> tuple[np.ndarray, tuple[float, float], float]:
        """Time-interpolated (lambda array, w*(t), eta_t); t must be in range."""
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ConfigError(f"lambda field: t={t:g} outside solved range "
                              f"[{ts[0]:g}, {ts[-1]:g}]")
        t = min(max(t, ts[0]), ts[-1])
        j = int(np.searchsorted(ts, t))
        if j < len(ts) and ts[j] == t:
            return self.values[j], (self.wstar[j, 0], self.wstar[j, 1]), float(self.eta[j])
        lo, hi = j - 1, j
        w = (t - ts[lo]) / (ts[hi] - ts[lo])
        lam = (1.0 - w) * self.values[lo] + w * self.values[hi]
        ws = (1.0 - w) * self.wstar[lo] + w * self.wstar[hi]
        eta = (1.0 - w) * self.eta[lo] + w * self.eta[hi]
        return lam, (float(ws[0]), float(ws[1])), float(eta)


def lambda_to_value(lam, lambda_floor: float):
    """Invert lambda = -1/(1 + v): v = -1 - 1/lambda, +inf for lambda ~ 0."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore"):
        v = np.where(lam < -lambda_floor, -1.0 - 1.0 / np.where(lam < 0, lam, -1.0), np.inf)
    return float(v) if v.ndim == 0 else v


def _reference_drift(node: FrameNode, ref: ReferenceParameters) -> tuple[float, float]:
    # w*_2 > 0 always, so the U branch applies.
    f1 = -(node.w1 + node.eta) * (ref.alpha_star + ref.beta_star * node.w2)
    f2 = -ref.beta_star * node.w2**2 - 2.0 * ref.alpha_star * node.w2 + node.c**2
    return f1, f2


def _optimize_controls(z1, z2, grad1, grad2, lam, node: FrameNode,
                       cfg: PenaltyConfig, ref: ReferenceParameters,
                       m_trunc: float, s_min: float):
    """Closed-form maximizer of fbar.p - lambda^2 gamma over a, b >= 0,
    radially clamped onto |a| + b <= m_trunc.  Broadcasts over arrays.

    Returns (a, b, fbar1, fbar2, gamma_ab, value).
    """
    fstar1, fstar2 = _reference_drift(node, ref)
    on_u = np.asarray(z2) > 0
    zp = np.asarray(z1) + node.eta
    g_a1 = -zp
    g_a2 = np.where(on_u, -2.0 * np.asarray(z2), 0.0)
    g_b1 = np.where(on_u, -zp * np.asarray(z2), 0.0)
    g_b2 = np.where(on_u, -np.asarray(z2) ** 2, 0.0)

    l_a = g_a1 * grad1 + g_a2 * grad2
    l_b = g_b1 * grad1 + g_b2 * grad2
    const_term = -fstar1 * grad1 + (node.c**2 - fstar2) * grad2

    s = np.maximum(np.asarray(lam) ** 2, s_min)
    a = ref.alpha_star + l_a / (2.0 * cfg.c_alpha * s)
    b = np.maximum(ref.beta_star + l_b / (2.0 * cfg.c_beta * s), 0.0)
    tot = np.abs(a) + b
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(tot > m_trunc, m_trunc / np.where(tot > 0, tot, 1.0), 1.0)
    a = a * scale
    b = b * scale

    gam = running_cost(0.0, a, b, cfg, ref)
    value = l_a * a + l_b * b + const_term - np.asarray(lam) ** 2 * gam
    fbar1 = g_a1 * a + g_b1 * b - fstar1
    fbar2 = g_a2 * a + g_b2 * b + node.c**2 - fstar2
    return a, b, fbar1, fbar2, gam, value


def pointwise_hamiltonian(zeta, t, grad, lambda_val: float, node: FrameNode,
                          cfg: PenaltyConfig, ref: ReferenceParameters,
                          m_trunc: float, s_min: float = 1.0e-6):
    """Optimized Hamiltonian at one frame point.

    Returns (value, a_opt, b_opt) where value is the objective
    fbar . grad - lambda^2 gamma at the clamped maximizer.
    """
    z1 = node.w1 + zeta[0]
    z2 = node.w2 + zeta[1]
    a, b, _, _, _, value = _optimize_controls(z1, z2, grad[0], grad[1],
                                              lambda_val, node, cfg, ref,
                                              m_trunc, s_min)
    return float(value), float(a), float(b)


def solve_lambda(spec: GridSpec, frame: FrameTrajectory, cfg: PenaltyConfig,
                 ref: ReferenceParameters, T: float,
                 output_times: Sequence[float]) -> LambdaField:
    """March lambda from -1/(1 + v0) to the last requested output time.

    Snapshots are linearly interpolated in time onto ``output_times``.  The
    t = 0 snapshot, when requested, is the raw transformed initial condition;
    the zero boundary ring is enforced on every subsequent step.  Off-domain
    nodes (w*_2(t) + zeta_2 <= 0) are pinned to lambda = 0, i.e. v = +inf.
    """
    if cfg.w2 <= 0:
        raise ConfigError("penalty.w2: must be > 0 for an HJB solve "
                          "(initial cost must blow up toward z2 = 0)")
    targets = np.asarray(sorted(set(float(t) for t in output_times)))
    if len(targets) == 0:
        raise ConfigError("solve_lambda: no output times requested")
    if targets[0] < 0 or targets[-1] > T + 1e-12:
        raise ConfigError("solve_lambda: output times must lie in [0, T]")
    if frame.times[-1] < targets[-1] - 1e-12:
        raise ConfigError("solve_lambda: frame does not cover the requested horizon")

    zeta1 = spec.zeta1()
    zeta2 = spec.zeta2()
    h1, h2 = spec.h1, spec.h2
    node0 = frame.node_at(0.0)

    vbar0 = initial_cost((node0.w1 + zeta1[:, None], node0.w2 + zeta2[None, :]), cfg, ref)
    with np.errstate(divide="ignore"):
        lam = np.where(np.isfinite(vbar0), -1.0 / (1.0 + vbar0), 0.0)

    snaps: list[np.ndarray] = []
    snap_ws: list[tuple[float, float]] = []
    snap_eta: list[float] = []
    pending = list(targets)
    if pending and pending[0] == 0.0:
        snaps.append(lam.copy())
        snap_ws.append((node0.w1, node0.w2))
        snap_eta.append(node0.eta)
        pending.pop(0)

    diag = SolveDiagnostics()
    diag.lam_min = float(lam.min())
    diag.lam_max = float(lam.max())
    t_final = targets[-1]
    t = 0.0

    # Boundary ring is zero from the first step onward.
    lam[0, :] = lam[-1, :] = 0.0
    lam[:, 0] = lam[:, -1] = 0.0
    z2_now = node0.w2 + zeta2
    lam[:, z2_now <= 0] = 0.0

    z1i = zeta1[1:-1, None]
    z2i = zeta2[None, 1:-1]

    while t < t_final - 1e-14:
        node = frame.node_at(t)
        z1 = node.w1 + z1i
        z2 = node.w2 + z2i
        active = np.broadcast_to(z2 > 0, (spec.n1 - 2, spec.n2 - 2))

        lam_int = lam[1:-1, 1:-1]
        dm1 = (lam_int - lam[:-2, 1:-1]) / h1
        dp1 = (lam[2:, 1:-1] - lam_int) / h1
        dm2 = (lam_int - lam[1:-1, :-2]) / h2
        dp2 = (lam[1:-1, 2:] - lam_int) / h2
        if spec.grad_limiter == "minmod":
            # Monotone gradient estimate for the maximizer: zero at discrete
            # extrema, so the reference control (and hence zero drift and
            # cost) is recovered exactly at the value function's minimum and
            # the scheme preserves v(w*(t), t) = 0.  With plain central
            # differences the floor of the well erodes at first order.
            p1 = np.where(dm1 * dp1 > 0, np.where(np.abs(dm1) < np.abs(dp1), dm1, dp1), 0.0)
            p2 = np.where(dm2 * dp2 > 0, np.where(np.abs(dm2) < np.abs(dp2), dm2, dp2), 0.0)
        else:
            p1 = 0.5 * (dm1 + dp1)
            p2 = 0.5 * (dm2 + dp2)
        a, b, fbar1, fbar2, gam, _ = _optimize_controls(
            z1, z2, p1, p2, lam_int, node, cfg, ref, spec.m_trunc, spec.s_min)

        adv = np.abs(fbar1) / h1 + np.abs(fbar2) / h2
        density = adv + 2.0 * gam * np.abs(lam_int)
        dmax = float(density[active].max()) if active.any() else 0.0
        dt = spec.theta / dmax if dmax > 0 else t_final - t
        dt = min(dt, t_final - t)
        if dt < spec.dt_floor:
            raise NumericalError(f"solve_lambda: time step underflow (dt={dt:.3e}) at t={t:g}")

        if spec.scheme == "upwind":
            gu1 = np.where(fbar1 > 0, dm1, dp1)
            gu2 = np.where(fbar2 > 0, dm2, dp2)
            sup_term = fbar1 * gu1 + fbar2 * gu2 - lam_int**2 * gam
        else:  # local Lax-Friedrichs: central flux plus per-node dissipation
            pc1 = 0.5 * (dm1 + dp1)
            pc2 = 0.5 * (dm2 + dp2)
            d2_1 = 0.5 * (dp1 - dm1)
            d2_2 = 0.5 * (dp2 - dm2)
            sup_term = (fbar1 * pc1 + fbar2 * pc2 - lam_int**2 * gam
                        - np.abs(fbar1) * d2_1 - np.abs(fbar2) * d2_2)

        new_int = lam_int - dt * sup_term
        over = max(float((new_int - 0.0).max(initial=0.0)),
                   float((-1.0 - new_int).max(initial=0.0)))
        diag.preclamp_excursion = max(diag.preclamp_excursion, over)
        new_int = np.clip(new_int, -1.0, 0.0)

        t_new = t + dt
        lam_new = np.zeros_like(lam)
        lam_new[1:-1, 1:-1] = new_int
        node_new = frame.node_at(t_new)
        lam_new[:, (node_new.w2 + zeta2) <= 0] = 0.0
        if np.isnan(lam_new).any():
            raise NumericalError(f"solve_lambda: NaN at t={t_new:g}")

        diag.steps += 1
        diag.dt_min = min(diag.dt_min, dt)
        diag.dt_max = max(diag.dt_max, dt)
        diag.dt_last = dt
        cfl = dt * (float(adv[active].max()) if active.any() else 0.0)
        diag.cfl_max = max(diag.cfl_max, cfl)
        diag.lam_min = min(diag.lam_min, float(lam_new.min()))
        diag.lam_max = max(diag.lam_max, float(lam_new.max()))

        while pending and pending[0] <= t_new + 1e-14:
            tgt = pending.pop(0)
            w = 1.0 if dt == 0 else min(max((tgt - t) / dt, 0.0), 1.0)
            snaps.append((1.0 - w) * lam + w * lam_new)
            ws = frame.wstar_at(tgt)
            snap_ws.append(ws)
            snap_eta.append(float(frame.eta_at(tgt)))

        lam = lam_new
        t = t_new

    if pending:  # t_final reached within tolerance but targets still queued
        for tgt in pending:
            snaps.append(lam.copy())
            snap_ws.append(frame.wstar_at(tgt))
            snap_eta.append(float(frame.eta_at(tgt)))

    return LambdaField(spec=spec, times=targets,
                       values=np.stack(snaps), wstar=np.array(snap_ws),
                       eta=np.array(snap_eta), diagnostics=diag)


def bilinear(lam: np.ndarray, zeta1: float, zeta2: float, spec: GridSpec) -> float:
    """Bilinear interpolation of a node array at frame point (zeta1, zeta2);
    NaN outside the rectangle."""
    if abs(zeta1) > spec.z1_half or abs(zeta2) > spec.z2_half:
        return math.nan
    u = (zeta1 + spec.z1_half) / spec.h1
    v = (zeta2 + spec.z2_half) / spec.h2
    i = min(int(u), spec.n1 - 2)
    j = min(int(v), spec.n2 - 2)
    fu = u - i
    fv = v - j
    return float((1 - fu) * (1 - fv) * lam[i, j] + fu * (1 - fv) * lam[i + 1, j]
                 + (1 - fu) * fv * lam[i, j + 1] + fu * fv * lam[i + 1, j + 1])


def kappa_lookup(field: LambdaField, t: float, mu: float, sigma2: float,
                 eta_t: float) -> float:
    """Penalty kappa_t(mu, sigma^2) by inverse transform and interpolation.

    +inf outside the solved rectangle or where lambda has collapsed to the
    zero far-field value.
    """
    if sigma2 <= 0:
        raise ConfigError("kappa_lookup: sigma2 must be > 0")
    lam, (w1, w2), _ = field.slice_at(t)
    x = to_state(mu, sigma2, eta_t)
    lam_val = bilinear(lam, x.z1 - w1, x.z2 - w2, field.spec)
    if math.isnan(lam_val):
        return math.inf
    return lambda_to_value(lam_val, field.spec.lambda_floor)


def write_snapshots(field: LambdaField, outdir) -> list[Path]:
    """Dump one CSV per output time: columns zeta1, zeta2, lambda, v."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    zeta1 = field.spec.zeta1()
    zeta2 = field.spec.zeta2()
    paths = []
    for k in range(len(field.times)):
        p = outdir / f"lambda_t{k}.csv"
        lam = field.values[k]
        v = lambda_to_value(lam, field.spec.lambda_floor)
        with open(p, "w") as fh:
            fh.write("zeta1,zeta2,lambda,v\n")
            for i in range(field.spec.n1):
                for j in range(field.spec.n2):
                    fh.write(f"{zeta1[i]:.12g},{zeta2[j]:.12g},"
                             f"{lam[i, j]:.12g},{v[i, j]:.12g}\n")
        paths.append(p)
    return paths
