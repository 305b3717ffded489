import dataclasses
import math

import numpy as np
import pytest

import robustkb as rk
from robustkb.errors import ConfigError, NumericalError
from robustkb.expect import (GaussianCandidate, gaussian_functional,
                             gaussian_functional_quadrature, golden_section_min,
                             lower_expectation, minimax_estimate, payoff_moments,
                             upper_expectation)
from robustkb.hjb import GridSpec, LambdaField, solve_lambda
from robustkb.model import (CallPayoff, Constant, Identity, Negated, Square,
                            Tabulated)

from conftest import MODEL, PEN, REF


def test_gaussian_functional_closed_forms():
    assert gaussian_functional(Identity(), GaussianCandidate(3.0, 0.5)) == 3.0
    assert gaussian_functional(Square(), GaussianCandidate(0.0, 1.0)) == 1.0
    assert gaussian_functional(Constant(4.2), GaussianCandidate(1.0, 2.0)) == 4.2
    # at-the-money call: E[(X - mu)^+] = sigma / sqrt(2 pi)
    sigma = 0.7
    got = gaussian_functional(CallPayoff(1.0), GaussianCandidate(1.0, sigma**2))
    assert got == pytest.approx(sigma / math.sqrt(2 * math.pi), abs=1e-12)
    assert gaussian_functional(Negated(Square()), GaussianCandidate(2.0, 1.0)) == -5.0


def test_quadrature_cross_checks_closed_forms():
    rng = np.random.default_rng(12)
    for _ in range(25):
        cand = GaussianCandidate(rng.uniform(-3, 3), rng.uniform(0.05, 4.0))
        for phi in (Identity(), Square(), CallPayoff(rng.uniform(-2, 2)), Constant(1.3)):
            closed = gaussian_functional(phi, cand)
            quad = gaussian_functional_quadrature(phi, cand)
            assert quad == pytest.approx(closed, abs=1e-8)


def test_tabulated_uses_quadrature_with_constant_extension():
    cand = GaussianCandidate(0.0, 1.0)
    # smooth tabulated payoff: E[sin(X)] = sin(mu) * exp(-sigma^2/2); here 0
    xs = tuple(np.linspace(-8.0, 8.0, 801))
    smooth = Tabulated(xs, tuple(np.sin(np.asarray(xs) + 0.5)))
    assert gaussian_functional(smooth, cand) == pytest.approx(
        math.sin(0.5) * math.exp(-0.5), abs=1e-4)
    # kinked |x|: Gauss-Hermite resolves the kink only to ~1e-2
    kinked = Tabulated(xs, tuple(abs(v) for v in xs))
    assert gaussian_functional(kinked, cand) == pytest.approx(
        math.sqrt(2 / math.pi), abs=1e-2)


def test_payoff_moments_match_quadrature():
    xl, wl = np.polynomial.legendre.leggauss(96)
    rng = np.random.default_rng(7)
    for _ in range(20):
        mu, s2, K = rng.uniform(-2, 2), rng.uniform(0.1, 3.0), rng.uniform(-1, 2)
        sigma = math.sqrt(s2)
        m1, m2 = payoff_moments(CallPayoff(K), mu, s2)
        hi = mu + 14 * sigma
        if hi > K:
            u = 0.5 * (hi - K) * xl + 0.5 * (hi + K)
            dens = np.exp(-0.5 * ((u - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
            q1 = 0.5 * (hi - K) * float(wl @ ((u - K) * dens))
            q2 = 0.5 * (hi - K) * float(wl @ ((u - K) ** 2 * dens))
            assert m1 == pytest.approx(q1, abs=1e-10)
            assert m2 == pytest.approx(q2, abs=1e-10)
    m1, m2 = payoff_moments(Identity(), 2.0, 3.0)
    assert (m1, m2) == (2.0, 7.0)
    with pytest.raises(ConfigError):
        payoff_moments(Square(), 0.0, 1.0)


def test_golden_section_finds_parabola_minimum():
    x, fx = golden_section_min(lambda u: (u - 1.234) ** 2, -5.0, 5.0, tol=1e-8)
    assert x == pytest.approx(1.234, abs=1e-6)


def _eta_q(sec6_path, sec6_frame, t):
    filt = rk.run_filter(REF, sec6_path, gain=MODEL.gain())
    return (float(sec6_frame.eta_at(t)),
            float(np.interp(t, filt.times, filt.q)),
            float(np.interp(t, filt.times, filt.r)))


def test_upper_includes_reference_candidate(small_field, sec6_path, sec6_frame):
    for t in (0.1, 0.3, 0.5):
        eta_t, q, _ = _eta_q(sec6_path, sec6_frame, t)
        up = upper_expectation(Identity(), t, small_field, eta_t, PEN)
        assert up >= q - 0.05


def test_constant_functional_passes_through(small_field, sec6_frame):
    for t in (0.1, 0.4):
        eta_t = float(sec6_frame.eta_at(t))
        up = upper_expectation(Constant(2.5), t, small_field, eta_t, PEN)
        lo = lower_expectation(Constant(2.5), t, small_field, eta_t, PEN)
        assert up == pytest.approx(2.5, abs=0.02)
        assert lo == pytest.approx(2.5, abs=0.02)


def test_interval_straddles_reference_filter(small_field, sec6_path, sec6_frame):
    for t in (0.1, 0.2, 0.3, 0.4, 0.5):
        eta_t, q, _ = _eta_q(sec6_path, sec6_frame, t)
        lo = lower_expectation(Identity(), t, small_field, eta_t, PEN)
        up = upper_expectation(Identity(), t, small_field, eta_t, PEN)
        assert lo <= up
        assert lo - 0.05 <= q <= up + 0.05


def test_minimax_between_bounds_for_identity(small_field, sec6_frame):
    for t in (0.1, 0.3, 0.5):
        eta_t = float(sec6_frame.eta_at(t))
        lo = lower_expectation(Identity(), t, small_field, eta_t, PEN)
        up = upper_expectation(Identity(), t, small_field, eta_t, PEN)
        mm = minimax_estimate(Identity(), t, small_field, eta_t, PEN)
        assert lo - 0.05 <= mm <= up + 0.05


def test_minimax_agrees_with_dense_scan(small_field, sec6_frame):
    t = 0.3
    eta_t = float(sec6_frame.eta_at(t))
    mm = minimax_estimate(Identity(), t, small_field, eta_t, PEN)

    # independent dense scan of the convex objective over 1001 points
    spec = small_field.spec
    lam, (w1, w2), _ = small_field.slice_at(t)
    z1 = w1 + spec.zeta1()[:, None]
    z2 = w2 + spec.zeta2()[None, :]
    valid = (z2 > 0) & (lam < -spec.lambda_floor)
    kap = -1.0 - 1.0 / lam[valid]
    sigma2 = 1.0 / np.broadcast_to(z2, lam.shape)[valid]
    mu = sigma2 * np.broadcast_to(z1 + eta_t, lam.shape)[valid]
    pen = (kap / PEN.k1) ** PEN.k2
    lo = lower_expectation(Identity(), t, small_field, eta_t, PEN)
    up = upper_expectation(Identity(), t, small_field, eta_t, PEN)
    xis = np.linspace(lo - 1.0, up + 1.0, 1001)
    g = np.array([np.max(sigma2 + (mu - xi) ** 2 - pen) for xi in xis])
    assert mm == pytest.approx(float(xis[np.argmin(g)]), abs=1e-3)


def test_degenerate_penalty_recovers_reference_filter(sec6_frame, sec6_path):
    # scaling every weight by 1e6 forces all candidates except the reference
    # filter's state to astronomical penalties
    pen_hard = rk.PenaltyConfig(c_alpha=5e6, c_beta=1e7, w1=1.5e7, w2=1.5e7,
                                k1=10.0, k2=5.0)
    spec = GridSpec(z1_half=1.6, z2_half=1.6, n1=161, n2=161, m_trunc=4.0)
    t = 0.1
    field = solve_lambda(spec, sec6_frame, pen_hard, REF, t, [t])
    eta_t, q, r = _eta_q(sec6_path, sec6_frame, t)
    up = upper_expectation(Identity(), t, field, eta_t, pen_hard)
    lo = lower_expectation(Identity(), t, field, eta_t, pen_hard)
    mm = minimax_estimate(Identity(), t, field, eta_t, pen_hard)
    target = gaussian_functional(Identity(), GaussianCandidate(q, r))
    assert up == pytest.approx(target, abs=0.02)
    assert lo == pytest.approx(target, abs=0.02)
    assert mm == pytest.approx(target, abs=0.02)


def test_translation_equivariance(small_field, sec6_frame):
    t = 0.2
    eta_t = float(sec6_frame.eta_at(t))
    xs = tuple(np.linspace(-10, 10, 41))
    base = tuple(np.sin(np.asarray(xs)))
    shift = 0.7
    up0 = upper_expectation(Tabulated(xs, base), t, small_field, eta_t, PEN)
    up1 = upper_expectation(Tabulated(xs, tuple(v + shift for v in base)),
                            t, small_field, eta_t, PEN)
    assert up1 - up0 == pytest.approx(shift, abs=1e-12)


def test_monotonicity_in_payoff(small_field, sec6_frame):
    t = 0.2
    eta_t = float(sec6_frame.eta_at(t))
    xs = tuple(np.linspace(-10, 10, 41))
    lo_payoff = tuple(np.cos(np.asarray(xs)))
    hi_payoff = tuple(np.cos(np.asarray(xs)) + 0.25 + 0.01 * np.asarray(xs) ** 2 / 10)
    up_lo = upper_expectation(Tabulated(xs, lo_payoff), t, small_field, eta_t, PEN)
    up_hi = upper_expectation(Tabulated(xs, hi_payoff), t, small_field, eta_t, PEN)
    assert up_lo <= up_hi + 1e-12


def test_weaker_aversion_widens_interval(small_field, sec6_frame):
    t = 0.3
    eta_t = float(sec6_frame.eta_at(t))
    pen_weak = dataclasses.replace(PEN, k1=20.0)
    up = upper_expectation(Identity(), t, small_field, eta_t, PEN)
    lo = lower_expectation(Identity(), t, small_field, eta_t, PEN)
    up_w = upper_expectation(Identity(), t, small_field, eta_t, pen_weak)
    lo_w = lower_expectation(Identity(), t, small_field, eta_t, pen_weak)
    assert up_w >= up - 1e-12
    assert lo_w <= lo + 1e-12


def test_all_infinite_penalty_is_an_error():
    spec = GridSpec(n1=5, n2=5)
    field = LambdaField(spec=spec, times=np.array([0.0]),
                        values=np.zeros((1, 5, 5)), wstar=np.array([[0.0, 1.0]]),
                        eta=np.array([0.0]))
    with pytest.raises(NumericalError, match="infinite"):
        upper_expectation(Identity(), 0.0, field, 0.0, PEN)


def test_candidate_validation():
    with pytest.raises(ConfigError):
        GaussianCandidate(0.0, 0.0)
