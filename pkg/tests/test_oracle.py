import math

import numpy as np
import pytest

from robustkb.frame import FrameTrajectory, log_growth_constant, log_growth_margin
from robustkb.model import initial_cost
from robustkb.oracle import (BLOWUP_CAP, ControlPair, brute_force_value,
                             integrate_trajectory_backward)

from conftest import PEN, REF


def flat_frame(c=2.0, T=1.0, n=1001):
    times = np.linspace(0.0, T, n)
    return FrameTrajectory(dt=times[1] - times[0], times=times,
                           wstar1=np.zeros(n), wstar2=np.ones(n),
                           eta=np.zeros(n), c=np.full(n, c))


def test_zero_control_moves_only_precision():
    frame = flat_frame(c=1.0)
    res = integrate_trajectory_backward((0.3, 1.2), 0.5, [ControlPair(0.0, 0.0)], frame, 64)
    assert res.w0.z1 == pytest.approx(0.3, abs=1e-12)
    assert res.w0.z2 == pytest.approx(0.7, abs=1e-10)
    assert not res.blew_up


def test_exit_time_matches_logistic_solution():
    # c = 2, (a, b) = (0, 1): dw2/ds = 4 - w2^2; from w2(t) = 1 the solution
    # leaves {z2 > 0} at s = t - log(3)/4.
    frame = flat_frame(c=2.0)
    t = 0.5
    res = integrate_trajectory_backward((0.0, 1.0), t, [ControlPair(0.0, 1.0)], frame,
                                        substeps_per_segment=2000)
    assert not res.blew_up
    assert res.exit_time == pytest.approx(t - math.log(3.0) / 4.0, abs=1e-6)


def test_blowup_time_matches_logistic_solution():
    # from w2(t) = 3 the same dynamics blow up at s = t - log(5)/4
    frame = flat_frame(c=2.0)
    t = 0.5
    res = integrate_trajectory_backward((0.0, 3.0), t, [ControlPair(0.0, 1.0)], frame,
                                        substeps_per_segment=2000)
    assert res.blew_up
    assert res.w0 is None
    assert res.blowup_time == pytest.approx(t - math.log(5.0) / 4.0, abs=1e-3)


def test_trail_recording_and_growth_margin():
    frame = flat_frame(c=2.0)
    res = integrate_trajectory_backward((0.5, 1.0), 0.4, [ControlPair(0.3, 0.5)],
                                        frame, 200, record=True)
    assert res.trail is not None and len(res.trail) == 201
    const = log_growth_constant(0.0, 2.0)
    integral = (1.0 + 0.3 + 0.5) * 0.4
    assert log_growth_margin((res.w0.z1, res.w0.z2), (0.5, 1.0), integral, const) >= -1e-9
    # every intermediate point also satisfies the bound from the start
    for s, w1, w2 in res.trail:
        part = (1.0 + 0.3 + 0.5) * (s - 0.0)
        assert log_growth_margin((res.w0.z1, res.w0.z2), (w1, w2), part, const) >= -1e-9


def test_short_horizon_recovers_initial_cost(sec6_frame):
    w = (float(sec6_frame.wstar1[0]) + 0.4, float(sec6_frame.wstar2[0]) + 0.3)
    t = 1e-5
    val = brute_force_value(w, t, [0.0], [1.0], 1, sec6_frame, PEN, REF)
    assert val == pytest.approx(initial_cost(w, PEN, REF), abs=1e-3)


def test_reference_schedule_is_an_upper_bound(sec6_frame):
    t = 0.25
    w1 = float(np.interp(t, sec6_frame.times, sec6_frame.wstar1))
    x = (w1 + 0.3, 1.0 + 0.2)
    val = brute_force_value(x, t, [-1.0, 0.0, 1.0], [0.5, 1.0, 2.0], 2,
                            sec6_frame, PEN, REF)
    ref_only = integrate_trajectory_backward(
        x, t, [ControlPair(REF.alpha_star, REF.beta_star)] * 2, sec6_frame, 64)
    bound = initial_cost((ref_only.w0.z1, ref_only.w0.z2), PEN, REF)
    assert val <= bound + 1e-9


def test_enumeration_monotonicity(sec6_frame):
    t = 0.2
    w1 = float(np.interp(t, sec6_frame.times, sec6_frame.wstar1))
    x = (w1 + 0.4, 1.0 - 0.3)
    coarse = brute_force_value(x, t, [-2.0, 0.0, 2.0], [0.0, 1.0, 3.0], 1,
                               sec6_frame, PEN, REF, substeps_per_segment=64)
    refined_grid = brute_force_value(x, t, [-2.0, -1.0, 0.0, 1.0, 2.0],
                                     [0.0, 0.5, 1.0, 2.0, 3.0], 1,
                                     sec6_frame, PEN, REF, substeps_per_segment=64)
    # halve the per-segment substeps so the overall step size matches and the
    # discretized schedule families are exactly nested
    more_segments = brute_force_value(x, t, [-2.0, 0.0, 2.0], [0.0, 1.0, 3.0], 2,
                                      sec6_frame, PEN, REF, substeps_per_segment=32)
    assert refined_grid <= coarse + 1e-12
    assert more_segments <= coarse + 1e-12


def test_blown_up_schedules_get_infinite_cost():
    # a large terminal precision with c = 2 blows up under (0, 1); the value
    # over a grid that contains only that control is infinite
    frame = flat_frame(c=2.0)
    val = brute_force_value((0.0, 3.0), 0.5, [0.0], [1.0], 1, frame, PEN, REF)
    assert val == math.inf
    # from w2(t) = 1 the trajectory survives but exits U, so its initial
    # point carries infinite cost as well
    val2 = brute_force_value((0.0, 1.0), 0.5, [0.0], [1.0], 1, frame, PEN, REF)
    assert val2 == math.inf


def test_combinatorial_guard():
    frame = flat_frame()
    with pytest.raises(ValueError, match="segments"):
        brute_force_value((0.0, 1.0), 0.5, [0.0], [1.0], 5, frame, PEN, REF)
    with pytest.raises(ValueError, match="grid"):
        brute_force_value((0.0, 1.0), 0.5, list(np.linspace(-2, 2, 8)), [1.0],
                          1, frame, PEN, REF)
    with pytest.raises(ValueError, match=">= 0"):
        brute_force_value((0.0, 1.0), 0.5, [0.0], [-1.0], 1, frame, PEN, REF)


def test_blowup_cap_override():
    frame = flat_frame(c=2.0)
    t = 0.5
    res_lo = integrate_trajectory_backward((0.0, 3.0), t, [ControlPair(0.0, 1.0)],
                                           frame, 2000, cap=1e3)
    res_hi = integrate_trajectory_backward((0.0, 3.0), t, [ControlPair(0.0, 1.0)],
                                           frame, 2000, cap=BLOWUP_CAP)
    assert res_lo.blew_up and res_hi.blew_up
    assert res_lo.blowup_time >= res_hi.blowup_time  # smaller cap triggers earlier
