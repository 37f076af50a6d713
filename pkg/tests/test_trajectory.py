"""Trajectory planner checks.

Oracle notes, fixed before the planner existed:

* Minimal-time profiles under vmax/amax: distance d = |qf - q0|.
  If sqrt(a*d) <= v the profile is a triangle with T = 2*sqrt(d/a),
  otherwise a trapezoid with T = d/v + v/a.
    - d=1, v=1, a=1: sqrt(1*1) = 1 = v, boundary triangle, T = 2.0 s.
    - d=4, v=1, a=1: trapezoid, T = 4/1 + 1/1 = 5.0 s (1 s accel,
      3 s cruise, 1 s decel).
* Independent displacement oracle: integrating sampled velocity with the
  trapezoid rule must reproduce qf - q0 for any profile.
"""

import math

import pytest

from spacedream.controller.trajectory import (
    PlanInfeasible,
    plan_trapezoidal,
)


def integrate_velocity(traj, joint, n=20000):
    """Trapezoid-rule displacement from velocity samples only."""
    T = traj.duration
    h = T / n
    total = 0.0
    for i in range(n):
        v0 = traj.velocity(i * h)[joint]
        v1 = traj.velocity((i + 1) * h)[joint]
        total += 0.5 * (v0 + v1) * h
    return total


def test_triangle_boundary_case():
    traj = plan_trapezoidal([0.0] * 4, [1.0, 0.0, 0.0, 0.0], vmax=1.0, amax=1.0)
    assert traj.duration == pytest.approx(2.0, abs=1e-12)
    # peak velocity reached at T/2
    assert traj.velocity(1.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_trapezoid_case():
    traj = plan_trapezoidal([0.0] * 4, [4.0, 0.0, 0.0, 0.0], vmax=1.0, amax=1.0)
    assert traj.duration == pytest.approx(5.0, abs=1e-12)
    # cruise at vmax through the middle
    for t in (1.0, 2.5, 4.0):
        assert traj.velocity(t)[0] == pytest.approx(1.0, abs=1e-12)


def test_zero_distance_is_constant():
    traj = plan_trapezoidal([0.3] * 4, [0.3] * 4, vmax=1.0, amax=1.0)
    assert traj.duration == 0.0
    assert traj.position(0.0) == pytest.approx([0.3] * 4)
    assert traj.position(5.0) == pytest.approx([0.3] * 4)
    assert traj.velocity(0.0) == [0.0] * 4


def test_endpoints_exact():
    q0 = [0.0, -1.2, 2.0, 0.7]
    qf = [1.0, 1.3, -2.2, 0.7]
    traj = plan_trapezoidal(q0, qf, vmax=0.8, amax=2.0)
    T = traj.duration
    for j in range(4):
        assert abs(traj.position(0.0)[j] - q0[j]) < 1e-12
        assert abs(traj.position(T)[j] - qf[j]) < 1e-12
        assert traj.velocity(0.0)[j] == pytest.approx(0.0, abs=1e-12)
        assert traj.velocity(T)[j] == pytest.approx(0.0, abs=1e-12)
    # beyond the end the trajectory holds the goal
    assert traj.position(T + 3.0) == pytest.approx(qf, abs=0)


def test_displacement_matches_velocity_integral():
    q0 = [0.0, -1.0, 0.5, 2.0]
    qf = [2.0, 1.5, 0.5, -1.0]
    traj = plan_trapezoidal(q0, qf, vmax=0.7, amax=1.3)
    for j in range(4):
        disp = integrate_velocity(traj, j)
        assert disp == pytest.approx(qf[j] - q0[j], abs=1e-6)


def test_time_synchronization_stretches_fast_joints():
    # joint 0 travels 4 rad (T=5 at v=1,a=1); joint 1 travels 0.5 rad
    traj = plan_trapezoidal([0.0] * 4, [4.0, 0.5, 0.0, 0.0], vmax=1.0, amax=1.0)
    assert traj.duration == pytest.approx(5.0, abs=1e-12)
    # the short joint still arrives exactly at T, not earlier
    assert traj.position(traj.duration)[1] == pytest.approx(0.5, abs=1e-12)
    before_end = traj.position(traj.duration - 0.2)[1]
    assert before_end < 0.5  # still moving near the end


def test_velocity_never_exceeds_vmax():
    q0 = [0.0, 0.0, 0.0, 0.0]
    qf = [4.0, -0.5, 1.7, 0.01]
    vmax, amax = 0.9, 1.1
    traj = plan_trapezoidal(q0, qf, vmax, amax)
    T = traj.duration
    n = 5000
    for i in range(n + 1):
        vel = traj.velocity(T * i / n)
        for v in vel:
            assert abs(v) <= vmax * (1 + 1e-9)


def test_finite_difference_matches_analytic_velocity():
    """Central difference at dt=1e-4, sampled inside profile phases."""
    q0 = [0.0, 1.0, -2.0, 0.3]
    qf = [2.0, -1.0, 2.0, 0.31]
    vmax, amax = 0.8, 1.5
    traj = plan_trapezoidal(q0, qf, vmax, amax)
    T = traj.duration
    h = 1e-4
    margin = 2 * h  # stay clear of phase corners where acc is discontinuous
    for j in range(4):
        breaks = traj.phase_times(j)
        spans = list(zip([0.0] + breaks, breaks + [T]))
        for lo, hi in spans:
            if hi - lo <= 2 * margin:
                continue
            for frac in (0.25, 0.5, 0.75):
                t = lo + (hi - lo) * frac
                fd = (traj.position(t + h)[j] - traj.position(t - h)[j]) / (2 * h)
                assert abs(fd - traj.velocity(t)[j]) < 1e-6 * vmax


def test_acceleration_bounded():
    traj = plan_trapezoidal([0.0] * 4, [1.0, 2.0, -1.5, 0.2], vmax=1.0, amax=2.0)
    T = traj.duration
    for i in range(2000):
        acc = traj.acceleration(T * i / 2000)
        for a in acc:
            assert abs(a) <= 2.0 * (1 + 1e-9)


def test_infeasible_limits():
    with pytest.raises(PlanInfeasible):
        plan_trapezoidal([0.0] * 4, [1.0] * 4, vmax=0.0, amax=1.0)
    with pytest.raises(PlanInfeasible):
        plan_trapezoidal([0.0] * 4, [1.0] * 4, vmax=1.0, amax=-2.0)


def test_negative_direction_symmetry():
    fwd = plan_trapezoidal([0.0] * 4, [1.5, 0, 0, 0], vmax=0.5, amax=1.0)
    back = plan_trapezoidal([1.5, 0, 0, 0], [0.0] * 4, vmax=0.5, amax=1.0)
    assert fwd.duration == pytest.approx(back.duration)
    T = fwd.duration
    for i in range(100):
        t = T * i / 100
        assert fwd.position(t)[0] == pytest.approx(1.5 - back.position(t)[0], abs=1e-12)


def test_thousand_random_plans_hold_invariants():
    import random
    rng = random.Random(42)
    for _ in range(1000):
        q0 = [rng.uniform(-2.5, 2.5) for _ in range(4)]
        qf = [rng.uniform(-2.5, 2.5) for _ in range(4)]
        vmax = rng.uniform(0.05, 2.0)
        amax = rng.uniform(0.05, 4.0)
        traj = plan_trapezoidal(q0, qf, vmax, amax)
        T = traj.duration
        for j in range(4):
            assert abs(traj.position(0.0)[j] - q0[j]) < 1e-12
            assert abs(traj.position(T)[j] - qf[j]) < 1e-12
        for i in range(25):
            for v in traj.velocity(T * i / 25):
                assert abs(v) <= vmax * (1 + 1e-9)
