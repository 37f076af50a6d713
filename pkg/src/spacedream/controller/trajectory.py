"""Time-synchronized trapezoidal joint trajectories.

Each joint gets a classic trapezoid (or triangle, when the distance is too
short to reach vmax). All joints share one duration: the slowest joint
sets T and the others are stretched to it by lowering their peak velocity
while keeping the commanded acceleration, so every joint starts and stops
together.

For a stretched joint the peak velocity follows from
T = d/v + v/a  =>  v^2 - a*T*v + a*d = 0  =>  v = (a*T - sqrt(a^2*T^2 - 4*a*d))/2,
taking the smaller root so v <= a*T/2 (the cruise phase stays real).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

N_JOINTS = 4


class PlanInfeasible(Exception):
    pass


@dataclass(frozen=True)
class _JointProfile:
    q0: float
    qf: float
    sign: float  # direction, 0 for no motion
    accel: float  # magnitude
    v_peak: float  # magnitude
    t_acc: float
    t_cruise: float

    @property
    def t_total(self) -> float:
        return 2.0 * self.t_acc + self.t_cruise

    def position(self, t: float) -> float:
        if self.sign == 0.0 or t <= 0.0:
            return self.q0
        if t >= self.t_total:
            return self.qf
        a, v = self.accel, self.v_peak
        if t < self.t_acc:
            d = 0.5 * a * t * t
        elif t < self.t_acc + self.t_cruise:
            d = 0.5 * v * self.t_acc + v * (t - self.t_acc)
        else:
            tr = self.t_total - t  # time remaining, mirror of the accel ramp
            d = abs(self.qf - self.q0) - 0.5 * a * tr * tr
        return self.q0 + self.sign * d

    def velocity(self, t: float) -> float:
        if self.sign == 0.0 or t <= 0.0 or t >= self.t_total:
            return 0.0
        a, v = self.accel, self.v_peak
        if t < self.t_acc:
            return self.sign * a * t
        if t < self.t_acc + self.t_cruise:
            return self.sign * v
        return self.sign * a * (self.t_total - t)

    def acceleration(self, t: float) -> float:
        if self.sign == 0.0 or t <= 0.0 or t >= self.t_total:
            return 0.0
        if t < self.t_acc:
            return self.sign * self.accel
        if t < self.t_acc + self.t_cruise:
            return 0.0
        return -self.sign * self.accel


class TrapezoidalTrajectory:
    def __init__(self, profiles):
        self.profiles = list(profiles)
        self.duration = max((p.t_total for p in self.profiles), default=0.0)

    def position(self, t: float) -> list:
        return [p.position(t) for p in self.profiles]

    def velocity(self, t: float) -> list:
        return [p.velocity(t) for p in self.profiles]

    def acceleration(self, t: float) -> list:
        return [p.acceleration(t) for p in self.profiles]

    def goal(self) -> list:
        return [p.qf for p in self.profiles]

    def phase_times(self, joint: int) -> list:
        """Interior phase-boundary times (accel end, cruise end)."""
        p = self.profiles[joint]
        if p.sign == 0.0:
            return []
        return [p.t_acc, p.t_acc + p.t_cruise]


def _min_time(d: float, vmax: float, amax: float) -> float:
    if d == 0.0:
        return 0.0
    v_tri = math.sqrt(amax * d)
    if v_tri <= vmax:
        return 2.0 * math.sqrt(d / amax)
    return d / vmax + vmax / amax


def _profile_for_time(q0: float, qf: float, vmax: float, amax: float, T: float) -> _JointProfile:
    d = abs(qf - q0)
    if d == 0.0 or T == 0.0:
        return _JointProfile(q0, qf, 0.0, amax, 0.0, 0.0, 0.0)
    sign = 1.0 if qf > q0 else -1.0
    disc = amax * amax * T * T - 4.0 * amax * d
    if disc < 0.0:
        disc = 0.0  # T equals this joint's minimal triangle time (roundoff)
    v = (amax * T - math.sqrt(disc)) / 2.0
    v = min(v, vmax)
    t_acc = v / amax
    t_cruise = max(T - 2.0 * t_acc, 0.0)
    return _JointProfile(q0, qf, sign, amax, v, t_acc, t_cruise)


def plan_trapezoidal(q0, qf, vmax: float, amax: float) -> TrapezoidalTrajectory:
    if len(q0) != N_JOINTS or len(qf) != N_JOINTS:
        raise PlanInfeasible(f"need {N_JOINTS} joint positions")
    if not (vmax > 0.0) or not (amax > 0.0):
        raise PlanInfeasible(f"vmax and amax must be positive (got {vmax}, {amax})")
    if any(not math.isfinite(x) for x in list(q0) + list(qf)):
        raise PlanInfeasible("non-finite joint positions")
    T = max(_min_time(abs(b - a), vmax, amax) for a, b in zip(q0, qf))
    return TrapezoidalTrajectory(
        _profile_for_time(a, b, vmax, amax, T) for a, b in zip(q0, qf))
