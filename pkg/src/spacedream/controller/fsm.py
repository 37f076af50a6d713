"""Hierarchical control state machines.

Three layers, stepped once per control cycle:

* high level: INIT -> IDLE -> READY(mode). INIT holds until every joint
  reports referenced. Entering READY always happens from IDLE; once in
  READY, requested mode changes apply within the same cycle. Any error
  drops straight back to INIT and emits a joint reset trigger.
* interpolator: UNPLANNED -> PLANNING (one visible cycle) -> RUNNING ->
  DONE. Leaving interpolator mode, or any controller mode change while
  planning or running, resets it to UNPLANNED so re-entry replans from
  the current position.
* per joint: RESETTING -> REFERENCING -> READY_<controller>. READY state
  follows the active controller immediately; a reset trigger sends every
  joint back to RESETTING.

The source figures only caption these machines; the exact transition
sets here are this project's completion of them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .trajectory import PlanInfeasible, TrapezoidalTrajectory, plan_trapezoidal

N_JOINTS = 4


class HL(enum.IntEnum):
    INIT = 0
    IDLE = 1
    READY = 2


class Mode(enum.IntEnum):
    MANUAL_POSITION = 0
    MANUAL_IMPEDANCE = 1
    MANUAL_TORQUE = 2
    INTERPOLATOR = 3
    VIRTUAL_FIXTURES = 4


class IpolPhase(enum.IntEnum):
    UNPLANNED = 0
    PLANNING = 1
    RUNNING = 2
    DONE = 3


class JointFsm(enum.IntEnum):
    RESETTING = 0
    REFERENCING = 1
    READY_POSITION = 2
    READY_IMPEDANCE = 3
    READY_TORQUE = 4


# Which joint-level controller each high-level mode needs.
JOINT_READY_FOR_MODE = {
    Mode.MANUAL_POSITION: JointFsm.READY_POSITION,
    Mode.MANUAL_IMPEDANCE: JointFsm.READY_IMPEDANCE,
    Mode.MANUAL_TORQUE: JointFsm.READY_TORQUE,
    Mode.INTERPOLATOR: JointFsm.READY_POSITION,
    Mode.VIRTUAL_FIXTURES: JointFsm.READY_IMPEDANCE,
}


@dataclass(frozen=True)
class HighLevelState:
    state: HL = HL.INIT
    ready_mode: Mode | None = None  # meaningful only when state == READY


def hl_step(s: HighLevelState, all_referenced: bool,
            requested: Mode | None, error: bool) -> tuple[HighLevelState, bool]:
    """One high-level transition. Returns (new state, joint reset trigger)."""
    if error:
        trigger = s.state is not HL.INIT
        return HighLevelState(HL.INIT, None), trigger
    if s.state is HL.INIT:
        if all_referenced:
            return HighLevelState(HL.IDLE, None), False
        return s, False
    if s.state is HL.IDLE:
        if requested is not None:
            return HighLevelState(HL.READY, requested), False
        return s, False
    # READY: mode switches are immediate, idle request drops out
    if requested is None:
        return HighLevelState(HL.IDLE, None), False
    if requested is not s.ready_mode:
        return HighLevelState(HL.READY, requested), False
    return s, False


def joint_step(state: JointFsm, referenced: bool, joint_error: bool,
               reset: bool, target: JointFsm) -> JointFsm:
    """One per-joint transition toward `target` (a READY_* state)."""
    if reset:
        return JointFsm.RESETTING
    if state is JointFsm.RESETTING:
        return JointFsm.RESETTING if joint_error else JointFsm.REFERENCING
    if not referenced:
        # lost the reference (e.g. robot power cycle): go find it again
        return JointFsm.REFERENCING
    return target  # READY_* follows the active controller immediately


@dataclass(frozen=True)
class InterpolatorState:
    phase: IpolPhase = IpolPhase.UNPLANNED
    trajectory: TrapezoidalTrajectory | None = None
    t0: float = 0.0
    goal: tuple | None = None  # (qf tuple, vmax, amax)

    def with_goal(self, qf, vmax: float, amax: float) -> "InterpolatorState":
        """A new goal always forces a replan."""
        return InterpolatorState(IpolPhase.UNPLANNED, None, 0.0,
                                 (tuple(qf), float(vmax), float(amax)))


def ipol_step(s: InterpolatorState, active: bool, mode_changed: bool,
              q_current, now: float) -> tuple[InterpolatorState, list | None]:
    """One interpolator transition.

    `active` is true while the high level runs the interpolator mode;
    `mode_changed` is true on any controller mode change this cycle.
    Returns (new state, joint position targets or None). None means the
    caller holds position (the idle behavior), which also covers the
    PLANNING cycle.
    """
    if mode_changed and s.phase in (IpolPhase.PLANNING, IpolPhase.RUNNING):
        s = InterpolatorState(IpolPhase.UNPLANNED, None, 0.0, s.goal)
    if not active:
        if s.phase is not IpolPhase.UNPLANNED:
            s = InterpolatorState(IpolPhase.UNPLANNED, None, 0.0, s.goal)
        return s, None

    if s.phase is IpolPhase.UNPLANNED:
        if s.goal is None:
            return s, None
        return replace(s, phase=IpolPhase.PLANNING), None
    if s.phase is IpolPhase.PLANNING:
        qf, vmax, amax = s.goal
        trajectory = plan_trapezoidal(list(q_current), list(qf), vmax, amax)
        s = InterpolatorState(IpolPhase.RUNNING, trajectory, now, s.goal)
        return s, trajectory.position(0.0)
    if s.phase is IpolPhase.RUNNING:
        t = now - s.t0
        if t >= s.trajectory.duration:
            return replace(s, phase=IpolPhase.DONE), s.trajectory.goal()
        return s, s.trajectory.position(t)
    return s, s.trajectory.goal()  # DONE holds the goal


__all__ = [
    "HL",
    "HighLevelState",
    "InterpolatorState",
    "IpolPhase",
    "JOINT_READY_FOR_MODE",
    "JointFsm",
    "Mode",
    "PlanInfeasible",
    "hl_step",
    "ipol_step",
    "joint_step",
]
