import random

import pytest

from spacedream.controller.fsm import (
    HL,
    HighLevelState,
    InterpolatorState,
    IpolPhase,
    JointFsm,
    Mode,
    PlanInfeasible,
    hl_step,
    ipol_step,
    joint_step,
)


# -- high level ---------------------------------------------------------------


def test_init_holds_until_all_referenced():
    s = HighLevelState()
    s, trig = hl_step(s, all_referenced=False, requested=Mode.MANUAL_POSITION, error=False)
    assert s.state is HL.INIT and not trig
    s, trig = hl_step(s, all_referenced=True, requested=None, error=False)
    assert s.state is HL.IDLE


def test_idle_to_ready_on_request():
    s = HighLevelState(HL.IDLE)
    s, _ = hl_step(s, True, Mode.MANUAL_IMPEDANCE, False)
    assert s == HighLevelState(HL.READY, Mode.MANUAL_IMPEDANCE)


def test_ready_mode_switch_is_immediate_and_stays_ready():
    s = HighLevelState(HL.READY, Mode.MANUAL_POSITION)
    s, _ = hl_step(s, True, Mode.MANUAL_IMPEDANCE, False)
    assert s.state is HL.READY
    assert s.ready_mode is Mode.MANUAL_IMPEDANCE


def test_ready_idle_request_drops_to_idle():
    s = HighLevelState(HL.READY, Mode.INTERPOLATOR)
    s, _ = hl_step(s, True, None, False)
    assert s == HighLevelState(HL.IDLE, None)


def test_error_resets_to_init_with_trigger():
    for start in (HighLevelState(HL.READY, Mode.MANUAL_TORQUE), HighLevelState(HL.IDLE)):
        s, trig = hl_step(start, True, Mode.MANUAL_TORQUE, error=True)
        assert s == HighLevelState(HL.INIT, None)
        assert trig
    # already resetting: no second trigger
    s, trig = hl_step(HighLevelState(HL.INIT), False, None, error=True)
    assert s.state is HL.INIT and not trig


def test_ready_entry_always_comes_from_idle():
    """Random walks never enter READY except from IDLE, and READY-internal
    mode changes never leave READY."""
    rng = random.Random(99)
    modes = list(Mode) + [None]
    for _ in range(2000):
        s = HighLevelState()
        prev = s
        for _ in range(50):
            nxt, _ = hl_step(s, rng.random() < 0.7, rng.choice(modes), rng.random() < 0.05)
            if nxt.state is HL.READY and s.state is not HL.READY:
                assert s.state is HL.IDLE
            if s.state is HL.READY and nxt.state is HL.READY:
                pass  # mode switch stayed in READY as required
            prev, s = s, nxt


# -- joint level --------------------------------------------------------------


def test_joint_reset_referencing_ready_sequence():
    s = JointFsm.RESETTING
    s = joint_step(s, referenced=False, joint_error=False, reset=False,
                   target=JointFsm.READY_POSITION)
    assert s is JointFsm.REFERENCING
    # stays referencing until the flag arrives
    s = joint_step(s, False, False, False, JointFsm.READY_POSITION)
    assert s is JointFsm.REFERENCING
    s = joint_step(s, True, False, False, JointFsm.READY_POSITION)
    assert s is JointFsm.READY_POSITION


def test_joint_error_holds_resetting():
    s = joint_step(JointFsm.RESETTING, False, True, False, JointFsm.READY_TORQUE)
    assert s is JointFsm.RESETTING


def test_joint_ready_follows_controller():
    s = joint_step(JointFsm.READY_POSITION, True, False, False, JointFsm.READY_IMPEDANCE)
    assert s is JointFsm.READY_IMPEDANCE


def test_joint_reset_trigger_wins():
    s = joint_step(JointFsm.READY_TORQUE, True, False, True, JointFsm.READY_TORQUE)
    assert s is JointFsm.RESETTING


def test_joint_lost_reference_goes_back_to_referencing():
    s = joint_step(JointFsm.READY_IMPEDANCE, False, False, False, JointFsm.READY_IMPEDANCE)
    assert s is JointFsm.REFERENCING


def test_joint_never_ready_without_referenced_flag():
    rng = random.Random(3)
    targets = [JointFsm.READY_POSITION, JointFsm.READY_IMPEDANCE, JointFsm.READY_TORQUE]
    for _ in range(2000):
        s = JointFsm.RESETTING
        for _ in range(30):
            referenced = rng.random() < 0.5
            s = joint_step(s, referenced, rng.random() < 0.1,
                           rng.random() < 0.05, rng.choice(targets))
            if s in targets:
                assert referenced


# -- interpolator -------------------------------------------------------------


def q4(x=0.0):
    return [x] * 4


def test_goal_then_planning_then_running():
    s = InterpolatorState().with_goal([1.0, 0, 0, 0], vmax=1.0, amax=1.0)
    assert s.phase is IpolPhase.UNPLANNED
    s, targets = ipol_step(s, active=True, mode_changed=False, q_current=q4(), now=0.0)
    assert s.phase is IpolPhase.PLANNING
    assert targets is None  # planning cycle holds position
    s, targets = ipol_step(s, True, False, q4(), 0.01)
    assert s.phase is IpolPhase.RUNNING
    assert targets == pytest.approx(q4())


def test_running_reaches_done_and_holds_goal():
    s = InterpolatorState().with_goal([1.0, 0, 0, 0], 1.0, 1.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    assert s.trajectory.duration == pytest.approx(2.0)
    s, targets = ipol_step(s, True, False, q4(), 1.0)
    assert s.phase is IpolPhase.RUNNING
    assert 0.0 < targets[0] < 1.0
    s, targets = ipol_step(s, True, False, q4(), 2.5)
    assert s.phase is IpolPhase.DONE
    assert targets[0] == pytest.approx(1.0, abs=1e-12)
    s, targets = ipol_step(s, True, False, q4(), 99.0)
    assert s.phase is IpolPhase.DONE
    assert targets[0] == pytest.approx(1.0, abs=1e-12)


def test_mode_change_while_running_resets_and_replans_from_current_q():
    s = InterpolatorState().with_goal([1.0, 0, 0, 0], 1.0, 1.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    assert s.phase is IpolPhase.RUNNING
    # controller switched away mid-motion
    s, targets = ipol_step(s, False, True, q4(0.4), 1.0)
    assert s.phase is IpolPhase.UNPLANNED
    assert targets is None
    # switched back: replans starting at the current position
    s, _ = ipol_step(s, True, False, q4(0.4), 2.0)
    assert s.phase is IpolPhase.PLANNING
    s, targets = ipol_step(s, True, False, q4(0.4), 2.01)
    assert s.phase is IpolPhase.RUNNING
    assert targets[0] == pytest.approx(0.4, abs=1e-12)
    assert s.trajectory.goal()[0] == pytest.approx(1.0)


def test_mode_change_away_while_planning_resets():
    s = InterpolatorState().with_goal([1.0, 0, 0, 0], 1.0, 1.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    assert s.phase is IpolPhase.PLANNING
    s, targets = ipol_step(s, False, True, q4(), 0.01)
    assert s.phase is IpolPhase.UNPLANNED
    assert s.trajectory is None
    assert targets is None


def test_inactive_without_goal_stays_unplanned():
    s = InterpolatorState()
    s, targets = ipol_step(s, True, False, q4(), 0.0)
    assert s.phase is IpolPhase.UNPLANNED and targets is None


def test_infeasible_goal_raises_at_planning():
    s = InterpolatorState().with_goal([1.0, 0, 0, 0], vmax=0.0, amax=1.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    with pytest.raises(PlanInfeasible):
        ipol_step(s, True, False, q4(), 0.01)


def test_new_goal_during_done_replans():
    s = InterpolatorState().with_goal([0.5, 0, 0, 0], 1.0, 1.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    s, _ = ipol_step(s, True, False, q4(), 0.0)
    s, _ = ipol_step(s, True, False, q4(), 10.0)
    assert s.phase is IpolPhase.DONE
    s = s.with_goal([-0.5, 0, 0, 0], 1.0, 1.0)
    assert s.phase is IpolPhase.UNPLANNED
    s, _ = ipol_step(s, True, False, q4(0.5), 11.0)
    assert s.phase is IpolPhase.PLANNING


def test_interpolator_reset_property_random_walk():
    """Any mode change while PLANNING or RUNNING lands in UNPLANNED next step."""
    rng = random.Random(17)
    for _ in range(500):
        s = InterpolatorState().with_goal([rng.uniform(-1, 1)] + [0.0] * 3, 0.5, 1.0)
        now = 0.0
        for _ in range(40):
            active = rng.random() < 0.8
            changed = rng.random() < 0.2
            was = s.phase
            try:
                s, _ = ipol_step(s, active, changed, q4(), now)
            except PlanInfeasible:
                raise AssertionError("feasible goal must not raise")
            if changed and was in (IpolPhase.PLANNING, IpolPhase.RUNNING):
                if not active:
                    assert s.phase is IpolPhase.UNPLANNED
                else:
                    # reset happened, then UNPLANNED may advance to PLANNING
                    assert s.phase in (IpolPhase.UNPLANNED, IpolPhase.PLANNING)
            now += 0.01
