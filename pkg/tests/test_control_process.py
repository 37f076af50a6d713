import struct

import pytest

from spacedream.bus import Bus
from spacedream.clock import SimClock
from spacedream.controller import ControlProcess, unpack_state
from spacedream.controller.fsm import HL, IpolPhase, JointFsm, Mode
from spacedream.controller.process import (
    FLAG_DISABLED,
    FLAG_JOINT_ERROR,
    FLAG_STALE,
    FLAG_TORQUE_INVALID,
    ControllerState,
    pack_state,
)
from spacedream.halsim import HalSim, PlantState
from spacedream.halsim.records import (
    MODE_IMPEDANCE,
    MODE_OFF,
    MODE_POSITION,
    MODE_TORQUE,
    unpack_commands,
)


class Rig:
    """Bus + robot + controller stepped on a simulated clock."""

    def __init__(self, plant=None):
        self.bus = Bus()
        self.clock = SimClock()
        self.hal = HalSim(self.bus, self.clock, plant)
        self.ctl = ControlProcess(self.bus, self.clock)
        self.cmd_sub = self.bus.subscribe("hal/command")
        self.state_sub = self.bus.subscribe("controller/state")

    def step(self, n=1):
        for _ in range(n):
            self.ctl.tick()
            self.clock.advance(0.01)

    def last_commands(self):
        msg = self.cmd_sub.latest()
        self.cmd_sub.drain()
        return unpack_commands(msg[0]) if msg else None

    def last_state(self):
        msg = self.state_sub.latest()
        self.state_sub.drain()
        return unpack_state(msg[0]) if msg else None

    def enable(self):
        self.bus.set_parameter("controller/enable", True)

    def request(self, mode_name):
        self.bus.set_parameter("controller/mode", mode_name)

    def run_until_ready(self, mode_name, max_ticks=100):
        self.enable()
        self.request(mode_name)
        for _ in range(max_ticks):
            self.step()
            st = self.last_state()
            if st.hl == int(HL.READY):
                return st
        raise AssertionError(f"never reached READY: {self.last_state()}")

    def close(self):
        self.bus.shutdown()


@pytest.fixture
def rig():
    r = Rig()
    yield r
    r.close()


def test_state_record_roundtrip():
    s = ControllerState(2, 1, 3, 0x15, (4, 3, 2, 1), 0.125)
    assert unpack_state(pack_state(s)) == s


def test_disabled_by_default_commands_all_off(rig):
    rig.step(50)
    cmds = rig.last_commands()
    assert all(c.mode == MODE_OFF for c in cmds)
    st = rig.last_state()
    assert st.hl == int(HL.INIT)
    assert st.flags & FLAG_DISABLED


def test_bringup_reaches_idle_after_referencing(rig):
    rig.enable()
    rig.step(30)
    st = rig.last_state()
    assert st.hl == int(HL.IDLE)
    assert all(j == int(JointFsm.READY_IMPEDANCE) for j in st.joint_states)


def test_exactly_n_command_sets_in_n_ticks(rig):
    rig.enable()
    before = rig.bus.publish_count("hal/command")
    rig.step(1000)
    assert rig.bus.publish_count("hal/command") - before == 1000


def test_ready_impedance_commands_carry_parameter_setpoint(rig):
    rig.run_until_ready("impedance")
    rig.bus.set_parameter("controller/q_des", [0.3, -0.2, 0.1, 0.0])
    rig.step()
    cmds = rig.last_commands()
    assert all(c.mode == MODE_IMPEDANCE for c in cmds)
    assert [c.q_des for c in cmds] == pytest.approx([0.3, -0.2, 0.1, 0.0])
    assert cmds[0].stiffness == pytest.approx(10.0)


def test_setpoint_is_limit_clamped(rig):
    rig.run_until_ready("position")
    rig.bus.set_parameter("controller/q_des", [3.0, 0.0, 0.0, 0.0])
    rig.step()
    assert rig.last_commands()[0].q_des == pytest.approx(2.7)


def test_mode_switch_within_ready_is_same_cycle(rig):
    rig.run_until_ready("position")
    rig.request("torque")
    rig.step()
    st = rig.last_state()
    assert st.hl == int(HL.READY)
    assert st.mode == int(Mode.MANUAL_TORQUE)
    assert all(c.mode == MODE_TORQUE for c in rig.last_commands())


def test_telemetry_stop_forces_init_within_four_cycles(rig):
    rig.run_until_ready("impedance")
    rig.bus.unsubscribe("hal/command", rig.hal._on_command)  # link goes silent
    rig.step()  # consumes the final in-flight telemetry frame
    rig.step(4)
    st = rig.last_state()
    assert st.hl == int(HL.INIT)
    assert st.flags & FLAG_STALE


def test_joint_error_resets_everything(rig):
    rig.run_until_ready("impedance")
    rig.bus.call_service("hal/fault", b"joint_stuck 1 1")
    rig.step(2)
    st = rig.last_state()
    assert st.hl == int(HL.INIT)
    assert st.flags & FLAG_JOINT_ERROR
    assert st.joint_states[0] in (int(JointFsm.RESETTING), int(JointFsm.REFERENCING))
    # clearing the fault lets the system re-reference and come back
    rig.bus.call_service("hal/fault", b"joint_stuck 1 0")
    rig.step(30)
    assert rig.last_state().hl == int(HL.READY)


def test_torque_sentinel_blocks_torque_mode_only(rig):
    rig.run_until_ready("impedance")
    rig.bus.call_service("hal/fault", b"torque_sensor_invalid 0 1")
    rig.step(3)
    st = rig.last_state()
    assert st.hl == int(HL.READY)  # impedance control keeps running
    assert st.flags & FLAG_TORQUE_INVALID
    # requesting torque mode with an invalid sensor bounces straight back
    # to INIT; while the request persists the mode never holds
    rig.request("torque")
    rig.step(2)
    assert rig.last_state().hl == int(HL.INIT)
    states = []
    for _ in range(9):
        rig.step()
        states.append(rig.last_state().hl)
    for a, b in zip(states, states[1:]):
        assert not (a == int(HL.READY) and b == int(HL.READY))


def test_interpolator_runs_a_goal_to_done(rig):
    rig.run_until_ready("interpolator")
    goal = struct.pack("<6d", 0.4, -0.3, 0.2, 0.1, 0.5, 1.0)
    assert rig.bus.call_service("controller/plan", goal) == b"ok"
    rig.step()
    assert rig.last_state().ipol_phase == int(IpolPhase.PLANNING)
    rig.step()
    assert rig.last_state().ipol_phase == int(IpolPhase.RUNNING)
    assert all(c.mode == MODE_POSITION for c in rig.last_commands())
    rig.step(400)  # travel takes ~1.7 s; allow settle
    st = rig.last_state()
    assert st.ipol_phase == int(IpolPhase.DONE)
    assert rig.hal.plant.q == pytest.approx([0.4, -0.3, 0.2, 0.1], abs=5e-3)


def test_mode_change_resets_interpolator(rig):
    rig.run_until_ready("interpolator")
    goal = struct.pack("<6d", 0.8, 0.0, 0.0, 0.0, 0.2, 0.5)
    rig.bus.call_service("controller/plan", goal)
    rig.step(5)
    assert rig.last_state().ipol_phase == int(IpolPhase.RUNNING)
    rig.request("position")
    rig.step()
    assert rig.last_state().ipol_phase == int(IpolPhase.UNPLANNED)
    # switching back replans from wherever the arm is now
    rig.request("interpolator")
    rig.step(2)
    assert rig.last_state().ipol_phase in (int(IpolPhase.PLANNING), int(IpolPhase.RUNNING))


def test_plan_service_validates(rig):
    from spacedream.controller import PlanInfeasible
    with pytest.raises(PlanInfeasible):
        rig.bus.call_service("controller/plan", b"short")
    with pytest.raises(PlanInfeasible):
        rig.bus.call_service("controller/plan",
                             struct.pack("<6d", 0, 0, 0, 0, 0.0, 1.0))


def test_disable_mid_run_cuts_motors(rig):
    rig.run_until_ready("impedance")
    rig.bus.set_parameter("controller/enable", False)
    rig.step()
    assert all(c.mode == MODE_OFF for c in rig.last_commands())
    assert rig.last_state().hl == int(HL.INIT)


def test_virtual_fixtures_stub_holds_position(rig):
    rig.run_until_ready("virtual_fixtures")
    rig.step(50)
    cmds = rig.last_commands()
    assert all(c.mode == MODE_IMPEDANCE for c in cmds)
    assert [c.q_des for c in cmds] == pytest.approx([0.0] * 4, abs=1e-2)
    assert rig.hal.plant.qdot == pytest.approx([0.0] * 4, abs=1e-3)


def test_closed_loop_impedance_convergence_vs_fine_oracle():
    """Step response through the full loop vs an independent dt=1e-4
    integrator of the same impedance law, friction included."""
    rig = Rig(plant=PlantState(inertia=[1.0, 1.0, 1.0, 1.0]))
    try:
        rig.bus.set_parameter(
            "controller/gains",
            [10.0] * 4 + [3.0] * 4 + [0.1, 20.0])
        rig.run_until_ready("impedance")
        rig.step(5)
        q0 = list(rig.hal.plant.q)
        qdot0 = list(rig.hal.plant.qdot)

        q_des = 0.5
        rig.bus.set_parameter("controller/q_des", [q_des] * 4)
        rig.step(500)  # 5 simulated seconds
        q_coarse = list(rig.hal.plant.q)

        # independent reference: semi-implicit integration at dt=1e-4
        K, D, b, inertia = 10.0, 3.0, 0.05, 1.0
        h = 1e-4
        q, qd = q0[0], qdot0[0]
        for _ in range(int(5.0 / h)):
            tau = K * (q_des - q) - D * qd
            qd += (tau - b * qd) / inertia * h
            q += qd * h

        for j in range(4):
            assert abs(q_coarse[j] - q_des) < 1e-3
        assert abs(q - q_des) < 1e-3
        assert abs(q_coarse[0] - q) < 1e-3
    finally:
        rig.close()


def test_unknown_mode_string_is_ignored(rig):
    rig.run_until_ready("position")
    rig.request("warp_drive")
    rig.step(2)
    st = rig.last_state()
    assert st.mode == int(Mode.MANUAL_POSITION)
    assert rig.ctl.param_errors >= 1


def test_configure_failure_counts_and_recovers(rig):
    rig.bus.call_service("hal/fault", b"link_corrupt_config 0 1")
    rig.enable()
    rig.step(5)
    assert rig.ctl.config_failures >= 5
    assert rig.last_state().hl == int(HL.INIT)
    rig.bus.call_service("hal/fault", b"link_corrupt_config 0 0")
    rig.step(30)
    assert rig.last_state().hl == int(HL.IDLE)
