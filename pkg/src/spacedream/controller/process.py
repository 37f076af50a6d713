"""The 100 Hz control process.

One tick() per control period: read the freshest telemetry, step the
three state machines, synthesize one command frame, publish it together
with a controller state record. Parameter changes are read once per tick
so they apply at cycle boundaries only.

Safety gate: the "controller/enable" parameter defaults to false and
forces motor-off commands plus an INIT state while cleared. The mission
logic only sets it after a flight start command; a ground test therefore
never produces a single motion command.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from ..bus import ServiceSpec, TopicSpec
from ..halsim.records import (
    MODE_IMPEDANCE,
    MODE_OFF,
    MODE_POSITION,
    MODE_TORQUE,
    N_JOINTS,
    TORQUE_INVALID,
    JointCommand,
    pack_commands,
    unpack_telemetry,
)
from .fsm import (
    HL,
    JOINT_READY_FOR_MODE,
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
from .laws import GainConfig, apply_limit_avoidance

DT = 0.01
STALE_CYCLES = 3  # telemetry older than this many cycles is an error

MODE_NAMES = {
    "idle": None,
    "position": Mode.MANUAL_POSITION,
    "impedance": Mode.MANUAL_IMPEDANCE,
    "torque": Mode.MANUAL_TORQUE,
    "interpolator": Mode.INTERPOLATOR,
    "virtual_fixtures": Mode.VIRTUAL_FIXTURES,
}

# controller/state flag bits
FLAG_STALE = 0x01
FLAG_JOINT_ERROR = 0x02
FLAG_TORQUE_INVALID = 0x04
FLAG_PLAN_ERROR = 0x08
FLAG_DISABLED = 0x10
FLAG_LINK_DOWN = 0x20

_STATE = struct.Struct("<BBBB4Bd")
_DEBUG = struct.Struct("<16d")

_MODE_NONE = 255


@dataclass(frozen=True)
class ControllerState:
    hl: int
    mode: int  # 255 when not in READY
    ipol_phase: int
    flags: int
    joint_states: tuple
    tracking_error: float


def pack_state(s: ControllerState) -> bytes:
    return _STATE.pack(s.hl, s.mode, s.ipol_phase, s.flags,
                       *s.joint_states, s.tracking_error)


def unpack_state(data: bytes) -> ControllerState:
    hl, mode, phase, flags, j0, j1, j2, j3, err = _STATE.unpack(data)
    return ControllerState(hl, mode, phase, flags, (j0, j1, j2, j3), err)


class ControlProcess:
    STATE_TOPIC = "controller/state"
    DEBUG_TOPIC = "controller/debug"
    PLAN_SERVICE = "controller/plan"

    def __init__(self, bus, clock, dt: float = DT):
        self.bus = bus
        self.clock = clock
        self.dt = dt
        self.commands_published = 0
        self.param_errors = 0

        self.hl = HighLevelState()
        self.joints = [JointFsm.RESETTING] * N_JOINTS
        self.ipol = InterpolatorState()
        self.gains = GainConfig()
        self.config_failures = 0
        self._configured = False

        self._telemetry = None
        self._missed = 0
        self._seen_any = False
        self._prev_effective: Mode | None = None
        self._hold_ctx = None
        self._hold_used = False
        self._hold_q = [0.0] * N_JOINTS
        self._last_goal_param = None
        self._last_mode_param = "idle"
        self._requested: Mode | None = None

        bus.register_topic(TopicSpec("hal/telemetry", "JointTelemetry[4]", 100.0))
        bus.register_topic(TopicSpec("hal/command", "JointCommand[4]", 100.0))
        bus.register_topic(TopicSpec(self.STATE_TOPIC, "ControllerState", 100.0))
        bus.register_topic(TopicSpec(self.DEBUG_TOPIC, "ControllerDebug", 100.0))
        self._telemetry_sub = bus.subscribe("hal/telemetry")

        bus.declare_parameter("controller/enable", False)
        bus.declare_parameter("controller/mode", "idle")
        bus.declare_parameter("controller/q_des", [0.0] * N_JOINTS)
        bus.declare_parameter("controller/tau_des", [0.0] * N_JOINTS)
        bus.declare_parameter("controller/gains", self.gains.as_array())
        bus.declare_parameter("controller/goal", [0.0] * N_JOINTS + [0.0, 0.0])
        bus.register_service(ServiceSpec(self.PLAN_SERVICE), self._on_plan, inline=True)

    # -- services ----------------------------------------------------------

    def _on_plan(self, request: bytes) -> bytes:
        if len(request) != 48:
            raise PlanInfeasible("plan request must be 6 doubles (qf[4], vmax, amax)")
        values = list(struct.unpack("<6d", request))
        qf, vmax, amax = values[:N_JOINTS], values[N_JOINTS], values[N_JOINTS + 1]
        if not (vmax > 0.0 and amax > 0.0):
            raise PlanInfeasible(f"vmax and amax must be positive (got {vmax}, {amax})")
        if any(not math.isfinite(x) for x in qf):
            raise PlanInfeasible("non-finite goal")
        self.bus.set_parameter("controller/goal", values)
        return b"ok"

    # -- per-tick helpers ----------------------------------------------------

    def _intake_telemetry(self):
        msgs = self._telemetry_sub.drain()
        if msgs:
            self._telemetry = unpack_telemetry(msgs[-1][0])
            self._missed = 0
            self._seen_any = True
        elif self._seen_any:
            self._missed += 1

    def _read_params(self):
        mode_name = self.bus.get_parameter("controller/mode")
        if mode_name != self._last_mode_param:
            if mode_name in MODE_NAMES:
                self._requested = MODE_NAMES[mode_name]
                self._last_mode_param = mode_name
            else:
                self.param_errors += 1
        try:
            self.gains = GainConfig.from_array(self.bus.get_parameter("controller/gains"))
        except ValueError:
            self.param_errors += 1
        goal = list(self.bus.get_parameter("controller/goal"))
        if goal != self._last_goal_param:
            self._last_goal_param = goal
            if any(abs(v) > 0.0 for v in goal[N_JOINTS:]):
                self.ipol = self.ipol.with_goal(goal[:N_JOINTS],
                                                goal[N_JOINTS], goal[N_JOINTS + 1])

    def _current_q(self) -> list:
        if self._telemetry is None:
            return [0.0] * N_JOINTS
        return [t.position for t in self._telemetry]

    def _hold_target(self, ctx: str) -> list:
        """Position captured when `ctx` began; recaptured per hold context."""
        self._hold_used = True
        if self._hold_ctx != ctx:
            self._hold_ctx = ctx
            self._hold_q = self._current_q()
        return self._hold_q

    # -- the cycle ------------------------------------------------------------

    def tick(self) -> None:
        now = self.clock.now()
        self._intake_telemetry()
        self._read_params()

        enabled = bool(self.bus.get_parameter("controller/enable"))
        flags = 0
        if not enabled:
            self.hl = HighLevelState()
            self.joints = [JointFsm.RESETTING] * N_JOINTS
            self.ipol = InterpolatorState(goal=self.ipol.goal)
            self._prev_effective = None
            self._hold_ctx = None
            flags |= FLAG_DISABLED
            self._publish(now, [JointCommand(j, MODE_OFF) for j in range(N_JOINTS)],
                          flags)
            return

        if not self._configured:
            try:
                self.bus.call_service("hal/configure", b"")
                self._configured = True
            except Exception:
                self.config_failures += 1
                flags |= FLAG_LINK_DOWN

        stale = self._seen_any and self._missed > STALE_CYCLES
        joint_error = bool(self._telemetry) and any(t.error for t in self._telemetry)
        torque_invalid = bool(self._telemetry) and any(
            t.torque == TORQUE_INVALID for t in self._telemetry)
        in_torque_mode = (self.hl.state is HL.READY
                          and self.hl.ready_mode is Mode.MANUAL_TORQUE)
        error = stale or joint_error or (torque_invalid and in_torque_mode)
        if stale:
            flags |= FLAG_STALE
        if joint_error:
            flags |= FLAG_JOINT_ERROR
        if torque_invalid:
            flags |= FLAG_TORQUE_INVALID

        all_referenced = bool(self._telemetry) and all(
            t.referenced for t in self._telemetry)
        self.hl, reset_trigger = hl_step(self.hl, all_referenced, self._requested, error)

        effective = self.hl.ready_mode if self.hl.state is HL.READY else None
        mode_changed = effective is not self._prev_effective
        self._prev_effective = effective

        target = JOINT_READY_FOR_MODE.get(effective, JointFsm.READY_IMPEDANCE)
        for j in range(N_JOINTS):
            t = self._telemetry[j] if self._telemetry else None
            self.joints[j] = joint_step(
                self.joints[j],
                referenced=bool(t and t.referenced),
                joint_error=bool(t and t.error),
                reset=reset_trigger,
                target=target,
            )

        ipol_targets = None
        try:
            self.ipol, ipol_targets = ipol_step(
                self.ipol, active=effective is Mode.INTERPOLATOR,
                mode_changed=mode_changed, q_current=self._current_q(), now=now)
        except PlanInfeasible:
            flags |= FLAG_PLAN_ERROR
            self.ipol = InterpolatorState()  # drop the bad goal

        commands = self._synthesize(effective, ipol_targets)
        commands = apply_limit_avoidance(commands, self._current_q(), self.gains)
        self._publish(now, commands, flags)

    def _synthesize(self, effective: Mode | None, ipol_targets) -> list:
        if self._telemetry is None:
            # no joint data yet: any position or impedance target would be
            # a guess that can slam the arm from wherever it actually is
            return [JointCommand(j, MODE_OFF) for j in range(N_JOINTS)]
        q_des_param = list(self.bus.get_parameter("controller/q_des"))
        tau_param = list(self.bus.get_parameter("controller/tau_des"))
        q_now = self._current_q()
        self._hold_used = False
        commands = []
        for j in range(N_JOINTS):
            state = self.joints[j]
            if state is JointFsm.RESETTING:
                commands.append(JointCommand(j, MODE_OFF))
            elif state is JointFsm.REFERENCING:
                commands.append(JointCommand(j, MODE_POSITION, q_des=q_now[j]))
            elif state is JointFsm.READY_POSITION:
                if effective is Mode.INTERPOLATOR:
                    target = (ipol_targets[j] if ipol_targets is not None
                              else self._hold_target("ipol")[j])
                else:
                    target = q_des_param[j]
                commands.append(JointCommand(j, MODE_POSITION, q_des=target))
            elif state is JointFsm.READY_TORQUE:
                commands.append(JointCommand(j, MODE_TORQUE, tau_des=tau_param[j]))
            else:  # READY_IMPEDANCE: manual, virtual-fixtures stub, or idle hold
                if effective is Mode.MANUAL_IMPEDANCE:
                    target = q_des_param[j]
                elif effective is Mode.VIRTUAL_FIXTURES:
                    target = self._hold_target("vf")[j]
                else:
                    target = self._hold_target("idle")[j]
                commands.append(JointCommand(
                    j, MODE_IMPEDANCE, q_des=target,
                    stiffness=self.gains.stiffness[j], damping=self.gains.damping[j]))
        if not self._hold_used:
            self._hold_ctx = None  # next hold recaptures from live telemetry
        return commands

    def _publish(self, now: float, commands, flags: int) -> None:
        self.bus.publish("hal/command", pack_commands(commands), now)
        self.commands_published += 1

        q_now = self._current_q()
        qdot_now = ([t.velocity for t in self._telemetry]
                    if self._telemetry else [0.0] * N_JOINTS)
        tracking = 0.0
        q_des_dbg, tau_dbg = [], []
        for c in commands:
            if c.mode in (MODE_POSITION, MODE_IMPEDANCE):
                tracking = max(tracking, abs(c.q_des - q_now[c.joint_id]))
                q_des_dbg.append(c.q_des)
            else:
                q_des_dbg.append(q_now[c.joint_id])
            tau_dbg.append(c.tau_des if c.mode == MODE_TORQUE else 0.0)

        state = ControllerState(
            hl=int(self.hl.state),
            mode=int(self.hl.ready_mode) if self.hl.ready_mode is not None else _MODE_NONE,
            ipol_phase=int(self.ipol.phase),
            flags=flags,
            joint_states=tuple(int(s) for s in self.joints),
            tracking_error=tracking,
        )
        self.bus.publish(self.STATE_TOPIC, pack_state(state), now)
        self.bus.publish(self.DEBUG_TOPIC,
                         _DEBUG.pack(*q_now, *qdot_now, *q_des_dbg, *tau_dbg), now)
