"""Framed cyclic link and the simulated robot behind it.

The link enforces the session protocol: configuration first, then cyclic
command/telemetry exchange. Each cycle applies one command per joint,
advances the plant by one control period and returns post-step telemetry.

Joint electronics close their own mode loop locally (off, position,
impedance, torque); the applied torque then drives the shared
double-integrator plant. Position mode runs a stiff critically damped
servo sized from the joint inertia.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .plant import DT, FRICTION_B, HARD_LIMIT, PlantState, step_plant
from .records import (
    FLAG_ERROR,
    FLAG_MOTOR_ON,
    FLAG_REFERENCED,
    MODE_IMPEDANCE,
    MODE_OFF,
    MODE_POSITION,
    MODE_TORQUE,
    N_JOINTS,
    TORQUE_INVALID,
    JointTelemetry,
    pack_telemetry,
    unpack_commands,
)

FAULT_TORQUE_SENSOR = "torque_sensor_invalid"
FAULT_JOINT_STUCK = "joint_stuck"
FAULT_CORRUPT_CONFIG = "link_corrupt_config"
FAULT_KINDS = (FAULT_TORQUE_SENSOR, FAULT_JOINT_STUCK, FAULT_CORRUPT_CONFIG)

REFERENCE_CYCLES = 10  # motor-on cycles until a joint reports referenced

# Internal position-mode servo gains, per unit inertia: omega_n = 20 rad/s,
# critically damped. Stable at the 100 Hz step (omega_n * dt = 0.2).
POSITION_OMEGA = 20.0


class LinkError(Exception):
    pass


class ProtocolViolation(LinkError):
    pass


class ConfigRejected(LinkError):
    pass


class CommandOutOfRange(LinkError):
    pass


class UnknownJoint(LinkError):
    pass


class UnknownFault(LinkError):
    pass


@dataclass(frozen=True)
class FaultInjection:
    kind: str
    joint_id: int = 0
    active: bool = True

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise UnknownFault(self.kind)
        if not 0 <= self.joint_id < N_JOINTS:
            raise UnknownJoint(str(self.joint_id))


class CyclicLink:
    def __init__(self, plant: PlantState | None = None):
        self.plant = plant if plant is not None else PlantState()
        self.configured = False
        self.cycle_counters = [0] * N_JOINTS
        self._reference_progress = [0] * N_JOINTS
        self._referenced = [False] * N_JOINTS
        self._faults: set[tuple[str, int]] = set()
        self.last_applied_torque = [0.0] * N_JOINTS

    # -- faults -----------------------------------------------------------

    def inject_fault(self, fault: FaultInjection) -> None:
        key = (fault.kind, fault.joint_id)
        if fault.active:
            self._faults.add(key)
        else:
            self._faults.discard(key)

    def fault_active(self, kind: str, joint_id: int = 0) -> bool:
        return (kind, joint_id) in self._faults

    def _any_fault(self, kind: str) -> bool:
        return any(k == kind for k, _ in self._faults)

    # -- session ----------------------------------------------------------

    def configure(self) -> None:
        if self._any_fault(FAULT_CORRUPT_CONFIG):
            raise ConfigRejected("configuration frame rejected by link")
        self.configured = True
        self.cycle_counters = [0] * N_JOINTS

    def cycle(self, commands) -> list:
        if not self.configured:
            raise ProtocolViolation("cyclic exchange before configuration")
        if sorted(c.joint_id for c in commands) != list(range(N_JOINTS)):
            raise ProtocolViolation("need exactly one command per joint")
        by_joint = {c.joint_id: c for c in commands}

        torques = [self._applied_torque(j, by_joint[j]) for j in range(N_JOINTS)]
        for j in range(N_JOINTS):
            if by_joint[j].mode != MODE_OFF and not self._referenced[j]:
                self._reference_progress[j] += 1
                if self._reference_progress[j] >= REFERENCE_CYCLES:
                    self._referenced[j] = True

        stuck = [self.fault_active(FAULT_JOINT_STUCK, j) for j in range(N_JOINTS)]
        new_plant = step_plant(self.plant, torques)
        for j in range(N_JOINTS):
            if stuck[j]:
                new_plant.q[j] = self.plant.q[j]
                new_plant.qdot[j] = 0.0
        self.plant = new_plant
        self.last_applied_torque = torques

        out = []
        for j in range(N_JOINTS):
            self.cycle_counters[j] += 1
            flags = 0
            if self._referenced[j]:
                flags |= FLAG_REFERENCED
            if stuck[j]:
                flags |= FLAG_ERROR
            if by_joint[j].mode != MODE_OFF:
                flags |= FLAG_MOTOR_ON
            torque = TORQUE_INVALID if self.fault_active(FAULT_TORQUE_SENSOR, j) else torques[j]
            out.append(JointTelemetry(
                joint_id=j,
                position=self.plant.q[j],
                velocity=self.plant.qdot[j],
                torque=torque,
                status_flags=flags,
                cycle_counter=self.cycle_counters[j],
            ))
        return out

    def _applied_torque(self, j: int, cmd) -> float:
        if cmd.joint_id != j:
            raise ProtocolViolation("command order mismatch")
        if cmd.mode == MODE_OFF:
            return 0.0
        if cmd.mode not in (MODE_POSITION, MODE_IMPEDANCE, MODE_TORQUE):
            raise CommandOutOfRange(f"joint {j}: unknown mode {cmd.mode}")
        if cmd.stiffness < 0 or cmd.damping < 0:
            raise CommandOutOfRange(f"joint {j}: negative gains")
        for value in (cmd.q_des, cmd.tau_des, cmd.stiffness, cmd.damping):
            if not math.isfinite(value):
                raise CommandOutOfRange(f"joint {j}: non-finite command value")
        q = self.plant.q[j]
        qdot = self.plant.qdot[j]
        if cmd.mode == MODE_TORQUE:
            return cmd.tau_des
        if cmd.mode == MODE_IMPEDANCE:
            return cmd.stiffness * (cmd.q_des - q) - cmd.damping * qdot
        inertia = self.plant.inertia[j]
        k = POSITION_OMEGA * POSITION_OMEGA * inertia
        d = 2.0 * POSITION_OMEGA * inertia
        return k * (cmd.q_des - q) - d * qdot


class HalSim:
    """Bus-facing wrapper: command topic in, telemetry topic out.

    Cycling is synchronous inside the command subscription so one
    published command frame yields exactly one telemetry frame, keeping
    the simulation deterministic.
    """

    TELEMETRY_TOPIC = "hal/telemetry"
    COMMAND_TOPIC = "hal/command"
    CONFIGURE_SERVICE = "hal/configure"
    FAULT_SERVICE = "hal/fault"

    def __init__(self, bus, clock, plant: PlantState | None = None):
        from ..bus import ServiceSpec, TopicSpec

        self.link = CyclicLink(plant)
        self.bus = bus
        self.clock = clock
        self.protocol_errors = 0
        bus.register_topic(TopicSpec(self.TELEMETRY_TOPIC, "JointTelemetry[4]", 100.0))
        bus.register_topic(TopicSpec(self.COMMAND_TOPIC, "JointCommand[4]", 100.0))
        bus.subscribe(self.COMMAND_TOPIC, self._on_command)
        bus.register_service(ServiceSpec(self.CONFIGURE_SERVICE), self._on_configure,
                             inline=True)
        bus.register_service(ServiceSpec(self.FAULT_SERVICE), self._on_fault, inline=True)

    @property
    def plant(self) -> PlantState:
        return self.link.plant

    def _on_command(self, payload: bytes, stamp: float) -> None:
        try:
            telemetry = self.link.cycle(unpack_commands(payload))
        except (LinkError, ValueError):
            self.protocol_errors += 1
            return
        self.bus.publish(self.TELEMETRY_TOPIC, pack_telemetry(telemetry), self.clock.now())

    def _on_configure(self, request: bytes) -> bytes:
        self.link.configure()
        return b"ok"

    def _on_fault(self, request: bytes) -> bytes:
        # request: "<kind> <joint_id> <0|1>"
        parts = request.decode("utf-8").split()
        if len(parts) != 3:
            raise UnknownFault(f"bad fault request {request!r}")
        kind, joint_s, active_s = parts
        try:
            joint_id = int(joint_s)
        except ValueError:
            raise UnknownJoint(joint_s) from None
        self.link.inject_fault(FaultInjection(kind, joint_id, active_s == "1"))
        return b"ok"
