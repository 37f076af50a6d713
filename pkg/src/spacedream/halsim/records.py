"""Fixed-layout joint records exchanged on the cyclic link.

Telemetry, per joint (little-endian, packed):

    u8   joint_id
    f64  position  [rad]
    f64  velocity  [rad/s]
    f64  torque    [N·m]   (9999.0 when the torque sensor reads invalid)
    u8   status_flags      (bit 0 referenced, bit 1 error, bit 2 motor on)
    u32  cycle_counter

Command, per joint:

    u8   joint_id
    u8   mode               (0 off, 1 position, 2 impedance, 3 torque)
    f64  q_des      [rad]
    f64  tau_des    [N·m]
    f64  stiffness  [N·m/rad]
    f64  damping    [N·m·s/rad]

A full frame carries all four joints back to back.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

N_JOINTS = 4

MODE_OFF = 0
MODE_POSITION = 1
MODE_IMPEDANCE = 2
MODE_TORQUE = 3

FLAG_REFERENCED = 0x01
FLAG_ERROR = 0x02
FLAG_MOTOR_ON = 0x04

# Torque-sensor-invalid sentinel: a finite, absurd value keeps fixed-layout
# records byte-comparable where NaN would poison comparisons.
TORQUE_INVALID = 9999.0

_TELEMETRY = struct.Struct("<B3dBI")
_COMMAND = struct.Struct("<BB4d")

TELEMETRY_FRAME_SIZE = _TELEMETRY.size * N_JOINTS
COMMAND_FRAME_SIZE = _COMMAND.size * N_JOINTS


@dataclass(frozen=True)
class JointTelemetry:
    joint_id: int
    position: float
    velocity: float
    torque: float
    status_flags: int
    cycle_counter: int

    @property
    def referenced(self) -> bool:
        return bool(self.status_flags & FLAG_REFERENCED)

    @property
    def error(self) -> bool:
        return bool(self.status_flags & FLAG_ERROR)

    @property
    def motor_on(self) -> bool:
        return bool(self.status_flags & FLAG_MOTOR_ON)


@dataclass(frozen=True)
class JointCommand:
    joint_id: int
    mode: int = MODE_OFF
    q_des: float = 0.0
    tau_des: float = 0.0
    stiffness: float = 0.0
    damping: float = 0.0


def pack_telemetry(frames) -> bytes:
    out = bytearray()
    for t in frames:
        out += _TELEMETRY.pack(t.joint_id, t.position, t.velocity, t.torque,
                               t.status_flags, t.cycle_counter)
    return bytes(out)


def unpack_telemetry(data: bytes) -> list:
    if len(data) != TELEMETRY_FRAME_SIZE:
        raise ValueError(f"telemetry frame must be {TELEMETRY_FRAME_SIZE} bytes, got {len(data)}")
    return [JointTelemetry(*_TELEMETRY.unpack_from(data, i * _TELEMETRY.size))
            for i in range(N_JOINTS)]


def pack_commands(commands) -> bytes:
    out = bytearray()
    for c in commands:
        out += _COMMAND.pack(c.joint_id, c.mode, c.q_des, c.tau_des,
                             c.stiffness, c.damping)
    return bytes(out)


def unpack_commands(data: bytes) -> list:
    if len(data) != COMMAND_FRAME_SIZE:
        raise ValueError(f"command frame must be {COMMAND_FRAME_SIZE} bytes, got {len(data)}")
    return [JointCommand(*_COMMAND.unpack_from(data, i * _COMMAND.size))
            for i in range(N_JOINTS)]
