"""Joint impedance law and joint-limit avoidance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..halsim.plant import DEFAULT_INERTIA, HARD_LIMIT
from ..halsim.records import (
    MODE_IMPEDANCE,
    MODE_POSITION,
    MODE_TORQUE,
    N_JOINTS,
    JointCommand,
)

DEFAULT_STIFFNESS = (10.0, 10.0, 10.0, 10.0)
SOFT_MARGIN = 0.1  # rad inside the hard limit
PUSHBACK_GAIN = 20.0  # N·m/rad once past the soft limit


def _near_critical_damping(stiffness) -> tuple:
    # 0.7 of critical: undamped impedance on a double integrator rings forever
    return tuple(2.0 * math.sqrt(k * i) * 0.7
                 for k, i in zip(stiffness, DEFAULT_INERTIA))


@dataclass(frozen=True)
class GainConfig:
    stiffness: tuple = DEFAULT_STIFFNESS
    damping: tuple = field(default_factory=lambda: _near_critical_damping(DEFAULT_STIFFNESS))
    soft_margin: float = SOFT_MARGIN
    pushback_gain: float = PUSHBACK_GAIN

    def __post_init__(self):
        if len(self.stiffness) != N_JOINTS or len(self.damping) != N_JOINTS:
            raise ValueError(f"need {N_JOINTS} stiffness and damping values")
        if any(k < 0 for k in self.stiffness) or any(d < 0 for d in self.damping):
            raise ValueError("gains must be non-negative")
        if not 0.0 < self.soft_margin < HARD_LIMIT:
            raise ValueError("soft margin must lie strictly inside the hard limit")

    @property
    def soft_limit(self) -> float:
        return HARD_LIMIT - self.soft_margin

    def as_array(self) -> list:
        return (list(self.stiffness) + list(self.damping)
                + [self.soft_margin, self.pushback_gain])

    @classmethod
    def from_array(cls, values) -> "GainConfig":
        if len(values) != 2 * N_JOINTS + 2:
            raise ValueError(f"gain array needs {2 * N_JOINTS + 2} values")
        return cls(
            stiffness=tuple(values[:N_JOINTS]),
            damping=tuple(values[N_JOINTS:2 * N_JOINTS]),
            soft_margin=values[2 * N_JOINTS],
            pushback_gain=values[2 * N_JOINTS + 1],
        )


def impedance_torque(q, qdot, q_des, gains: GainConfig) -> list:
    return [gains.stiffness[j] * (q_des[j] - q[j]) - gains.damping[j] * qdot[j]
            for j in range(N_JOINTS)]


def limit_avoidance(cmd: JointCommand, q: float, gains: GainConfig) -> JointCommand:
    """Keep one joint's command inside the soft range.

    Position and impedance setpoints are clamped to the soft range. A
    torque command is left alone inside the range; beyond the soft limit
    a pushback torque proportional to the excursion is added, always
    pointing back toward zero.
    """
    soft = gains.soft_limit
    if cmd.mode in (MODE_POSITION, MODE_IMPEDANCE):
        clamped = min(max(cmd.q_des, -soft), soft)
        if clamped != cmd.q_des:
            return JointCommand(cmd.joint_id, cmd.mode, clamped, cmd.tau_des,
                                cmd.stiffness, cmd.damping)
        return cmd
    if cmd.mode == MODE_TORQUE:
        if q > soft:
            extra = -gains.pushback_gain * (q - soft)
        elif q < -soft:
            extra = -gains.pushback_gain * (q + soft)
        else:
            return cmd
        return JointCommand(cmd.joint_id, cmd.mode, cmd.q_des,
                            cmd.tau_des + extra, cmd.stiffness, cmd.damping)
    return cmd


def apply_limit_avoidance(commands, q, gains: GainConfig) -> list:
    return [limit_avoidance(c, q[c.joint_id], gains) for c in commands]
