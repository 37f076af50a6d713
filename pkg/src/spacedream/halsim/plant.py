"""Double-integrator plant for four independent joints.

Semi-implicit Euler per step: velocity first, then position with the new
velocity. Viscous friction only; no gravity (free-flyer). Positions clamp
at the hard limits with the velocity zeroed at contact.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

from .records import N_JOINTS

DT = 0.01  # s, one plant step per 100 Hz link cycle
HARD_LIMIT = 2.8  # rad, symmetric per joint
DEFAULT_INERTIA = (1.0, 0.8, 0.5, 0.2)  # kg·m²
FRICTION_B = 0.05  # N·m·s/rad

_MAGIC = b"SDPL"
_BODY = struct.Struct(f"<{3 * N_JOINTS}d")


@dataclass
class PlantState:
    q: list = field(default_factory=lambda: [0.0] * N_JOINTS)
    qdot: list = field(default_factory=lambda: [0.0] * N_JOINTS)
    inertia: list = field(default_factory=lambda: list(DEFAULT_INERTIA))
    persisted: bool = False

    def __post_init__(self):
        if not (len(self.q) == len(self.qdot) == len(self.inertia) == N_JOINTS):
            raise ValueError(f"plant state needs {N_JOINTS} joints")
        if any(i <= 0 for i in self.inertia):
            raise ValueError("inertia must be positive")

    def copy(self) -> "PlantState":
        return PlantState(list(self.q), list(self.qdot), list(self.inertia), self.persisted)

    def kinetic_energy(self) -> float:
        return 0.5 * sum(i * v * v for i, v in zip(self.inertia, self.qdot))


def step_plant(state: PlantState, torques, dt: float = DT,
               friction: float = FRICTION_B, limit: float = HARD_LIMIT) -> PlantState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(torques) != N_JOINTS:
        raise ValueError(f"need {N_JOINTS} torques")
    q, qdot = [], []
    for i in range(N_JOINTS):
        v = state.qdot[i] + (torques[i] - friction * state.qdot[i]) / state.inertia[i] * dt
        x = state.q[i] + v * dt
        if x > limit:
            x, v = limit, 0.0
        elif x < -limit:
            x, v = -limit, 0.0
        q.append(x)
        qdot.append(v)
    return PlantState(q, qdot, list(state.inertia), state.persisted)


def save_plant(state: PlantState, path: str) -> None:
    """Atomic write so a reboot mid-save never leaves a torn file."""
    data = _MAGIC + _BODY.pack(*state.q, *state.qdot, *state.inertia)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_plant(path: str) -> PlantState:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC or len(data) != 4 + _BODY.size:
        raise ValueError(f"{path}: not a plant state file")
    values = _BODY.unpack(data[4:])
    return PlantState(
        q=list(values[:N_JOINTS]),
        qdot=list(values[N_JOINTS:2 * N_JOINTS]),
        inertia=list(values[2 * N_JOINTS:]),
        persisted=True,
    )
