from .link import (
    CommandOutOfRange,
    ConfigRejected,
    CyclicLink,
    FaultInjection,
    HalSim,
    LinkError,
    ProtocolViolation,
    UnknownFault,
    UnknownJoint,
)
from .plant import (
    DEFAULT_INERTIA,
    DT,
    FRICTION_B,
    HARD_LIMIT,
    PlantState,
    load_plant,
    save_plant,
    step_plant,
)
from .records import (
    MODE_IMPEDANCE,
    MODE_OFF,
    MODE_POSITION,
    MODE_TORQUE,
    N_JOINTS,
    TORQUE_INVALID,
    JointCommand,
    JointTelemetry,
    pack_commands,
    pack_telemetry,
    unpack_commands,
    unpack_telemetry,
)

__all__ = [
    "CommandOutOfRange",
    "ConfigRejected",
    "CyclicLink",
    "DEFAULT_INERTIA",
    "DT",
    "FRICTION_B",
    "FaultInjection",
    "HARD_LIMIT",
    "HalSim",
    "JointCommand",
    "JointTelemetry",
    "LinkError",
    "MODE_IMPEDANCE",
    "MODE_OFF",
    "MODE_POSITION",
    "MODE_TORQUE",
    "N_JOINTS",
    "PlantState",
    "ProtocolViolation",
    "TORQUE_INVALID",
    "UnknownFault",
    "UnknownJoint",
    "load_plant",
    "pack_commands",
    "pack_telemetry",
    "save_plant",
    "step_plant",
    "unpack_commands",
    "unpack_telemetry",
]
