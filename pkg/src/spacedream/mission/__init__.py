from .emmc import (
    EMMC_FAULTS,
    FAULT_HANG,
    FAULT_MOUNT,
    FAULT_NONE,
    EmmcBank,
    EmmcDevice,
    MountOutcome,
)
from .events import EVENT_KINDS, EventLog, MissionEvent
from .handshake import (
    DEFAULT_PORT,
    FLIGHT,
    GROUND_TEST,
    START_MAGIC,
    StartGate,
    UdpStartSource,
)
from .health import TORQUE_LIMIT, HealthReport, check_health
from .persist import StateStore
from .sequencer import (
    EXCITATION_WAYPOINTS,
    IMPEDANCE_WAYPOINTS,
    UNFOLD_WAYPOINTS,
    MissionConfig,
    Sequencer,
    StartupReport,
)
from .watchdog import Watchdog

__all__ = [
    "DEFAULT_PORT",
    "EMMC_FAULTS",
    "EVENT_KINDS",
    "EXCITATION_WAYPOINTS",
    "EmmcBank",
    "EmmcDevice",
    "FAULT_HANG",
    "FAULT_MOUNT",
    "FAULT_NONE",
    "FLIGHT",
    "GROUND_TEST",
    "HealthReport",
    "IMPEDANCE_WAYPOINTS",
    "MissionConfig",
    "MissionEvent",
    "MountOutcome",
    "START_MAGIC",
    "Sequencer",
    "StartGate",
    "StartupReport",
    "StateStore",
    "TORQUE_LIMIT",
    "UNFOLD_WAYPOINTS",
    "UdpStartSource",
    "Watchdog",
    "check_health",
    "EventLog",
]
