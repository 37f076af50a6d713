from .config import (
    ConfigError,
    CycleError,
    ParseError,
    ProcessGraph,
    ProcessSpec,
    UnknownDependency,
    load_config,
)
from .supervisor import (
    ProcessState,
    ProcessStatus,
    ReadyTimeout,
    SpawnError,
    SubprocessLauncher,
    Supervisor,
    UnknownProcess,
    VirtualLauncher,
)

__all__ = [
    "ConfigError",
    "CycleError",
    "ParseError",
    "ProcessGraph",
    "ProcessSpec",
    "ProcessState",
    "ProcessStatus",
    "ReadyTimeout",
    "SpawnError",
    "SubprocessLauncher",
    "Supervisor",
    "UnknownDependency",
    "UnknownProcess",
    "VirtualLauncher",
    "load_config",
]
