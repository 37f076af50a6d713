from .fsm import (
    HL,
    HighLevelState,
    InterpolatorState,
    IpolPhase,
    JointFsm,
    Mode,
    hl_step,
    ipol_step,
    joint_step,
)
from .laws import GainConfig, apply_limit_avoidance, impedance_torque, limit_avoidance
from .process import ControlProcess, ControllerState, pack_state, unpack_state
from .trajectory import PlanInfeasible, TrapezoidalTrajectory, plan_trapezoidal

__all__ = [
    "ControlProcess",
    "ControllerState",
    "GainConfig",
    "HL",
    "HighLevelState",
    "InterpolatorState",
    "IpolPhase",
    "JointFsm",
    "Mode",
    "PlanInfeasible",
    "TrapezoidalTrajectory",
    "apply_limit_avoidance",
    "hl_step",
    "impedance_torque",
    "ipol_step",
    "joint_step",
    "limit_avoidance",
    "pack_state",
    "plan_trapezoidal",
    "unpack_state",
]
