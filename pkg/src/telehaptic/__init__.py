"""Deterministic master-slave teleoperation simulator and haptics middleware.

Synthetic tactile sensing on a simulated gripper squeezing a deformable
pipette, kinesthetic force rendering, electro-tactile pattern mapping via
bicubic resampling, a binary wire protocol with fixed streaming rates, and
a trial harness reproducing a liquid-dosing task under ablated feedback
conditions.
"""

__version__ = "0.1.0"

from .control import (
    Axis,
    HapticInput,
    PidGains,
    PidState,
    RobotTarget,
    WorkspaceConfig,
    pid_step,
    scale_workspace,
)
from .kinesthetic import GripperState, KinestheticForce, kinesthetic_force
from .scenario import ScenarioSpec, default_scenario, load_scenario
from .sim import LiquidLedger, PipetteModel, RemoteScene, SceneState, pipette_flow
from .tactile import (
    ElectrodePattern,
    Finger,
    TactileFrame,
    clamp_sensor,
    pattern_to_levels,
    resample_bicubic,
)

__all__ = [
    "Axis",
    "ElectrodePattern",
    "Finger",
    "GripperState",
    "HapticInput",
    "KinestheticForce",
    "LiquidLedger",
    "PidGains",
    "PidState",
    "PipetteModel",
    "RemoteScene",
    "RobotTarget",
    "ScenarioSpec",
    "SceneState",
    "TactileFrame",
    "WorkspaceConfig",
    "clamp_sensor",
    "default_scenario",
    "kinesthetic_force",
    "load_scenario",
    "pattern_to_levels",
    "pid_step",
    "pipette_flow",
    "resample_bicubic",
    "scale_workspace",
    "__version__",
]
