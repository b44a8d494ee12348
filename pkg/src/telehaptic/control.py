"""Master-side motion mapping and the slave-side PID velocity regulator.

Handle motion inside the desktop device's small workspace (a 160 mm
diameter x 110 mm cylinder) is scaled up x1..x5 onto the robot's 500 mm
reach sphere. Individual axes can be locked to trade mobility for
precision. The PID turns pose targets into per-axis velocity commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Tuple

Vec3 = Tuple[float, float, float]
Vec6 = Tuple[float, float, float, float, float, float]

DEVICE_RADIUS_MM = 80.0        # cylinder cross-section radius
DEVICE_HALF_LENGTH_MM = 55.0   # half of the 110 mm length, along x
ROBOT_REACH_MM = 500.0

# Defaults validated against the closed-loop step-response check in the
# test suite (100 mm step settles inside 2% in under 3 s, overshoot < 5%).
DEFAULT_KP = 4.0
DEFAULT_KI = 0.5
DEFAULT_KD = 0.05
DEFAULT_INTEGRAL_LIMIT = 50.0   # mm*s
DEFAULT_OUTPUT_LIMIT = 250.0    # mm/s
CONTROL_RATE_HZ = 125


class Axis(Enum):
    X = "x"
    Y = "y"
    Z = "z"
    ROTATION = "rotation"


class InvalidTimestepError(ValueError):
    """dt must be strictly positive."""


class WorkspaceError(ValueError):
    """Handle displacement outside the device workspace cylinder."""


def clamp_to_device_workspace(displacement: Vec3) -> Vec3:
    """Project a displacement into the device cylinder (axis along x)."""
    x, y, z = displacement
    x = min(max(x, -DEVICE_HALF_LENGTH_MM), DEVICE_HALF_LENGTH_MM)
    radial = math.hypot(y, z)
    if radial > DEVICE_RADIUS_MM:
        s = DEVICE_RADIUS_MM / radial
        y, z = y * s, z * s
    return (x, y, z)


def _inside_device_workspace(displacement: Vec3) -> bool:
    x, y, z = displacement
    return abs(x) <= DEVICE_HALF_LENGTH_MM + 1e-9 and math.hypot(y, z) <= DEVICE_RADIUS_MM + 1e-9


@dataclass(frozen=True)
class HapticInput:
    """Operator handle state: displacement from device center (mm),
    handle tilt (degrees, roll/pitch/yaw), and grip command in [0, 1]."""

    handle_displacement: Vec3
    handle_tilt: Vec3 = (0.0, 0.0, 0.0)
    grip_command: float = 1.0
    timestamp_us: int = 0

    def __post_init__(self):
        if not _inside_device_workspace(self.handle_displacement):
            raise WorkspaceError(
                f"displacement {self.handle_displacement} outside device workspace"
            )
        if not 0.0 <= self.grip_command <= 1.0:
            raise ValueError(f"grip_command must lie in [0, 1], got {self.grip_command}")


@dataclass(frozen=True)
class WorkspaceConfig:
    scale_factor: int = 2
    lock_mask: FrozenSet[Axis] = frozenset()
    robot_reach_mm: float = ROBOT_REACH_MM

    def __post_init__(self):
        if self.scale_factor not in (1, 2, 3, 4, 5):
            raise ValueError(f"scale_factor must be 1..5, got {self.scale_factor}")
        object.__setattr__(self, "lock_mask", frozenset(self.lock_mask))


@dataclass(frozen=True)
class RobotTarget:
    """TCP pose in the robot base frame: position mm, orientation degrees."""

    tcp_position: Vec3
    tcp_orientation: Vec3 = (0.0, 0.0, 0.0)
    timestamp_us: int = 0

    def __post_init__(self):
        if _norm3(self.tcp_position) > ROBOT_REACH_MM + 1e-6:
            raise ValueError(f"TCP position {self.tcp_position} outside 500 mm reach")


def _norm3(v: Vec3) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def clamp_to_reach(position: Vec3, reach_mm: float = ROBOT_REACH_MM) -> Vec3:
    """Radially project a position onto the reach sphere if outside it."""
    r = _norm3(position)
    if r <= reach_mm:
        return position
    s = reach_mm / r
    return (position[0] * s, position[1] * s, position[2] * s)


def scale_workspace(inp: HapticInput, cfg: WorkspaceConfig, home: RobotTarget) -> RobotTarget:
    """Map handle displacement/tilt onto a TCP target around the home pose.

    Position = home + scale * displacement, with locked translational axes
    contributing nothing; orientation = home + tilt (1:1, unscaled), or
    home if rotation is locked. Out-of-reach targets are radially projected
    back onto the reach sphere so the operator never loses continuity.
    """
    d = inp.handle_displacement
    s = float(cfg.scale_factor)
    dx = 0.0 if Axis.X in cfg.lock_mask else s * d[0]
    dy = 0.0 if Axis.Y in cfg.lock_mask else s * d[1]
    dz = 0.0 if Axis.Z in cfg.lock_mask else s * d[2]
    position = (
        home.tcp_position[0] + dx,
        home.tcp_position[1] + dy,
        home.tcp_position[2] + dz,
    )
    position = clamp_to_reach(position, cfg.robot_reach_mm)
    if Axis.ROTATION in cfg.lock_mask:
        orientation = home.tcp_orientation
    else:
        orientation = (
            home.tcp_orientation[0] + inp.handle_tilt[0],
            home.tcp_orientation[1] + inp.handle_tilt[1],
            home.tcp_orientation[2] + inp.handle_tilt[2],
        )
    return RobotTarget(position, orientation, inp.timestamp_us)


@dataclass(frozen=True)
class PidGains:
    kp: float = DEFAULT_KP
    ki: float = DEFAULT_KI
    kd: float = DEFAULT_KD
    integral_limit: float = DEFAULT_INTEGRAL_LIMIT
    output_limit: float = DEFAULT_OUTPUT_LIMIT

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0.0:
            raise ValueError("gains must be nonnegative")
        if self.integral_limit <= 0.0 or self.output_limit <= 0.0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class PidState:
    """Explicit controller state: callers own sequencing."""

    integral: Vec6 = (0.0,) * 6
    prev_error: Vec6 = (0.0,) * 6


def pid_step(
    target: RobotTarget,
    current: RobotTarget,
    gains: PidGains,
    state: PidState,
    dt: float,
) -> Tuple[Vec6, PidState]:
    """One discrete PID step over the six pose axes.

    Returns per-axis velocity commands (mm/s for x/y/z, deg/s for the
    orientation axes) and the updated state. The integral is clamped to
    +/-integral_limit and only accumulates while the axis output is
    unsaturated (conditional anti-windup), which is what lets the default
    gains meet the step-response bound.
    """
    if dt <= 0.0:
        raise InvalidTimestepError(f"dt must be > 0, got {dt}")
    errors = (
        target.tcp_position[0] - current.tcp_position[0],
        target.tcp_position[1] - current.tcp_position[1],
        target.tcp_position[2] - current.tcp_position[2],
        target.tcp_orientation[0] - current.tcp_orientation[0],
        target.tcp_orientation[1] - current.tcp_orientation[1],
        target.tcp_orientation[2] - current.tcp_orientation[2],
    )
    command = []
    integral = []
    for i, e in enumerate(errors):
        grown = state.integral[i] + e * dt
        grown = min(max(grown, -gains.integral_limit), gains.integral_limit)
        v = gains.kp * e + gains.ki * grown + gains.kd * (e - state.prev_error[i]) / dt
        if -gains.output_limit <= v <= gains.output_limit:
            integral.append(grown)
        else:
            v = min(max(v, -gains.output_limit), gains.output_limit)
            integral.append(state.integral[i])
        command.append(v)
    new_state = PidState(tuple(integral), errors)
    return tuple(command), new_state
