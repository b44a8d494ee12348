"""Kinesthetic grasp-force rendering.

The force commanded to the operator's grasp is the per-cell mean over both
fingers' tactile grids, scaled by how far the gripper has closed past the
opening at which it first touched the object.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .tactile import TactileFrame

GRASP_FORCE_CEILING_N = 8.0  # desktop haptic display grasp-force limit
TOTAL_SENSOR_CELLS = 100     # 50 cells per finger, two fingers


class FrameSyncError(ValueError):
    """Left/right tactile frames were sampled at different instants."""


@dataclass(frozen=True)
class GripperState:
    """Normalized gripper opening state (0 = closed, 1 = open).

    p_contact is the opening at first object contact; it is set once per
    grasp episode (the first tick any tactile cell is nonzero) and cleared
    when all cells return to zero.
    """

    p_current: float
    p_contact: Optional[float] = None
    commanded_opening: float = 1.0

    def __post_init__(self):
        for name in ("p_current", "commanded_opening"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.p_contact is not None and not 0.0 <= self.p_contact <= 1.0:
            raise ValueError(f"p_contact must lie in [0, 1], got {self.p_contact}")

    def observing_contact(self, in_contact: bool) -> "GripperState":
        """Advance the contact episode bookkeeping for this tick."""
        if in_contact and self.p_contact is None:
            return GripperState(self.p_current, self.p_current, self.commanded_opening)
        if not in_contact and self.p_contact is not None:
            return GripperState(self.p_current, None, self.commanded_opening)
        return self


@dataclass(frozen=True)
class KinestheticForce:
    """Grasp-force command for the haptic display, newtons."""

    magnitude: float
    timestamp_us: int

    def __post_init__(self):
        if not 0.0 <= self.magnitude <= GRASP_FORCE_CEILING_N:
            raise ValueError(f"force out of range: {self.magnitude}")


def kinesthetic_force(left: TactileFrame, right: TactileFrame, grip: GripperState) -> KinestheticForce:
    """Grasp force = (sum of all 100 cells / 100) * max(0, p_contact - p_current).

    Clamped to [0, 8] N. Zero when no contact has been registered. The
    positional factor is clamped at 0 so reopening past the contact point
    never renders a pulling force.
    """
    if left.timestamp_us != right.timestamp_us:
        raise FrameSyncError(
            f"frame timestamps differ: {left.timestamp_us} vs {right.timestamp_us}"
        )
    if grip.p_contact is None:
        return KinestheticForce(0.0, left.timestamp_us)
    mean_force = (left.cells.sum() + right.cells.sum()) / TOTAL_SENSOR_CELLS
    raw = mean_force * max(0.0, grip.p_contact - grip.p_current)
    magnitude = min(max(float(raw), 0.0), GRASP_FORCE_CEILING_N)
    return KinestheticForce(magnitude, left.timestamp_us)
