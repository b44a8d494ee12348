"""Deterministic simulation of the remote cell.

Kinematic robot TCP, rate-limited gripper, a deformable transfer pipette
exchanging liquid with a beaker and test tubes, and synthetic tactile
frames for the finger pads. Single-owner stepped state machine: one logical
owner calls tick; everyone else sees immutable snapshots.

All liquid transfers are quantized to ~1 nl so every ledger update is exact
in double precision: total volume is conserved with zero drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .control import InvalidTimestepError, RobotTarget, clamp_to_reach
from .kinesthetic import GripperState
from .scenario import ScenarioSpec
from .tactile import Finger, TactileFrame, resample_bicubic

# Transfer quantum: 2^-20 ml. Pool sizes stay well under 2^7 ml, so every
# pool is an exact multiple of the quantum and ledger arithmetic never
# rounds.
QUANTUM_ML = 2.0 ** -20


def _quantize_down(v: float) -> float:
    return math.floor(v / QUANTUM_ML) * QUANTUM_ML


def _quantize_up(v: float) -> float:
    return math.ceil(v / QUANTUM_ML) * QUANTUM_ML


class RegionKind(Enum):
    BEAKER_SUBMERGED = "beaker_submerged"
    BEAKER_AIR = "beaker_air"
    TUBE = "tube"
    ELSEWHERE = "elsewhere"


@dataclass(frozen=True)
class TipRegion:
    kind: RegionKind
    tube_index: Optional[int] = None

    @property
    def over_beaker(self) -> bool:
        return self.kind in (RegionKind.BEAKER_SUBMERGED, RegionKind.BEAKER_AIR)


ELSEWHERE = TipRegion(RegionKind.ELSEWHERE)


@dataclass(frozen=True)
class PipetteModel:
    """Deformable-bulb transfer pipette.

    compression c in [0, 1] tracks how far the bulb is squeezed between its
    relaxed outer diameter and the minimum squeezed diameter. Free internal
    volume is capacity*(1-c); held liquid never exceeds it.
    """

    bulb_capacity_ml: float = 1.5
    outer_diameter_mm: float = 12.0
    min_squeezed_diameter_mm: float = 4.0
    tip_length_mm: float = 100.0
    held_liquid_ml: float = 0.0
    compression: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.compression <= 1.0:
            raise ValueError(f"compression out of [0, 1]: {self.compression}")
        if not -1e-12 <= self.held_liquid_ml <= self.free_volume_ml + 1e-12:
            raise ValueError(
                f"held liquid {self.held_liquid_ml} exceeds free volume {self.free_volume_ml}"
            )

    @property
    def displaced_volume_ml(self) -> float:
        return _quantize_up(self.bulb_capacity_ml * self.compression)

    @property
    def free_volume_ml(self) -> float:
        return self.bulb_capacity_ml - self.displaced_volume_ml


@dataclass(frozen=True)
class LiquidLedger:
    """Where every milliliter lives. Conserved exactly across ticks."""

    beaker_ml: float
    tube_ml: Tuple[float, ...]
    pipette_ml: float = 0.0
    spill_ml: float = 0.0

    def __post_init__(self):
        pools = (self.beaker_ml, *self.tube_ml, self.pipette_ml, self.spill_ml)
        if any(p < 0.0 for p in pools):
            raise ValueError(f"negative pool in ledger: {pools}")

    @property
    def total_ml(self) -> float:
        return self.beaker_ml + sum(self.tube_ml) + self.pipette_ml + self.spill_ml


@dataclass(frozen=True)
class SceneState:
    robot: RobotTarget
    gripper: GripperState
    pipette: PipetteModel
    ledger: LiquidLedger
    grasped: bool
    dropped: bool
    tip_region: TipRegion
    sim_time_us: int


class SceneEventCode(Enum):
    GRASPED = 1
    DROPPED = 2
    LIQUID_DRAWN = 3
    LIQUID_DISPENSED = 4
    LIQUID_SPILLED = 5
    SESSION_CLOSED = 6


@dataclass(frozen=True)
class SceneEvent:
    code: SceneEventCode
    volume_delta_ml: float = 0.0
    tube_index: Optional[int] = None
    timestamp_us: int = 0


def pipette_flow(
    pipette: PipetteModel,
    delta_c: float,
    tip_region: TipRegion,
    ledger: LiquidLedger,
) -> Tuple[PipetteModel, LiquidLedger]:
    """Move liquid for a compression change.

    Squeezing (delta_c > 0) expels min(held, displaced volume change);
    expelled liquid lands in the tube under the tip, the beaker if the tip
    is over it, or the spill pool otherwise. Releasing (delta_c < 0) draws
    from the beaker when the tip is submerged, air otherwise. Caps make
    every case total; no error paths.
    """
    c_old = pipette.compression
    c_new = c_old + delta_c
    if not -1e-9 <= c_new <= 1.0 + 1e-9:
        raise ValueError(f"resulting compression out of range: {c_new}")
    c_new = min(max(c_new, 0.0), 1.0)
    v_old = _quantize_up(pipette.bulb_capacity_ml * c_old)
    v_new = _quantize_up(pipette.bulb_capacity_ml * c_new)
    held = pipette.held_liquid_ml

    beaker = ledger.beaker_ml
    tubes = list(ledger.tube_ml)
    spill = ledger.spill_ml

    if v_new > v_old:
        expelled = min(held, v_new - v_old)
        held -= expelled
        if expelled > 0.0:
            if tip_region.kind is RegionKind.TUBE:
                tubes[tip_region.tube_index] += expelled
            elif tip_region.over_beaker:
                beaker += expelled
            else:
                spill += expelled
    elif v_new < v_old and tip_region.kind is RegionKind.BEAKER_SUBMERGED:
        free_after = (pipette.bulb_capacity_ml - v_new) - held
        drawn = max(0.0, min(v_old - v_new, beaker, _quantize_down(free_after)))
        beaker -= drawn
        held += drawn
    # releasing out of liquid draws air: nothing to account

    new_pipette = replace(pipette, compression=c_new, held_liquid_ml=held)
    new_ledger = LiquidLedger(beaker, tuple(tubes), held, spill)
    return new_pipette, new_ledger


class RemoteScene:
    """Scene geometry plus the physics constants; stateless tick engine."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self._d_outer_norm = spec.outer_diameter_mm / spec.gripper_max_gap_mm
        self._c_span_mm = spec.outer_diameter_mm - spec.min_squeezed_diameter_mm
        self._cols = np.arange(5, dtype=np.float64)

    # -- geometry ------------------------------------------------------

    @property
    def grasp_opening(self) -> float:
        """Normalized opening at which the jaws just touch the pipette."""
        return self._d_outer_norm

    def compression_for_opening(self, opening: float) -> float:
        gap_mm = opening * self.spec.gripper_max_gap_mm
        c = (self.spec.outer_diameter_mm - gap_mm) / self._c_span_mm
        return min(max(c, 0.0), 1.0)

    def opening_for_compression(self, c: float) -> float:
        gap_mm = self.spec.outer_diameter_mm - c * self._c_span_mm
        return gap_mm / self.spec.gripper_max_gap_mm

    def tip_position(self, tcp_position) -> Tuple[float, float, float]:
        x, y, z = tcp_position
        return (x, y, z - self.spec.tip_length_mm)

    def tip_region(self, tcp_position) -> TipRegion:
        tx, ty, tz = self.tip_position(tcp_position)
        bx, by = self.spec.beaker_center_mm
        if math.hypot(tx - bx, ty - by) <= self.spec.beaker_radius_mm:
            if tz <= self.spec.beaker_surface_z_mm:
                return TipRegion(RegionKind.BEAKER_SUBMERGED)
            return TipRegion(RegionKind.BEAKER_AIR)
        for i, (cx, cy) in enumerate(self.spec.tube_centers_mm):
            if math.hypot(tx - cx, ty - cy) <= self.spec.tube_radius_mm:
                return TipRegion(RegionKind.TUBE, i)
        return ELSEWHERE

    # -- state construction ---------------------------------------------

    def initial_state(self) -> SceneState:
        spec = self.spec
        grasped = spec.start_grasped
        opening = self.grasp_opening if grasped else 1.0
        pipette = PipetteModel(
            bulb_capacity_ml=spec.bulb_capacity_ml,
            outer_diameter_mm=spec.outer_diameter_mm,
            min_squeezed_diameter_mm=spec.min_squeezed_diameter_mm,
            tip_length_mm=spec.tip_length_mm,
        )
        ledger = LiquidLedger(
            beaker_ml=_quantize_down(spec.beaker_ml),
            tube_ml=tuple(0.0 for _ in spec.tube_centers_mm),
        )
        robot = RobotTarget(spec.home_position_mm, spec.home_orientation_deg, 0)
        gripper = GripperState(opening, None, opening).observing_contact(grasped)
        return SceneState(
            robot=robot,
            gripper=gripper,
            pipette=pipette,
            ledger=ledger,
            grasped=grasped,
            dropped=False,
            tip_region=self.tip_region(robot.tcp_position),
            sim_time_us=0,
        )

    # -- stepping --------------------------------------------------------

    def tick(
        self,
        state: SceneState,
        velocity_command: Sequence[float],
        gripper_command: float,
        dt: float,
    ) -> SceneState:
        """Advance the scene by dt seconds. Deterministic: identical inputs
        produce bit-identical states."""
        if dt <= 0.0:
            raise InvalidTimestepError(f"dt must be > 0, got {dt}")
        if len(velocity_command) != 6 or not all(math.isfinite(v) for v in velocity_command):
            raise ValueError(f"velocity command must be 6 finite values: {velocity_command}")
        if not math.isfinite(gripper_command):
            raise ValueError("gripper command must be finite")
        gripper_command = min(max(gripper_command, 0.0), 1.0)

        vx, vy, vz, wx, wy, wz = velocity_command
        p = state.robot.tcp_position
        o = state.robot.tcp_orientation
        new_time = state.sim_time_us + round(dt * 1e6)
        position = clamp_to_reach((p[0] + vx * dt, p[1] + vy * dt, p[2] + vz * dt))
        orientation = (o[0] + wx * dt, o[1] + wy * dt, o[2] + wz * dt)
        robot = RobotTarget(position, orientation, new_time)

        max_step = self.spec.gripper_max_speed * dt
        delta = gripper_command - state.gripper.p_current
        opening = state.gripper.p_current + min(max(delta, -max_step), max_step)

        tip_region = self.tip_region(position)

        grasped, dropped = state.grasped, state.dropped
        pipette, ledger = state.pipette, state.ledger
        if grasped:
            if opening > self._d_outer_norm + 1e-12:
                # released mid-air: the pipette leaves the simulation,
                # its contents count as spilled
                grasped = False
                dropped = True
                ledger = LiquidLedger(
                    ledger.beaker_ml,
                    ledger.tube_ml,
                    0.0,
                    ledger.spill_ml + pipette.held_liquid_ml,
                )
                pipette = replace(pipette, held_liquid_ml=0.0, compression=0.0)
        elif not dropped:
            rest = self.spec.pipette_rest_position_mm
            near = (
                math.dist(position, rest) <= self.spec.grasp_tolerance_mm
                and opening <= self._d_outer_norm + 1e-12
            )
            if near:
                grasped = True

        if grasped:
            c_new = self.compression_for_opening(opening)
            delta_c = c_new - pipette.compression
            if delta_c != 0.0:
                pipette, ledger = pipette_flow(pipette, delta_c, tip_region, ledger)

        in_contact = grasped  # squeeze footprint always reaches the 1 N floor
        gripper = GripperState(opening, state.gripper.p_contact, gripper_command)
        gripper = gripper.observing_contact(in_contact)

        return SceneState(
            robot=robot,
            gripper=gripper,
            pipette=pipette,
            ledger=ledger,
            grasped=grasped,
            dropped=dropped,
            tip_region=tip_region,
            sim_time_us=new_time,
        )

    # -- sensing ---------------------------------------------------------

    def footprint_cells(self, c: float) -> np.ndarray:
        """Clamped 10x5 force grid the pipette prints at compression c.

        A Gaussian column profile (peak 1+8c N, half-width 0.6+2.4c cells,
        centered on the pad) across the rows the pipette body covers; both
        the per-cell force and the contact area are nondecreasing in c.
        """
        peak = 1.0 + 8.0 * c
        width = 0.6 + 2.4 * c
        profile = peak * np.exp(-(((self._cols - 2.0) / width) ** 2))
        cells = np.zeros((10, 5))
        r0, r1 = self.spec.contact_rows
        cells[r0:r1 + 1, :] = profile
        return np.where(cells < 1.0, 0.0, np.minimum(cells, 9.0))

    def footprint_pattern(self, c: float) -> np.ndarray:
        """4x5 electrode intensities for the footprint at compression c."""
        frame = TactileFrame(Finger.LEFT, self.footprint_cells(c), 0)
        return resample_bicubic(frame).cells

    def synthesize_tactile(self, state: SceneState) -> Tuple[TactileFrame, TactileFrame]:
        """Synthetic finger-pad frames for the current grasp: a narrow 1 N
        center stripe at first contact growing to a saturated wide band at
        full compression. Open past the pipette diameter reads all-zero."""
        if not state.grasped or state.gripper.p_current > self._d_outer_norm + 1e-12:
            cells = np.zeros((10, 5))
        else:
            cells = self.footprint_cells(state.pipette.compression)
        left = TactileFrame(Finger.LEFT, cells, state.sim_time_us)
        right = TactileFrame(Finger.RIGHT, cells, state.sim_time_us)
        return left, right


def scene_events(prev: SceneState, new: SceneState) -> Tuple[SceneEvent, ...]:
    """Semantic diff of two consecutive states, for the event stream."""
    events = []
    t = new.sim_time_us
    if new.grasped and not prev.grasped:
        events.append(SceneEvent(SceneEventCode.GRASPED, timestamp_us=t))
    if new.dropped and not prev.dropped:
        events.append(SceneEvent(SceneEventCode.DROPPED, timestamp_us=t))
    drawn = prev.ledger.beaker_ml - new.ledger.beaker_ml
    if drawn > 0.0:
        events.append(SceneEvent(SceneEventCode.LIQUID_DRAWN, drawn, timestamp_us=t))
    elif drawn < 0.0:
        events.append(SceneEvent(SceneEventCode.LIQUID_DISPENSED, -drawn, None, t))
    for i, (before, after) in enumerate(zip(prev.ledger.tube_ml, new.ledger.tube_ml)):
        if after > before:
            events.append(SceneEvent(SceneEventCode.LIQUID_DISPENSED, after - before, i, t))
    spill = new.ledger.spill_ml - prev.ledger.spill_ml
    if spill > 0.0:
        events.append(SceneEvent(SceneEventCode.LIQUID_SPILLED, spill, None, t))
    return tuple(events)
