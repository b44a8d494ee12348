"""Scripted operators standing in for human subjects.

Each feedback condition grants the operator a different observation set:

  V    visual only: noisy liquid-level reads and an eyeballed jaw gap
  V+F  adds the rendered grasp-force value
  V+E  adds the 4x5 electro-tactile pattern
  V+FE both haptic channels

The wire carries the exact force/pattern values; imprecision lives in the
operator's *interpretation* of each channel (per-action Gaussian biases),
calibrated so richer feedback yields strictly better compression estimates.
Visual liquid reads combine a per-trial bias with level-dependent white
noise that sharpens near the tube's fill marker (alignment judgments are
easier at the mark). The actuation path is ideal; the policies never
compute gripper openings from the compression they want - they ramp the
grip and stop when their estimate crosses the target, exactly as an
operator squeezing by feel would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from .endpoints import MasterEndpoint, OperatorAction
from .scenario import ScenarioSpec
from .sim import RemoteScene, SceneState


class FeedbackCondition(Enum):
    V = "v"
    VF = "vf"
    VE = "ve"
    VFE = "vfe"

    @property
    def has_force(self) -> bool:
        return self in (FeedbackCondition.VF, FeedbackCondition.VFE)

    @property
    def has_electro(self) -> bool:
        return self in (FeedbackCondition.VE, FeedbackCondition.VFE)


# Per-condition pacing: how boldly the operator squeezes and how much
# visual double-checking they do. Haptic feedback buys confidence; the
# visual-only operator moves slowly and re-verifies.
@dataclass(frozen=True)
class Pacing:
    squeeze_rate: float      # compression units per second
    settle_s: float          # pause before reading a liquid level
    verify_reads: int        # mandatory reads during verification
    trim_threshold_ml: float  # reading shortfall that triggers a corrective squeeze


PACING = {
    FeedbackCondition.V: Pacing(0.15, 1.6, 2, 0.05),
    FeedbackCondition.VF: Pacing(0.30, 1.0, 1, 0.04),
    FeedbackCondition.VE: Pacing(0.30, 1.0, 1, 0.04),
    FeedbackCondition.VFE: Pacing(0.35, 0.8, 1, 0.04),
}

# Interpretation-noise stream ids (SeedSequence children); fixed order so
# identical seeds reproduce identical draws across conditions.
_STREAM_VISUAL_BIAS = 0
_STREAM_VISUAL_WHITE = 1
_STREAM_PERCEPT = 2
_STREAM_PERCEPT_WHITE = 3
_STREAM_RESERVED = 4

# Marker-anchored visual acuity: judging a liquid level against the fill
# mark is a sharp alignment task near the mark and degrades with distance.
_ACUITY_FLOOR = 0.15
_ACUITY_SLOPE = 2.5
_ACUITY_CEIL = 1.75

# The first partial squeeze aims this far short of the marker so that the
# remaining gap can be closed by marker-anchored trims.
UNDERSHOOT_MARGIN_ML = 0.10


class CompressionEstimator:
    """Turns the operator's available channels into a compression estimate.

    Each channel contributes an informativeness curve sigma(c): the
    eyeballed jaw gap is flat and coarse; the force gauge maps its relative
    read error through the slope of the true force-vs-compression law (so
    it sharpens toward mid squeeze); the electrode pattern is matched
    against the known contact-pattern family, with per-cell read error
    shrunk by the family's gradient. Channels fuse by inverse variance,
    and one standardized per-action draw scales the fused sigma: the same
    lapse of attention costs more under poorer feedback, which is what
    makes richer conditions strictly more precise.
    """

    _GRID = 1001

    def __init__(self, scene: RemoteScene, spec: ScenarioSpec, condition: FeedbackCondition,
                 rng_percept, rng_white):
        self.condition = condition
        self.spec = spec
        self._rng_percept = rng_percept
        self._rng_white = rng_white
        self.sigma_visual = spec.visual_opening_sigma

        c_grid = np.linspace(0.0, 1.0, self._GRID)
        span = scene.grasp_opening - scene.opening_for_compression(1.0)
        forces = np.empty(self._GRID)
        patterns = np.empty((self._GRID, 20))
        for i, c in enumerate(c_grid):
            cells = scene.footprint_cells(c)
            forces[i] = (2.0 * cells.sum() / 100.0) * (c * span)
            patterns[i] = scene.footprint_pattern(c).reshape(-1)
        self._c_grid = c_grid
        self._forces = forces
        self._patterns = patterns
        dF = np.gradient(forces, c_grid)
        self._sigma_force = (
            spec.force_read_rel_sigma * forces + 0.002
        ) / np.maximum(dF, 1e-6)
        dP = np.gradient(patterns, c_grid[1] - c_grid[0], axis=0)
        grad_norm = np.linalg.norm(dP, axis=1)
        self._sigma_pattern = np.maximum(
            spec.pattern_cell_sigma / np.maximum(grad_norm, 1e-6), 1e-3
        )
        self._u_action = 0.0

    def begin_action(self) -> None:
        """Redraw the standardized perception error (the operator
        re-engages with the displays before each maneuver)."""
        self._u_action = self._rng_percept.normal(0.0, 1.0)

    def sigma(self, c: float) -> float:
        """Fused compression uncertainty at operating point c."""
        inv_var = 1.0 / self.sigma_visual**2
        if self.condition.has_force:
            s = float(np.interp(c, self._c_grid, self._sigma_force))
            inv_var += 1.0 / max(s, 1e-4) ** 2
        if self.condition.has_electro:
            s = float(np.interp(c, self._c_grid, self._sigma_pattern))
            inv_var += 1.0 / max(s, 1e-4) ** 2
        return inv_var ** -0.5

    def estimate(self, true_c: float, master: MasterEndpoint) -> float:
        sigma = self.sigma(true_c)
        white = self._rng_white.normal(0.0, 0.05 * sigma)
        return min(max(true_c + sigma * self._u_action + white, 0.0), 1.0)


class VisualChannel:
    """Noisy liquid-level reads of the true scene (the operator's eyes).

    Per-trial bias plus per-read white noise, both scaled by distance from
    the tube's fill marker: alignment against the mark is nearly exact,
    judging an absolute level far from it is not.
    """

    def __init__(self, spec: ScenarioSpec, rng_bias, rng_white):
        self.spec = spec
        self._rng_white = rng_white
        self._tube_bias = tuple(
            rng_bias.normal(0.0, spec.visual_volume_bias_sigma_ml)
            for _ in spec.tube_centers_mm
        )

    def read_tube_ml(self, index: int, true_ml: float) -> float:
        marker = self.spec.tube_markers_ml[index]
        acuity = min(_ACUITY_CEIL,
                     _ACUITY_FLOOR + _ACUITY_SLOPE * abs(true_ml - marker) / max(marker, 1e-9))
        white = self._rng_white.normal(0.0, self.spec.visual_volume_white_sigma_ml)
        return max(0.0, true_ml + acuity * (self._tube_bias[index] + white))


class ScriptedOperator:
    """Phase-machine operator that fills the pipette from the beaker and
    doses the target tube, observing only its condition's channels."""

    def __init__(
        self,
        spec: ScenarioSpec,
        condition: FeedbackCondition,
        seed: int,
        scene_peek: Callable[[], SceneState],
    ):
        self.spec = spec
        self.condition = condition
        self.pacing = PACING[condition]
        self.scene = RemoteScene(spec)
        self.peek = scene_peek
        streams = np.random.SeedSequence(seed).spawn(5)
        rngs = [np.random.default_rng(s) for s in streams]
        self.visual = VisualChannel(spec, rngs[_STREAM_VISUAL_BIAS], rngs[_STREAM_VISUAL_WHITE])
        self.estimator = CompressionEstimator(
            self.scene, spec, condition,
            rngs[_STREAM_PERCEPT], rngs[_STREAM_PERCEPT_WHITE],
        )
        self.done = False
        self.done_at_us: Optional[int] = None

        home = spec.home_position_mm
        self._home = home
        self._c_hold = 0.0625  # safe relaxed squeeze, clear of the release boundary
        self._open_guard = self.scene.opening_for_compression(0.02)  # drop guard
        self._grip_cmd = self.scene.grasp_opening if spec.start_grasped else 1.0
        self._c_ref = 0.0
        self._tick_s = 1.0 / spec.control_hz
        submerge_z = spec.beaker_surface_z_mm + spec.tip_length_mm - 12.0
        above_beaker = (spec.beaker_center_mm[0], spec.beaker_center_mm[1], home[2])
        in_beaker = (spec.beaker_center_mm[0], spec.beaker_center_mm[1], submerge_z)
        tube = spec.tube_centers_mm[spec.target_tube]
        over_tube = (tube[0], tube[1], home[2])
        self._marker = spec.tube_markers_ml[spec.target_tube]

        self._phases = self._build_script(above_beaker, in_beaker, over_tube)
        self._phase_idx = 0
        self._phase_started_us: Optional[int] = None
        self._phase_state: dict = {}
        self._needed_ml: Optional[float] = None
        self._trims_left = 2
        self._waypoint = above_beaker

    # -- script ----------------------------------------------------------

    def _build_script(self, above_beaker, in_beaker, over_tube):
        script = []
        if not self.spec.start_grasped:
            script += [("move", self.spec.pipette_rest_position_mm), ("grasp", None)]
        script += [
            ("move", above_beaker),
            ("squeeze_full", None),       # purge air before entering the liquid
            ("move", in_beaker),
            ("release_hold", None),       # draw a full load
            ("move", above_beaker),
            ("move", over_tube),
            ("dispense_all", None),       # first load goes in whole
            ("move", above_beaker),
            ("squeeze_full", None),
            ("move", in_beaker),
            ("release_hold", None),       # second load
            ("move", above_beaker),
            ("move", over_tube),
            ("plan_partial", None),       # read the tube, decide the remainder
            ("partial_squeeze", None),
            ("verify", None),
            ("finish", None),
        ]
        return script

    # -- helpers ----------------------------------------------------------

    def _displacement_for(self, waypoint) -> Tuple[float, float, float]:
        s = float(self.spec.scale_factor)
        return (
            (waypoint[0] - self._home[0]) / s,
            (waypoint[1] - self._home[1]) / s,
            (waypoint[2] - self._home[2]) / s,
        )

    def _ramp_grip(self, direction: float, scale: float = 1.0) -> None:
        """Advance the grip command one tick in compression units."""
        step = self.pacing.squeeze_rate * self._tick_s * scale
        opening_step = step * (self.spec.outer_diameter_mm - self.spec.min_squeezed_diameter_mm) \
            / self.spec.gripper_max_gap_mm
        cmd = self._grip_cmd - direction * opening_step
        lo = self.scene.opening_for_compression(1.0)
        self._grip_cmd = min(max(cmd, lo), self._open_guard)

    def _approach_scale(self, remaining: float) -> float:
        """Decelerate when the estimate closes on the target."""
        return 1.0 if remaining > 0.06 else 0.25

    def _phase_elapsed(self, now_us: int) -> float:
        return (now_us - self._phase_started_us) / 1e6

    def _advance_phase(self) -> None:
        self._phase_idx += 1
        self._phase_started_us = None
        self._phase_state = {}

    # -- the poll loop -----------------------------------------------------

    def poll(self, now_us: int, master: MasterEndpoint) -> OperatorAction:
        if self.done or self._phase_idx >= len(self._phases):
            return OperatorAction(self._displacement_for(self._waypoint),
                                  grip=self._grip_cmd, done=True)
        kind, arg = self._phases[self._phase_idx]
        if self._phase_started_us is None:
            self._phase_started_us = now_us
            self.estimator.begin_action()
        handler = getattr(self, f"_phase_{kind}")
        handler(now_us, arg, master)
        return OperatorAction(self._displacement_for(self._waypoint),
                              grip=self._grip_cmd, done=self.done)

    # -- phases -------------------------------------------------------------

    def _phase_move(self, now_us, waypoint, master):
        self._waypoint = waypoint
        pos = master.twin.position_mm
        err = math.dist(pos, waypoint)
        settled = self._phase_state.setdefault("settled", 0)
        if err <= 1.0:
            self._phase_state["settled"] = settled + 1
        else:
            self._phase_state["settled"] = 0
        if self._phase_state["settled"] >= 20 or self._phase_elapsed(now_us) > 20.0:
            self._advance_phase()

    def _phase_grasp(self, now_us, _arg, master):
        self._grip_cmd = self.scene.grasp_opening - 0.002
        if master.twin.contact_opening is not None or self._phase_elapsed(now_us) > 5.0:
            self._advance_phase()

    def _phase_squeeze_full(self, now_us, _arg, master):
        # pressing to the mechanical stop needs no estimate
        if "stop" not in self._phase_state:
            self._ramp_grip(+1.0)
            if self._grip_cmd <= self.scene.opening_for_compression(1.0) + 1e-12 \
                    or self._phase_elapsed(now_us) > 12.0:
                self._grip_cmd = self.scene.opening_for_compression(1.0)
                self._phase_state["stop"] = True
        elif self._settle_ticks(8):
            self._advance_phase()

    def _phase_release_hold(self, now_us, _arg, master):
        if "stop" not in self._phase_state:
            c_est = self.estimator.estimate(self._true_c(), master)
            self._ramp_grip(-1.0, self._approach_scale(c_est - self._c_hold))
            if c_est <= self._c_hold or self._grip_cmd >= self._open_guard \
                    or self._phase_elapsed(now_us) > 18.0:
                self._phase_state["stop"] = True
        elif self._settle_ticks(8):
            self._advance_phase()

    def _phase_dispense_all(self, now_us, _arg, master):
        self._ramp_grip(+1.0)
        if self._grip_cmd <= self.scene.opening_for_compression(1.0) + 1e-12:
            if self._settle_ticks(int(0.4 / self._tick_s)):
                self._advance_phase()

    def _phase_plan_partial(self, now_us, _arg, master):
        if self._phase_elapsed(now_us) < self.pacing.settle_s:
            return
        state = self.peek()
        reading = self.visual.read_tube_ml(self.spec.target_tube,
                                           state.ledger.tube_ml[self.spec.target_tube])
        # aim short on purpose: a shortfall is correctable against the
        # marker, an overdose is not
        self._needed_ml = max(0.0, self._marker - reading - UNDERSHOOT_MARGIN_ML)
        # reference compression judged now, under this action's perception
        # draw; the squeeze that follows re-engages with a fresh one, so
        # the two do not cancel, exactly like looking away and back
        self._c_ref = self.estimator.estimate(self._true_c(), master)
        self._advance_phase()

    def _phase_partial_squeeze(self, now_us, _arg, master):
        if "target" not in self._phase_state:
            self._phase_state["target"] = min(
                0.98, self._c_ref + self._needed_ml / self.spec.bulb_capacity_ml
            )
        if "stop" not in self._phase_state:
            c_est = self.estimator.estimate(self._true_c(), master)
            target = self._phase_state["target"]
            self._ramp_grip(+1.0, self._approach_scale(target - c_est))
            if c_est >= target or self._phase_elapsed(now_us) > 18.0:
                self._phase_state["stop"] = True
        elif self._settle_ticks(8):
            self._advance_phase()

    def _phase_verify(self, now_us, _arg, master):
        st = self._phase_state
        if "reads" not in st:
            st["reads"] = []
            st["wait_until"] = now_us + int(self.pacing.settle_s * 1e6)
        if now_us < st["wait_until"]:
            return
        state = self.peek()
        st["reads"].append(self.visual.read_tube_ml(
            self.spec.target_tube, state.ledger.tube_ml[self.spec.target_tube]))
        if len(st["reads"]) < self.pacing.verify_reads:
            st["wait_until"] = now_us + int(self.pacing.settle_s * 1e6)
            return
        reading = sum(st["reads"]) / len(st["reads"])
        shortfall = self._marker - reading
        if shortfall > self.pacing.trim_threshold_ml and self._trims_left > 0:
            self._trims_left -= 1
            self._needed_ml = shortfall
            self._c_ref = self.estimator.estimate(self._true_c(), master)
            self._phases.insert(self._phase_idx + 1, ("partial_squeeze", None))
            self._phases.insert(self._phase_idx + 2, ("verify", None))
        self._advance_phase()

    def _phase_finish(self, now_us, _arg, master):
        self.done = True
        self.done_at_us = now_us

    # -- internals ----------------------------------------------------------

    def _true_c(self) -> float:
        return self.peek().pipette.compression

    def _settle_ticks(self, n: int) -> bool:
        held = self._phase_state.get("hold", 0) + 1
        self._phase_state["hold"] = held
        return held >= n


class OraclePolicy:
    """Condition-independent operator with full state access; the upper
    bound any scripted condition should approach."""

    def __init__(self, spec: ScenarioSpec, seed: int = 0,
                 scene_peek: Callable[[], SceneState] = None):
        self.inner = ScriptedOperator(spec, FeedbackCondition.VFE, seed, scene_peek)
        # perfect interpretation: no per-action bias
        est = self.inner.estimator
        est.begin_action = lambda: None
        est.estimate = lambda true_c, master: true_c
        self.inner.visual.read_tube_ml = (
            lambda index, true_ml: true_ml
        )

    @property
    def done(self):
        return self.inner.done

    @property
    def done_at_us(self):
        return self.inner.done_at_us

    def poll(self, now_us: int, master: MasterEndpoint) -> OperatorAction:
        return self.inner.poll(now_us, master)


class StationaryOperator:
    """Holds the home pose; used for rate/twin checks."""

    done = False
    done_at_us = None

    def __init__(self, grip: float = 1.0):
        self.grip = grip

    def poll(self, now_us: int, master: MasterEndpoint) -> OperatorAction:
        return OperatorAction((0.0, 0.0, 0.0), grip=self.grip)
