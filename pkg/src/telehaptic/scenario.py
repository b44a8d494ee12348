"""Scenario configuration: geometry, volumes, control and operator constants.

Scenarios load from a TOML file (key-value with nested tables); the packaged
``data/default_scenario.toml`` is both the default configuration and its own
documentation. File values override defaults key by key.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from typing import Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from importlib import resources

from .control import Axis, PidGains, WorkspaceConfig


def _tupled(value):
    if isinstance(value, (list, tuple)):
        return tuple(_tupled(v) for v in value)
    return value


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything a trial needs: scene geometry, volumes, gains, noise model."""

    # task
    target_volume_ml: float = 2.0
    target_tube: int = 0
    timeout_s: float = 600.0
    seed: int = 0
    start_grasped: bool = True
    # volumes
    beaker_ml: float = 100.0
    tube_markers_ml: Tuple[float, ...] = (2.0, 2.0)
    # geometry (mm, robot base frame, z up)
    home_position_mm: Tuple[float, float, float] = (350.0, 0.0, 280.0)
    home_orientation_deg: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    beaker_center_mm: Tuple[float, float] = (350.0, 0.0)
    beaker_radius_mm: float = 40.0
    beaker_surface_z_mm: float = 150.0
    tube_centers_mm: Tuple[Tuple[float, float], ...] = ((350.0, -80.0), (350.0, 80.0))
    tube_radius_mm: float = 9.0
    tube_rim_z_mm: float = 160.0
    tip_length_mm: float = 100.0
    pipette_rest_position_mm: Tuple[float, float, float] = (280.0, -120.0, 240.0)
    grasp_tolerance_mm: float = 10.0
    # pipette
    bulb_capacity_ml: float = 1.5
    outer_diameter_mm: float = 12.0
    min_squeezed_diameter_mm: float = 4.0
    # gripper
    gripper_max_gap_mm: float = 85.0
    gripper_max_speed: float = 0.8
    contact_rows: Tuple[int, int] = (2, 7)
    # control
    scale_factor: int = 2
    lock_axes: Tuple[str, ...] = ()
    kp: float = 4.0
    ki: float = 0.5
    kd: float = 0.05
    integral_limit: float = 50.0
    output_limit: float = 250.0
    # stream rates
    control_hz: int = 125
    tactile_hz: int = 120
    state_hz: int = 50
    # operator perception model
    visual_volume_bias_sigma_ml: float = 0.13
    visual_volume_white_sigma_ml: float = 0.075
    visual_opening_sigma: float = 0.20
    force_read_rel_sigma: float = 0.045
    pattern_cell_sigma: float = 0.04

    def __post_init__(self):
        if self.target_volume_ml <= 0.0:
            raise ValueError("target_volume_ml must be positive")
        if self.beaker_ml < 0.0:
            raise ValueError("volumes must be nonnegative")
        if self.scale_factor not in (1, 2, 3, 4, 5):
            raise ValueError("scale_factor must be 1..5")
        if not 0 <= self.target_tube < len(self.tube_centers_mm):
            raise ValueError("target_tube out of range")
        for name in ("tube_markers_ml", "tube_centers_mm", "home_position_mm",
                     "home_orientation_deg", "beaker_center_mm",
                     "pipette_rest_position_mm", "contact_rows", "lock_axes"):
            object.__setattr__(self, name, _tupled(getattr(self, name)))

    # -- derived views -------------------------------------------------

    def gains(self) -> PidGains:
        return PidGains(self.kp, self.ki, self.kd, self.integral_limit, self.output_limit)

    def workspace(self) -> WorkspaceConfig:
        return WorkspaceConfig(self.scale_factor, frozenset(Axis(a) for a in self.lock_axes))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **overrides) -> "ScenarioSpec":
        return dataclasses.replace(self, **overrides)


_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioSpec)}


def _flatten(table: dict, out: dict) -> dict:
    for key, value in table.items():
        if isinstance(value, dict):
            _flatten(value, out)
        else:
            out[key] = value
    return out


# TOML keys whose names differ from the dataclass fields.
_KEY_ALIASES = {
    "max_gap_mm": "gripper_max_gap_mm",
    "max_speed": "gripper_max_speed",
}


def from_dict(data: dict) -> ScenarioSpec:
    flat = _flatten(data, {})
    kwargs = {}
    for key, value in flat.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELD_NAMES:
            raise ValueError(f"unknown scenario key: {key}")
        kwargs[name] = _tupled(value)
    return ScenarioSpec(**kwargs)


def load_scenario(path) -> ScenarioSpec:
    with open(path, "rb") as fh:
        return from_dict(tomllib.load(fh))


def default_scenario() -> ScenarioSpec:
    raw = resources.files("telehaptic").joinpath("data/default_scenario.toml").read_bytes()
    return from_dict(tomllib.loads(raw.decode()))
