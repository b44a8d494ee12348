"""Tactile sensing grids and the electro-tactile pattern mapping.

A gripper finger pad carries a 10x5 force-sensing grid (rows along the pad's
long axis, forces in newtons). Stimulation hardware is coarser: a 4x5
electrode matrix per finger. This module holds both value types, the
sensor-side clamping, and the bicubic downsampling between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

SENSOR_ROWS = 10
SENSOR_COLS = 5
PATTERN_ROWS = 4
PATTERN_COLS = 5

FORCE_FLOOR_N = 1.0      # per-cell detection floor; weaker contact reads 0
FORCE_SATURATION_N = 9.0  # per-cell saturation

# Cubic convolution kernel parameter (Keys kernel). Fixed for
# reproducibility; -0.5 is the common default.
KERNEL_A = -0.5


class Finger(Enum):
    LEFT = 0
    RIGHT = 1


class SensorValueError(ValueError):
    """Raw sensor input was negative or non-finite."""


def _frozen_grid(cells, rows, cols):
    arr = np.array(cells, dtype=np.float64)
    if arr.shape != (rows, cols):
        raise ValueError(f"expected {rows}x{cols} grid, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TactileFrame:
    """One finger's force grid at one sampling instant.

    Every cell is either exactly 0 (below the detection floor) or in
    [1, 9] N (clamped at saturation).
    """

    finger: Finger
    cells: np.ndarray  # (10, 5) float64, newtons
    timestamp_us: int

    def __post_init__(self):
        arr = _frozen_grid(self.cells, SENSOR_ROWS, SENSOR_COLS)
        object.__setattr__(self, "cells", arr)
        bad = ~((arr == 0.0) | ((arr >= FORCE_FLOOR_N) & (arr <= FORCE_SATURATION_N)))
        if bad.any():
            raise ValueError("tactile cells must be 0 or in [1, 9] N")

    @property
    def total_force(self) -> float:
        return float(self.cells.sum())


@dataclass(frozen=True, eq=False)
class ElectrodePattern:
    """One finger's 4x5 stimulation intensities, dimensionless in [0, 1]."""

    finger: Finger
    cells: np.ndarray  # (4, 5) float64
    source_timestamp_us: int

    def __post_init__(self):
        arr = _frozen_grid(self.cells, PATTERN_ROWS, PATTERN_COLS)
        object.__setattr__(self, "cells", arr)
        if (arr < 0.0).any() or (arr > 1.0).any():
            raise ValueError("pattern cells must lie in [0, 1]")


def clamp_sensor(raw_cells, finger: Finger = Finger.LEFT, timestamp_us: int = 0) -> TactileFrame:
    """Apply the sensor's detection floor and saturation to a raw force grid.

    Cells below 1 N read as exactly 0; cells above 9 N saturate at 9 N.
    Raises SensorValueError on negative or non-finite input.
    """
    arr = np.array(raw_cells, dtype=np.float64)
    if arr.shape != (SENSOR_ROWS, SENSOR_COLS):
        raise SensorValueError(f"expected {SENSOR_ROWS}x{SENSOR_COLS} grid, got {arr.shape}")
    if not np.isfinite(arr).all() or (arr < 0.0).any():
        raise SensorValueError("raw sensor cells must be finite and nonnegative")
    clamped = np.where(arr < FORCE_FLOOR_N, 0.0, np.minimum(arr, FORCE_SATURATION_N))
    return TactileFrame(finger=finger, cells=clamped, timestamp_us=timestamp_us)


def _cubic_kernel(t: np.ndarray, a: float = KERNEL_A) -> np.ndarray:
    t = np.abs(t)
    w = np.zeros_like(t)
    near = t <= 1.0
    w[near] = (a + 2.0) * t[near] ** 3 - (a + 3.0) * t[near] ** 2 + 1.0
    far = (t > 1.0) & (t < 2.0)
    w[far] = a * t[far] ** 3 - 5.0 * a * t[far] ** 2 + 8.0 * a * t[far] - 4.0 * a
    return w


def resample_weights(src_len: int, dst_len: int, a: float = KERNEL_A) -> np.ndarray:
    """(dst_len, src_len) bicubic convolution matrix for one axis.

    Align-corners mapping: output sample i reads input coordinate
    i*(src-1)/(dst-1). The 4-tap window is edge-clamped, so border weight
    folds onto the first/last input sample.
    """
    weights = np.zeros((dst_len, src_len))
    scale = (src_len - 1) / (dst_len - 1)
    for i in range(dst_len):
        x = i * scale
        x0 = int(np.floor(x))
        taps = np.arange(x0 - 1, x0 + 3)
        w = _cubic_kernel(x - taps, a)
        np.add.at(weights[i], np.clip(taps, 0, src_len - 1), w)
    return weights


# 10-row axis reduced to 4, 5-column axis kept identity.
_ROW_WEIGHTS = resample_weights(SENSOR_ROWS, PATTERN_ROWS)


def resample_bicubic(frame: TactileFrame) -> ElectrodePattern:
    """Map a 10x5 tactile frame onto the 4x5 electrode matrix.

    Bicubic convolution along the long axis, identity across columns.
    Interpolated forces are clamped to [0, 9] N (the kernel can overshoot
    near step edges) and normalized by the 9 N saturation, so full-scale
    stimulation corresponds to a saturated sensor.
    """
    forces = _ROW_WEIGHTS @ frame.cells
    np.clip(forces, 0.0, FORCE_SATURATION_N, out=forces)
    return ElectrodePattern(
        finger=frame.finger,
        cells=forces / FORCE_SATURATION_N,
        source_timestamp_us=frame.timestamp_us,
    )


def pattern_to_levels(pattern: ElectrodePattern) -> np.ndarray:
    """Quantize intensities to integer stimulation levels 0..255.

    Round half up, so 0.5 intensity lands on level 128.
    """
    return np.floor(pattern.cells * 255.0 + 0.5).astype(np.int64)
