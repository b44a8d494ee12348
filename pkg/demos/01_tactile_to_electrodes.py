"""From finger-pad forces to electrode stimulation patterns.

Walks the squeeze from first contact to full compression and shows how the
10x5 force grid maps onto the 4x5 electrode matrix: a narrow 1 N stripe
widens into a saturated band, exactly the progression an operator feels.
"""

import numpy as np

from telehaptic import default_scenario, pattern_to_levels, resample_bicubic
from telehaptic.sim import RemoteScene
from telehaptic.tactile import Finger, TactileFrame

scene = RemoteScene(default_scenario())

SHADES = " .:-=+*#%@"


def render(grid, vmax):
    rows = []
    for row in np.asarray(grid):
        rows.append("".join(SHADES[min(int(v / vmax * (len(SHADES) - 1)), 9)] for v in row))
    return rows


for c in (0.0, 0.3, 0.6, 1.0):
    cells = scene.footprint_cells(c)
    frame = TactileFrame(Finger.LEFT, cells, 0)
    pattern = resample_bicubic(frame)
    levels = pattern_to_levels(pattern)

    print(f"\ncompression c = {c:.1f}   "
          f"peak {cells.max():.2f} N, active cells {(cells > 0).sum()}/50")
    sensor_rows = render(cells, 9.0)
    pattern_rows = render(pattern.cells, 1.0)
    print("  sensor 10x5      electrodes 4x5   levels")
    for i in range(10):
        pat = pattern_rows[i - 3] if 3 <= i < 7 else "     "
        lev = (" ".join(f"{v:3d}" for v in levels[i - 3])
               if 3 <= i < 7 else "")
        print(f"  [{sensor_rows[i]}]          [{pat}]     {lev}")

print("\nA constant 4.5 N pad maps to intensity 0.5 everywhere:")
flat = TactileFrame(Finger.LEFT, np.full((10, 5), 4.5), 0)
print(" ", resample_bicubic(flat).cells[0])
