"""Kinesthetic grasp-force curve across the squeeze.

The force rendered to the operator's grasp is the per-cell mean of both
finger pads times how far the gripper has closed past first contact. Zero
before contact, rising smoothly, clamped at the 8 N display ceiling.
"""

import numpy as np

from telehaptic import GripperState, default_scenario, kinesthetic_force
from telehaptic.sim import RemoteScene
from telehaptic.tactile import Finger, TactileFrame

spec = default_scenario()
scene = RemoteScene(spec)

contact_opening = scene.grasp_opening
print(f"contact opening (normalized): {contact_opening:.4f}")
print(f"{'c':>5} {'opening':>8} {'mean F (N)':>11} {'rendered (N)':>13}")

for c in np.linspace(0.0, 1.0, 11):
    cells = scene.footprint_cells(float(c))
    left = TactileFrame(Finger.LEFT, cells, 0)
    right = TactileFrame(Finger.RIGHT, cells, 0)
    opening = scene.opening_for_compression(float(c))
    grip = GripperState(p_current=opening, p_contact=contact_opening)
    force = kinesthetic_force(left, right, grip)
    mean = (left.cells.sum() + right.cells.sum()) / 100.0
    bar = "#" * int(force.magnitude * 120)
    print(f"{c:5.1f} {opening:8.4f} {mean:11.3f} {force.magnitude:13.4f}  {bar}")

print("\nsaturated pads at full closure clamp at the display ceiling:")
nines = TactileFrame(Finger.LEFT, np.full((10, 5), 9.0), 0)
grip = GripperState(p_current=0.0, p_contact=1.0)
print(" ", kinesthetic_force(nines, TactileFrame(Finger.RIGHT, nines.cells, 0), grip))
