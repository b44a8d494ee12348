"""Workspace scaling, axis locks, and the velocity PID.

The desktop device's 160 mm x 110 mm cylinder maps onto the robot's 500 mm
reach at x1..x5; locked axes hold still. The slave-side PID turns pose
targets into bounded velocity commands; the closed loop against the Euler
integrator settles a 100 mm step without meaningful overshoot.
"""

from telehaptic import (
    Axis,
    HapticInput,
    PidGains,
    PidState,
    RobotTarget,
    WorkspaceConfig,
    pid_step,
    scale_workspace,
)

home = RobotTarget((350.0, 0.0, 280.0))
handle = HapticInput((10.0, -4.0, 2.0), (5.0, 0.0, -2.0))

for scale in (1, 2, 5):
    target = scale_workspace(handle, WorkspaceConfig(scale), home)
    off = tuple(round(t - h, 1) for t, h in zip(target.tcp_position, home.tcp_position))
    print(f"scale x{scale}: handle (10, -4, 2) mm -> TCP offset {off} mm, "
          f"tilt -> {target.tcp_orientation}")

locked = scale_workspace(handle, WorkspaceConfig(5, frozenset({Axis.X})), home)
off = tuple(round(t - h, 1) for t, h in zip(locked.tcp_position, home.tcp_position))
print(f"scale x5 with X locked: offset {off} mm")

print("\n100 mm step response, default gains (kp=4, ki=0.5, kd=0.05 at 125 Hz):")
gains = PidGains()
dt = 1.0 / 125.0
target = RobotTarget((100.0, 0.0, 0.0))
position = 0.0
state = PidState()
t = 0.0
marks = {0.25, 0.5, 1.0, 2.0, 3.0}
peak = 0.0
for _ in range(int(4.0 / dt)):
    command, state = pid_step(target, RobotTarget((position, 0.0, 0.0)), gains, state, dt)
    position += command[0] * dt
    t += dt
    peak = max(peak, position)
    if round(t, 3) in marks:
        bar = "=" * int(position / 2)
        print(f"  t={t:4.2f} s  x={position:7.3f} mm  |{bar}")
print(f"  peak {peak:.3f} mm (overshoot {peak - 100:.3f} mm), "
      f"final {position:.3f} mm")
