"""Watch the reactive navigator detour around the block obstacle.

Run:  python demos/03_reactive_navigation.py
Prints the trajectory and saves demo_output/trajectory_block.png.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from clicknav import LaserScan, ReactiveNavigator, SimRobot, VelocityCmd, raycast_lidar, scenario
from clicknav.simworld import DT, step

spec = scenario("block")
robot = SimRobot(pose=spec.start_pose)
nav = ReactiveNavigator()
nav.set_goal(spec.target.cx, spec.target.cy)

xs, ys = [robot.pose.x], [robot.pose.y]
t = 0.0
while t < 60.0:
    scan = LaserScan(-np.pi, 2 * np.pi / 360, raycast_lidar(spec.world, robot.pose), 6.0)
    status, cmd = nav.step(robot.pose, scan, current=VelocityCmd(robot.v, robot.w))
    if status == "arrived":
        print(f"arrived after {t:.1f} s, "
              f"{sum(np.hypot(np.diff(xs), np.diff(ys))):.2f} m of path")
        break
    step(spec.world, robot, cmd, DT)
    xs.append(robot.pose.x)
    ys.append(robot.pose.y)
    t += DT
    if abs(t % 2.0) < DT / 2:
        print(f"t={t:4.1f}s pose=({robot.pose.x:+.2f}, {robot.pose.y:+.2f}) {status}")

fig, ax = plt.subplots(figsize=(7, 5))
for seg in spec.world.segments:
    ax.plot([seg[0], seg[2]], [seg[1], seg[3]], "k-", lw=2)
c = spec.target.corners()
ax.plot(np.append(c[:, 0], c[0, 0]), np.append(c[:, 1], c[0, 1]), "g--", label="target zone")
ax.plot(xs, ys, "b-", label="trajectory")
ax.plot(xs[0], ys[0], "bo", label="start")
ax.set_aspect("equal")
ax.legend()
ax.set_title("reactive detour around the block")
out = Path("demo_output")
out.mkdir(exist_ok=True)
fig.savefig(out / "trajectory_block.png", dpi=120)
print(f"wrote {out / 'trajectory_block.png'}")
