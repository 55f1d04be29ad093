"""Render what the operator sees in each scenario and save PNGs.

Run:  python demos/02_camera_view_gallery.py
Writes demo_output/view_<scenario>.png plus a tilt sweep.
"""

from pathlib import Path

from clicknav import SimRobot, render_camera, scenario

out = Path("demo_output")
out.mkdir(exist_ok=True)

for name in ("open_space", "doorway", "block"):
    spec = scenario(name)
    robot = SimRobot(pose=spec.start_pose)
    frame = render_camera(spec.world, robot, target=spec.target, seq=1)
    path = out / f"view_{name}.png"
    path.write_bytes(frame.to_png())
    print(f"wrote {path}  ({frame.pixels.shape[1]}x{frame.pixels.shape[0]})")

spec = scenario("doorway")
for tilt in (-0.3, -0.5, -0.8):
    robot = SimRobot(pose=spec.start_pose, camera_tilt=tilt)
    frame = render_camera(spec.world, robot, target=spec.target, seq=1)
    path = out / f"view_doorway_tilt{abs(tilt):.1f}.png"
    path.write_bytes(frame.to_png())
    print(f"wrote {path}")
