"""Drive the teleop service core without any networking.

Run:  python demos/05_teleop_session_headless.py
Simulates an operator clicking the target zone in the camera view and
follows the status stream until arrival.
"""

from pathlib import Path

from clicknav.kinchain import camera_joints, ground_to_pixel
from clicknav.simworld import scenario
from clicknav.teleop_service import TeleopSession

session = TeleopSession(spec=scenario("doorway"))
session.tick()  # first frame renders immediately

frame = session.last_frame
out = Path("demo_output")
out.mkdir(exist_ok=True)
(out / "operator_view.png").write_bytes(frame.png)
print(f"operator sees frame {frame.seq} (saved to demo_output/operator_view.png)")

# click where that frame shows the target-zone center
spec = session.spec
u, v = ground_to_pixel(session.camera, session.chain,
                       camera_joints(frame.pan, frame.tilt),
                       (spec.target.cx - frame.pose.x, spec.target.cy - frame.pose.y))
print(f"clicking pixel ({u:.0f}, {v:.0f})")
session.enqueue({"type": "goto", "u": u, "v": v})

last_status = None
for _ in range(1400):
    for ev in session.tick():
        if ev["type"] == "state" and ev["nav_status"] != last_status:
            last_status = ev["nav_status"]
            p = ev["pose"]
            print(f"tick {ev['tick']:4d}: {last_status:10s} pose=({p['x']:+.2f}, {p['y']:+.2f})")
    if last_status == "arrived":
        break

p = session.state_event()["pose"]
print(f"final pose ({p['x']:+.3f}, {p['y']:+.3f}); "
      f"true error {((session.robot.pose.x - 2.0)**2 + session.robot.pose.y**2)**0.5 * 100:.1f} cm "
      f"from the target center")
