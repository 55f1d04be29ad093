"""Walk through the click-to-destination geometry, one stage at a time.

Run:  python demos/01_pixel_to_ground_tour.py
"""

import numpy as np

from clicknav import CameraModel, camera_joints, pixel_to_ground, webot_chain
from clicknav.camgeom import distort, pixel_to_ray, project, undistort
from clicknav.kinchain import camera_ray_in_base, intersect_ground

model = CameraModel(fx=525.0, fy=525.0, cx=319.5, cy=239.5,
                    k1=-0.12, k2=0.02, p1=0.003, p2=-0.002)
chain = webot_chain()
joints = camera_joints(pan=0.0, tilt=-0.5)

print("== 1. lens distortion and its inverse ==")
p = np.array([0.31, -0.18])
d = distort(model, p)
back = undistort(model, d)
print(f"ideal {p} -> distorted {d} -> recovered {back}")

print("\n== 2. projecting a 3D point to a pixel ==")
point = np.array([0.4, 0.1, 2.0])  # camera frame, meters
u, v = project(model, point)
print(f"camera-frame point {point} -> pixel ({u:.2f}, {v:.2f})")

print("\n== 3. back-projecting the pixel to a view ray ==")
ray = pixel_to_ray(model, u, v)
print(f"pixel -> unit ray {ray.direction}  (recovers {point / np.linalg.norm(point)})")

print("\n== 4. the ray in the robot base frame ==")
T = chain.transform(joints)
print(f"camera sits at {T[:3, 3]} with optical axis {T[:3, 1]}")
p0, p1 = camera_ray_in_base(T, chain.remap, pixel_to_ray(model, 320.0, 300.0))
print(f"line through P0={p0} and P1={p1}")

print("\n== 5. intersecting with the ground plane ==")
gp = intersect_ground(p0, p1)
print(f"destination on the floor: ({gp.x:.3f}, {gp.y:.3f}) m")

print("\n== 6. the whole pipeline in one call ==")
for px in [(320.0, 250.0), (320.0, 400.0), (100.0, 350.0), (550.0, 300.0)]:
    gp = pixel_to_ground(model, chain, joints, *px)
    print(f"click {px} -> go to ({gp.x:+.2f}, {gp.y:+.2f}) m")
