"""Pinhole camera model with radial/tangential lens distortion.

Maps 3D points in the camera frame to pixels and clicked pixels back to
view rays.  The camera frame convention here is the standard one: +Z is
the optical axis, +X right, +Y down; pixel origin is the top-left corner
with u right and v down.  Any remapping between this frame and a robot
mount frame is the kinematics layer's job, not this module's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Rays more than ~84 deg off-axis have normalized coordinates beyond this
# bound and are rejected as numerically meaningless.
NORMALIZED_BOUND = 10.0

UNDISTORT_TOL = 1e-10
UNDISTORT_MAX_ITER = 50


class PointBehindCamera(ValueError):
    """3D point is at or behind the image plane (z <= 0)."""


class OutOfFrame(ValueError):
    """Pixel lies outside the image rectangle."""


class NoConvergence(RuntimeError):
    """Distortion inversion failed; point or coefficients outside the invertible region."""


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics plus distortion coefficients.

    fx, fy, cx, cy are in pixels; k1, k2, k3 are radial and p1, p2
    tangential distortion coefficients (dimensionless, applied to
    normalized image coordinates).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )

    @property
    def has_distortion(self) -> bool:
        return any((self.k1, self.k2, self.p1, self.p2, self.k3))

    def in_frame(self, u: float, v: float) -> bool:
        return 0 <= u < self.width and 0 <= v < self.height


class CameraRay(NamedTuple):
    """Back-projected view ray in the camera frame.

    origin is always the optical center (0,0,0); direction is a unit
    vector with positive z (in front of the camera).
    """

    origin: np.ndarray
    direction: np.ndarray


def default_camera() -> CameraModel:
    """Placeholder VGA intrinsics used when no calibration file is given."""
    return CameraModel(fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480)


def load_camera_config(path) -> CameraModel:
    """Load a camera model from a JSON config file.

    Expected schema::

        { "fx": ..., "fy": ..., "cx": ..., "cy": ...,
          "dist": [k1, k2, p1, p2, k3], "width": ..., "height": ... }

    The distortion array order (k1, k2, p1, p2, k3) is the common
    calibration-tool order and is fixed.
    """
    with open(path) as f:
        cfg = json.load(f)
    dist = cfg.get("dist", [0.0] * 5)
    if len(dist) not in (4, 5):
        raise ValueError(f"dist must have 4 or 5 entries, got {len(dist)}")
    k1, k2, p1, p2 = dist[:4]
    k3 = dist[4] if len(dist) == 5 else 0.0
    return CameraModel(
        fx=cfg["fx"], fy=cfg["fy"], cx=cfg["cx"], cy=cfg["cy"],
        width=cfg.get("width", 640), height=cfg.get("height", 480),
        k1=k1, k2=k2, p1=p1, p2=p2, k3=k3,
    )


def distort(model: CameraModel, xy) -> np.ndarray:
    """Apply the lens distortion model to normalized image points.

    xy is a point (2,) or an array of points (..., 2) on the unit-depth
    plane.  Returns the distorted normalized coordinates:

        x' = x*(1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p1 x y + p2 (r^2 + 2 x^2)
        y' = y*(1 + k1 r^2 + k2 r^4 + k3 r^6) + p1 (r^2 + 2 y^2) + 2 p2 x y

    with r^2 = x^2 + y^2.
    """
    xy = np.asarray(xy, dtype=float)
    x, y = xy[..., 0], xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (model.k1 + r2 * (model.k2 + r2 * model.k3))
    xd = x * radial + 2.0 * model.p1 * x * y + model.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + model.p1 * (r2 + 2.0 * y * y) + 2.0 * model.p2 * x * y
    return np.stack([xd, yd], axis=-1)


def undistort(model: CameraModel, xy_distorted) -> np.ndarray:
    """Invert the distortion model by fixed-point iteration.

    Solves for the ideal normalized point p such that
    distort(model, p) == xy_distorted.  Iterates

        p_{n+1} = (p_d - tangential(p_n)) / radial_factor(p_n)

    starting from the distorted point, to 1e-10 per component, capped at
    50 iterations.  Raises NoConvergence if the cap is hit, which signals
    coefficients or a point outside the invertible region.
    """
    xy_distorted = np.asarray(xy_distorted, dtype=float)
    if not model.has_distortion:
        return xy_distorted.copy()
    xd, yd = xy_distorted[..., 0], xy_distorted[..., 1]
    x, y = xd.copy(), yd.copy()
    for _ in range(UNDISTORT_MAX_ITER):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (model.k1 + r2 * (model.k2 + r2 * model.k3))
        tan_x = 2.0 * model.p1 * x * y + model.p2 * (r2 + 2.0 * x * x)
        tan_y = model.p1 * (r2 + 2.0 * y * y) + 2.0 * model.p2 * x * y
        x_new = (xd - tan_x) / radial
        y_new = (yd - tan_y) / radial
        done = np.max(np.abs(x_new - x)) < UNDISTORT_TOL and np.max(np.abs(y_new - y)) < UNDISTORT_TOL
        x, y = x_new, y_new
        if done:
            break
    else:
        raise NoConvergence(
            f"distortion inversion did not converge within {UNDISTORT_MAX_ITER} iterations"
        )
    return np.stack([x, y], axis=-1)


def project(model: CameraModel, point) -> tuple[float, float]:
    """Project a 3D camera-frame point (meters) to a pixel (u, v).

    The point must be strictly in front of the camera (z > 1e-9).  The
    result may lie outside the image rectangle; the caller clips.
    """
    point = np.asarray(point, dtype=float)
    z = point[2]
    if z <= 1e-9:
        raise PointBehindCamera(f"point z={z} is not in front of the camera")
    xy = point[:2] / z
    xd, yd = distort(model, xy)
    return (model.fx * xd + model.cx, model.fy * yd + model.cy)


def project_many(model: CameraModel, points: np.ndarray) -> np.ndarray:
    """Vectorized project for an (N, 3) array; no behind-camera check.

    Callers are expected to have culled points with z <= 0 already (the
    renderer clips against the near plane before projecting).
    """
    points = np.asarray(points, dtype=float)
    xy = points[..., :2] / points[..., 2:3]
    d = distort(model, xy)
    uv = np.empty_like(d)
    uv[..., 0] = model.fx * d[..., 0] + model.cx
    uv[..., 1] = model.fy * d[..., 1] + model.cy
    return uv


def pixel_to_ray(model: CameraModel, u: float, v: float) -> CameraRay:
    """Back-project a pixel to a unit view ray in the camera frame.

    The pixel must be inside the image rectangle.  Distortion is inverted
    before normalization, so feeding back a pixel produced by project()
    recovers the original direction.
    """
    if not model.in_frame(u, v):
        raise OutOfFrame(f"pixel ({u}, {v}) outside {model.width}x{model.height} frame")
    xy = np.array([(u - model.cx) / model.fx, (v - model.cy) / model.fy])
    ideal = undistort(model, xy)
    if np.any(np.abs(ideal) >= NORMALIZED_BOUND):
        raise NoConvergence(f"undistorted point {ideal} outside sane normalized bounds")
    d = np.array([ideal[0], ideal[1], 1.0])
    d /= np.linalg.norm(d)
    return CameraRay(origin=np.zeros(3), direction=d)


def pixel_rays(model: CameraModel) -> np.ndarray:
    """Per-pixel ray directions for the whole frame, shape (H, W, 3).

    Directions are on the unit-depth plane (z component is 1), not
    normalized; the ground intersection only needs the direction up to
    scale.  Used by the renderer's inverse ground mapping.
    """
    us, vs = np.meshgrid(np.arange(model.width), np.arange(model.height))
    xy = np.stack([(us - model.cx) / model.fx, (vs - model.cy) / model.fy], axis=-1)
    ideal = undistort(model, xy.reshape(-1, 2)).reshape(model.height, model.width, 2)
    return np.concatenate([ideal, np.ones((model.height, model.width, 1))], axis=-1)
