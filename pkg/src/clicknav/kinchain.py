"""Denavit-Hartenberg kinematics and pixel-to-ground projection.

A kinematic chain carries the camera relative to the robot base.  Its
composed 4x4 transform T places the camera's mount frame in the base
frame; a fixed axis remap relates the mount frame to the optical frame
camgeom works in.  Back-projecting a clicked pixel through T and
intersecting with the base-frame ground plane (z = 0) yields the drive
destination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .camgeom import CameraModel, CameraRay, pixel_to_ray

# Near-horizon clicks map to ground points absurdly far away with
# centimeter pixel sensitivity; anything beyond this range is refused.
MAX_CLICK_RANGE = 10.0

# Mount-to-optical axis remap: the optical frame sees the mount frame's
# (X, Y, Z) as (-Z, -X, Y), i.e. the mount's +Y axis is the optical axis.
AXIS_REMAP_PAPER = np.array([
    [0.0, 0.0, -1.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
])
AXIS_REMAP_IDENTITY = np.eye(3)

_REMAPS = {"paper_eq10": AXIS_REMAP_PAPER, "identity": AXIS_REMAP_IDENTITY}


class JointCountMismatch(ValueError):
    """JointState length does not match the chain's revolute link count."""


class AboveHorizon(ValueError):
    """View ray is level or rising; it never meets the ground ahead."""


class BehindCamera(ValueError):
    """Ground intersection lies behind the camera (t <= 0)."""


class OutOfRange(ValueError):
    """Ground hit is farther than the maximum click range."""


@dataclass(frozen=True)
class DhLink:
    """One Denavit-Hartenberg link.

    a: link length (m), d: link offset (m), alpha: twist (rad),
    theta_offset: fixed joint-angle offset (rad).  Revolute links consume
    one joint angle; fixed links use theta_offset alone.
    """

    a: float
    d: float
    alpha: float
    theta_offset: float = 0.0
    joint: str = "fixed"

    def __post_init__(self):
        if self.joint not in ("fixed", "revolute"):
            raise ValueError(f"joint must be 'fixed' or 'revolute', got {self.joint!r}")
        if not (np.isfinite(self.a) and np.isfinite(self.d)):
            raise ValueError("link a and d must be finite")
        if not -np.pi <= self.alpha <= np.pi:
            raise ValueError(f"alpha {self.alpha} outside [-pi, pi]")


class GroundPoint(NamedTuple):
    """Destination on the base-frame ground plane, meters."""

    x: float
    y: float


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Ordered DH links plus the camera axis remap."""

    links: tuple[DhLink, ...]
    remap: np.ndarray

    @property
    def n_joints(self) -> int:
        return sum(1 for link in self.links if link.joint == "revolute")

    def transform(self, joints: Sequence[float]) -> np.ndarray:
        return chain_transform(self.links, joints)


def link_transform(link: DhLink, q: float = 0.0) -> np.ndarray:
    """Standard DH homogeneous transform with theta = theta_offset + q."""
    th = link.theta_offset + (q if link.joint == "revolute" else 0.0)
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(link.alpha), np.sin(link.alpha)
    return np.array([
        [ct, -st * ca, st * sa, link.a * ct],
        [st, ct * ca, -ct * sa, link.a * st],
        [0.0, sa, ca, link.d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def chain_transform(links: Sequence[DhLink], joints: Sequence[float]) -> np.ndarray:
    """Ordered product of link transforms; empty chain is the identity."""
    joints = list(joints)
    n_rev = sum(1 for link in links if link.joint == "revolute")
    if len(joints) != n_rev:
        raise JointCountMismatch(f"chain has {n_rev} revolute links, got {len(joints)} joint angles")
    T = np.eye(4)
    qi = iter(joints)
    for link in links:
        q = next(qi) if link.joint == "revolute" else 0.0
        T = T @ link_transform(link, q)
    return T


def transform_is_rigid(T: np.ndarray, tol: float = 1e-12) -> bool:
    """True when the rotation block is orthonormal with det +1 and the bottom row is (0,0,0,1)."""
    R = T[:3, :3]
    return (
        np.max(np.abs(R @ R.T - np.eye(3))) < tol
        and abs(np.linalg.det(R) - 1.0) < tol
        and np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0])
    )


def camera_ray_in_base(T: np.ndarray, remap: np.ndarray, ray: CameraRay) -> tuple[np.ndarray, np.ndarray]:
    """Express a camera-frame view ray as two base-frame points.

    P0 is the optical center (T's translation).  P1 is the ray's point at
    unit optical depth, lifted from the optical frame back into the mount
    frame through the remap inverse and then through T.
    """
    p_optical = ray.direction / ray.direction[2]
    p_mount = remap.T @ p_optical
    p0 = T[:3, 3].copy()
    p1 = T[:3, :3] @ p_mount + T[:3, 3]
    return p0, p1


def intersect_ground(p0: np.ndarray, p1: np.ndarray, max_range: float = MAX_CLICK_RANGE) -> GroundPoint:
    """Intersect the line through P0 and P1 with the base-frame z = 0 plane.

    Solves P(t) = P0 + t*(P1 - P0) for P(t).z = 0.  The hit must lie
    forward of the camera (t > 0) and within max_range of the base origin.
    """
    dz = p1[2] - p0[2]
    if dz >= 0:
        raise AboveHorizon("ray is level or rising; no forward ground hit")
    t = -p0[2] / dz
    if t <= 0:
        raise BehindCamera("ground intersection lies behind the camera")
    hit = p0 + t * (p1 - p0)
    if np.hypot(hit[0], hit[1]) > max_range:
        raise OutOfRange(f"ground hit {np.hypot(hit[0], hit[1]):.2f} m away exceeds {max_range} m")
    return GroundPoint(float(hit[0]), float(hit[1]))


def pixel_to_ground(
    model: CameraModel,
    chain: KinematicChain,
    joints: Sequence[float],
    u: float,
    v: float,
    max_range: float = MAX_CLICK_RANGE,
) -> GroundPoint:
    """Convert a clicked pixel to a destination on the ground plane.

    Composition of the whole geometry stack: pixel -> undistorted view ray
    -> base-frame line -> z = 0 intersection.
    """
    T = chain.transform(joints)
    if T[2, 3] <= 0:
        raise ValueError("camera must be above the ground plane")
    ray = pixel_to_ray(model, u, v)
    p0, p1 = camera_ray_in_base(T, chain.remap, ray)
    return intersect_ground(p0, p1, max_range)


def ground_to_pixel(
    model: CameraModel,
    chain: KinematicChain,
    joints: Sequence[float],
    point_xy: Sequence[float],
) -> tuple[float, float]:
    """Forward-project a base-frame ground point to a pixel.

    Inverse of pixel_to_ground for visible points; used by the renderer
    and by the auto controller to click the target it sees.
    """
    from .camgeom import project

    T = chain.transform(joints)
    p_base = np.array([point_xy[0], point_xy[1], 0.0])
    p_mount = T[:3, :3].T @ (p_base - T[:3, 3])
    p_optical = chain.remap @ p_mount
    return project(model, p_optical)


def webot_chain() -> KinematicChain:
    """Default camera-mast chain: a fixed riser, a pan joint, a tilt joint.

    The riser lifts the mount 1.10 m up and 0.05 m forward.  The first
    revolute joint turns about the vertical (pan); its pi offset plus the
    second joint's pi/2 offset orient the mount so that at zero angles the
    optical axis points straight ahead with the image upright and
    unmirrored.  Given the mount-to-optical remap, the tilt joint's
    positive direction pitches the view DOWN; see camera_joints for the
    user-facing sign convention.
    """
    return KinematicChain(
        links=(
            DhLink(a=0.05, d=1.10, alpha=0.0, theta_offset=0.0, joint="fixed"),
            DhLink(a=0.03, d=0.0, alpha=np.pi / 2, theta_offset=np.pi, joint="revolute"),
            DhLink(a=0.02, d=0.0, alpha=0.0, theta_offset=np.pi / 2, joint="revolute"),
        ),
        remap=AXIS_REMAP_PAPER,
    )


def camera_joints(pan: float, tilt: float) -> list[float]:
    """Joint angles for the default chain from user-facing pan/tilt.

    pan: positive swings the view left (counterclockwise, like robot
    heading).  tilt: positive looks up, negative looks down (so the usual
    operating value is negative).  The tilt joint itself rotates the
    opposite way, hence the sign flip.
    """
    return [pan, -tilt]


def load_chain_config(path) -> KinematicChain:
    """Load a kinematic chain from a JSON config file.

    Schema::

        { "links": [ {"a": ..., "d": ..., "alpha": ...,
                      "theta_offset": ..., "joint": "fixed"|"revolute"}, ... ],
          "axis_remap": "paper_eq10" | "identity" }
    """
    with open(path) as f:
        cfg = json.load(f)
    links = tuple(
        DhLink(
            a=l["a"], d=l["d"], alpha=l["alpha"],
            theta_offset=l.get("theta_offset", 0.0),
            joint=l.get("joint", "fixed"),
        )
        for l in cfg["links"]
    )
    remap_name = cfg.get("axis_remap", "paper_eq10")
    if remap_name not in _REMAPS:
        raise ValueError(f"unknown axis_remap {remap_name!r}")
    return KinematicChain(links=links, remap=_REMAPS[remap_name])
