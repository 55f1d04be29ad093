"""Deterministic 2D world: differential-drive plant, lidar, camera render.

Worlds are collections of line-segment obstacles inside an axis-aligned
boundary.  The robot is a circle driven by (v, w) commands with slew-rate
limits; the lidar raycasts against the segments; the camera renderer
draws a ground checkerboard, extruded walls, and the target zone through
the exact same projection pipeline the click-to-ground conversion uses,
so clicked pixels and rendered geometry agree by construction.
"""

from __future__ import annotations

import functools
import io
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from .camgeom import CameraModel, default_camera, pixel_rays, project_many
from .kinchain import KinematicChain, camera_joints, webot_chain
from .odom import OdomPose, integrate
from .reactnav import RobotShape, VelocityCmd

DT = 0.05            # physics/control tick, 20 Hz
RENDER_EVERY = 4     # render at every 4th tick, 5 Hz
WALL_HEIGHT = 0.4
CHECKER_SIZE = 0.5
NEAR_PLANE = 0.05
GROUND_DRAW_MAX = 25.0

SKY = np.array([168, 206, 232], dtype=np.uint8)
GROUND_A = np.array([196, 196, 188], dtype=np.uint8)
GROUND_B = np.array([154, 158, 150], dtype=np.uint8)
GROUND_FAR = ((GROUND_A.astype(int) + GROUND_B.astype(int)) // 2).astype(np.uint8)
WALL_BASE = np.array([120, 104, 96], dtype=float)
TARGET_COLOR = (40, 200, 60)


class UnknownScenario(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class World:
    """Line-segment obstacles (N, 4 as x1,y1,x2,y2) inside a rectangle."""

    segments: np.ndarray
    bounds: tuple[float, float, float, float]

    def __post_init__(self):
        segs = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        object.__setattr__(self, "segments", segs)
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("bounds rectangle is degenerate")
        if not np.all(np.isfinite(segs)):
            raise ValueError("segments must be finite")


@dataclass
class SimRobot:
    """Ground-truth robot state; camera tilt/pan in the user convention
    (tilt negative looks down)."""

    pose: OdomPose = field(default_factory=OdomPose)
    shape: RobotShape = field(default_factory=RobotShape)
    camera_tilt: float = -0.5
    camera_pan: float = 0.0
    v: float = 0.0
    w: float = 0.0
    collided: bool = False

    def joints(self) -> list[float]:
        return camera_joints(self.camera_pan, self.camera_tilt)


@dataclass(frozen=True)
class TargetZone:
    """Marked stop area: 1.0 m across the approach, 0.6 m deep."""

    cx: float
    cy: float
    half_x: float = 0.3
    half_y: float = 0.5

    def corners(self) -> np.ndarray:
        return np.array([
            [self.cx - self.half_x, self.cy - self.half_y],
            [self.cx + self.half_x, self.cy - self.half_y],
            [self.cx + self.half_x, self.cy + self.half_y],
            [self.cx - self.half_x, self.cy + self.half_y],
        ])

    def contains(self, x: float, y: float) -> bool:
        return abs(x - self.cx) <= self.half_x and abs(y - self.cy) <= self.half_y


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    name: str
    world: World
    start_pose: OdomPose
    target: TargetZone

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.world.bounds
        c = self.target.corners()
        if not (np.all(c[:, 0] >= xmin) and np.all(c[:, 0] <= xmax)
                and np.all(c[:, 1] >= ymin) and np.all(c[:, 1] <= ymax)):
            raise ValueError("target zone extends outside world bounds")


@dataclass(frozen=True, eq=False)
class RenderFrame:
    pixels: np.ndarray  # (H, W, 3) uint8
    seq: int
    camera_tilt: float
    camera_pan: float
    pose: OdomPose

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels).save(buf, format="PNG")
        return buf.getvalue()


def _point_segment_distances(px: float, py: float, segments: np.ndarray) -> np.ndarray:
    """Distance from one point to each segment."""
    if len(segments) == 0:
        return np.array([np.inf])
    a = segments[:, 0:2]
    b = segments[:, 2:4]
    ab = b - a
    ap = np.array([px, py]) - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.divide(np.einsum("ij,ij->i", ap, ab), denom,
                          out=np.zeros_like(denom), where=denom > 0), 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.hypot(px - closest[:, 0], py - closest[:, 1])


def clearance(world: World, x: float, y: float) -> float:
    """Distance from a point to the nearest obstacle segment."""
    return float(_point_segment_distances(x, y, world.segments).min())


def step(
    world: World,
    robot: SimRobot,
    cmd: VelocityCmd,
    dt: float = DT,
    a_max: float = 1.0,
    alpha_max: float = 3.0,
) -> list[str]:
    """Advance the robot one tick; returns the list of events raised.

    Velocities slew toward the command under the acceleration limits, the
    pose advances along the exact arc, and a circle-vs-segment check
    rejects moves that would bring the footprint into contact: the robot
    freezes where it was and a "collision" event is recorded.
    """
    if not 0 < dt <= 0.1:
        raise ValueError(f"dt must be in (0, 0.1], got {dt}")
    if robot.collided:
        return []
    robot.v += np.clip(cmd.v - robot.v, -a_max * dt, a_max * dt)
    robot.w += np.clip(cmd.w - robot.w, -alpha_max * dt, alpha_max * dt)
    new_pose = integrate(robot.pose, robot.v, robot.w, dt)
    # conservative check: the midpoint and endpoint of the tick must clear
    mid_pose = integrate(robot.pose, robot.v, robot.w, dt / 2)
    for p in (mid_pose, new_pose):
        if clearance(world, p.x, p.y) <= robot.shape.radius:
            robot.collided = True
            robot.v = 0.0
            robot.w = 0.0
            return ["collision"]
    robot.pose = new_pose
    return []


def raycast_lidar(
    world: World,
    pose: OdomPose,
    n_beams: int = 360,
    fov: float = 2 * np.pi,
    max_range: float = 6.0,
) -> np.ndarray:
    """Per-beam range to the nearest segment; np.inf past max_range.

    Beam i points at robot-frame bearing angle_min + i*increment where
    angle_min = -fov/2; the returned array is robot-frame, matching what
    the navigator expects.
    """
    if n_beams < 1:
        raise ValueError("need at least one beam")
    inc = fov / n_beams
    local = -fov / 2 + inc * np.arange(n_beams)
    ang = pose.theta + local
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)  # (B, 2)
    segs = world.segments
    if len(segs) == 0:
        return np.full(n_beams, np.inf)
    a = segs[:, 0:2]                  # (S, 2)
    e = segs[:, 2:4] - segs[:, 0:2]   # (S, 2)
    o = np.array([pose.x, pose.y])
    ao = a - o                        # (S, 2)
    # solve o + t d = a + s e per (beam, segment)
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]  # (B, S)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[None, :, 0] * e[None, :, 1] - ao[None, :, 1] * e[None, :, 0]) / denom
        s = (ao[None, :, 0] * d[:, None, 1] - ao[None, :, 1] * d[:, None, 0]) / denom
    valid = (np.abs(denom) > 1e-15) & (t > 1e-9) & (s >= 0.0) & (s <= 1.0)
    t = np.where(valid, t, np.inf)
    ranges = t.min(axis=1)
    return np.where(ranges <= max_range, ranges, np.inf)


def _camera_world_transform(robot: SimRobot, chain: KinematicChain) -> np.ndarray:
    c, s = np.cos(robot.pose.theta), np.sin(robot.pose.theta)
    base = np.array([
        [c, -s, 0.0, robot.pose.x],
        [s, c, 0.0, robot.pose.y],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return base @ chain.transform(robot.joints())


@functools.lru_cache(maxsize=4)
def _cached_pixel_rays(model: CameraModel) -> np.ndarray:
    return pixel_rays(model)


def _clip_polygon_near(poly_opt: np.ndarray, near: float = NEAR_PLANE) -> np.ndarray:
    """Sutherland-Hodgman clip of an optical-frame polygon against z = near."""
    out = []
    n = len(poly_opt)
    for i in range(n):
        cur, nxt = poly_opt[i], poly_opt[(i + 1) % n]
        cur_in, nxt_in = cur[2] >= near, nxt[2] >= near
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            f = (near - cur[2]) / (nxt[2] - cur[2])
            out.append(cur + f * (nxt - cur))
    return np.array(out)


def render_camera(
    world: World,
    robot: SimRobot,
    model: Optional[CameraModel] = None,
    chain: Optional[KinematicChain] = None,
    target: Optional[TargetZone] = None,
    seq: int = 0,
) -> RenderFrame:
    """Rasterize the operator's camera view.

    Ground is drawn by inverse mapping every pixel ray onto the z = 0
    plane (checkerboard parity of the world coordinates), which makes the
    image agree exactly with pixel-to-ground conversions of clicks.  Wall
    segments are extruded to flat-shaded quads and painted far-to-near;
    the target zone outline is drawn on the ground beneath them.
    """
    model = model or default_camera()
    chain = chain or webot_chain()
    T = _camera_world_transform(robot, chain)
    if T[2, 3] <= 0:
        raise ValueError("camera is not above the ground plane")

    rays_opt = _cached_pixel_rays(model)            # (H, W, 3), z = 1
    R = T[:3, :3] @ chain.remap.T                   # optical -> world rotation
    dirs = rays_opt @ R.T                           # (H, W, 3) world directions
    origin = T[:3, 3]

    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -origin[2] / dz
    ground_ok = (dz < -1e-9) & (t * np.linalg.norm(dirs, axis=-1) <= GROUND_DRAW_MAX)
    gx = origin[0] + t * dirs[..., 0]
    gy = origin[1] + t * dirs[..., 1]
    parity = (np.floor(gx / CHECKER_SIZE) + np.floor(gy / CHECKER_SIZE)).astype(np.int64) % 2

    img = np.empty((model.height, model.width, 3), dtype=np.uint8)
    img[:] = SKY
    far_ground = (dz < -1e-9) & ~ground_ok
    img[far_ground] = GROUND_FAR
    img[ground_ok & (parity == 0)] = GROUND_A
    img[ground_ok & (parity == 1)] = GROUND_B

    pil = Image.fromarray(img)
    draw = ImageDraw.Draw(pil)

    drawables = []
    if target is not None:
        corners = target.corners()
        center_dist = np.hypot(target.cx - origin[0], target.cy - origin[1])
        drawables.append((center_dist, "zone", corners))
    for seg in world.segments:
        mid = np.array([(seg[0] + seg[2]) / 2, (seg[1] + seg[3]) / 2])
        drawables.append((float(np.hypot(*(mid - origin[:2]))), "wall", seg))
    drawables.sort(key=lambda d: -d[0])  # painter: far first

    R_wo = chain.remap @ T[:3, :3].T  # world -> optical rotation
    for dist, kind, geom in drawables:
        if kind == "zone":
            ring = np.vstack([geom, geom[:1]])
            # densify so the projected outline stays smooth under distortion
            pts = []
            for p, q in zip(ring[:-1], ring[1:]):
                f = np.linspace(0, 1, 24, endpoint=False)[:, None]
                pts.append(p + f * (q - p))
            pts = np.vstack(pts + [ring[-1:]])
            world_pts = np.column_stack([pts, np.zeros(len(pts))])
            opt = (world_pts - origin) @ R_wo.T
            visible = opt[:, 2] >= NEAR_PLANE
            uv = np.full((len(opt), 2), np.nan)
            uv[visible] = project_many(model, opt[visible])
            for i in range(len(pts) - 1):
                if visible[i] and visible[i + 1]:
                    draw.line([tuple(uv[i]), tuple(uv[i + 1])], fill=TARGET_COLOR, width=2)
        else:
            x1, y1, x2, y2 = geom
            quad_world = np.array([
                [x1, y1, 0.0], [x2, y2, 0.0],
                [x2, y2, WALL_HEIGHT], [x1, y1, WALL_HEIGHT],
            ])
            opt = (quad_world - origin) @ R_wo.T
            clipped = _clip_polygon_near(opt)
            if len(clipped) < 3:
                continue
            uv = project_many(model, clipped)
            shade = 1.0 / (1.0 + 0.15 * dist)
            color = tuple(int(c) for c in np.clip(WALL_BASE * (0.5 + 0.8 * shade), 0, 255))
            draw.polygon([tuple(p) for p in uv], fill=color, outline=tuple(int(c * 0.8) for c in color))

    return RenderFrame(
        pixels=np.asarray(pil, dtype=np.uint8),
        seq=seq,
        camera_tilt=robot.camera_tilt,
        camera_pan=robot.camera_pan,
        pose=robot.pose,
    )


def _room_walls(xmin, ymin, xmax, ymax) -> list[list[float]]:
    return [
        [xmin, ymin, xmax, ymin],
        [xmax, ymin, xmax, ymax],
        [xmax, ymax, xmin, ymax],
        [xmin, ymax, xmin, ymin],
    ]


def scenario(name: str, doorway_width: float = 0.9) -> ScenarioSpec:
    """One of the three benchmark worlds, in start-frame coordinates.

    The robot starts at the origin facing +x and must stop 2 m ahead in a
    1.0 x 0.6 m marked zone.  open_space is an empty room; doorway adds a
    wall across the path with an opening at the midpoint; block puts a
    1 x 1 m square centered on the straight-line path.
    """
    bounds = (-2.0, -3.0, 4.0, 3.0)
    walls = _room_walls(*bounds)
    target = TargetZone(cx=2.0, cy=0.0)
    if name == "open_space":
        segments = walls
    elif name == "doorway":
        half = doorway_width / 2.0
        segments = walls + [
            [1.0, bounds[1], 1.0, -half],
            [1.0, half, 1.0, bounds[3]],
        ]
    elif name == "block":
        segments = walls + [
            [0.5, -0.5, 1.5, -0.5],
            [1.5, -0.5, 1.5, 0.5],
            [1.5, 0.5, 0.5, 0.5],
            [0.5, 0.5, 0.5, -0.5],
        ]
    else:
        raise UnknownScenario(f"unknown scenario {name!r}")
    return ScenarioSpec(
        name=name,
        world=World(segments=np.array(segments), bounds=bounds),
        start_pose=OdomPose(0.0, 0.0, 0.0),
        target=target,
    )


SCENARIO_NAMES = ("open_space", "doorway", "block")


def load_scenario_config(path) -> ScenarioSpec:
    """Custom world from JSON: segment list, bounds, start pose, target."""
    with open(path) as f:
        cfg = json.load(f)
    tz = cfg["target_zone"]
    return ScenarioSpec(
        name=cfg.get("name", "custom"),
        world=World(segments=np.array(cfg["segments"], dtype=float).reshape(-1, 4),
                    bounds=tuple(cfg["bounds"])),
        start_pose=OdomPose(*cfg.get("start_pose", [0.0, 0.0, 0.0])),
        target=TargetZone(cx=tz["cx"], cy=tz["cy"],
                          half_x=tz.get("half_x", 0.3), half_y=tz.get("half_y", 0.5)),
    )
