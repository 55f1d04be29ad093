"""Purely reactive, map-free local navigation.

Candidate motions form a one-parameter family of circular arcs indexed by
alpha in [-pi, pi].  Each control cycle the lidar scan is transformed into
per-arc normalized collision distances (the trajectory-parameter-space
obstacle image), the goal is mapped into the same space, and the best arc
is picked by a weighted score of goal alignment, clearance, and free
distance.  No map, no memory: every command is a function of the current
scan and goal alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .odom import OdomPose

IDLE = "idle"
NAVIGATING = "navigating"
ARRIVED = "arrived"
BLOCKED = "blocked"

# Margin (m) kept between the farthest point the safety envelope may reach
# and the first possible contact along the chosen arc.
SAFETY_MARGIN = 0.05

# Commanded speed never drops below this until arrival, so the robot always
# crosses the goal ring instead of stalling asymptotically on it.
CREEP_SPEED = 0.05


class VelocityCmd(NamedTuple):
    v: float
    w: float


STOP = VelocityCmd(0.0, 0.0)


@dataclass(frozen=True)
class RobotShape:
    radius: float = 0.25

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class NavGoal:
    x: float
    y: float
    tolerance: float = 0.10

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class LaserScan:
    """Planar range scan.  Non-returns are np.inf entries."""

    angle_min: float
    angle_increment: float
    ranges: np.ndarray
    max_range: float
    timestamp: float = 0.0

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=float)
        if self.angle_increment * len(self.ranges) > 2 * np.pi + 1e-9:
            raise ValueError("scan spans more than a full turn")

    def points(self) -> np.ndarray:
        """Valid returns as (N, 2) robot-frame points."""
        valid = np.isfinite(self.ranges) & (self.ranges > 0) & (self.ranges <= self.max_range)
        angles = self.angle_min + self.angle_increment * np.flatnonzero(valid)
        r = self.ranges[valid]
        return np.column_stack([r * np.cos(angles), r * np.sin(angles)])


@dataclass(frozen=True)
class NavConfig:
    v_max: float = 0.6
    w_max: float = 1.5
    a_max: float = 1.0
    alpha_max: float = 3.0  # turn-rate slew limit, rad/s^2
    lookahead: float = 2.0
    n_alpha: int = 61
    safety_fraction: float = 0.15
    # planning-time footprint inflation (m): keeps lateral clearance against
    # finite lidar angular resolution; the true footprint stays uninflated
    inflation: float = 0.03
    w_goal: float = 0.6
    w_clear: float = 0.2
    w_free: float = 0.2
    tolerance: float = 0.10
    control_period: float = 0.05

    def alphas(self) -> np.ndarray:
        """Arc parameters: midpoints of n_alpha equal bins over [-pi, pi].

        The exact +-pi endpoints are excluded because their arcs translate
        zero distance; near-endpoint arcs (a few centimeters of turning
        radius) cover turn-toward-goal behavior instead.  Odd n_alpha puts
        the straight arc alpha = 0 exactly on the grid, and the signed-
        multiple form makes the grid bitwise mirror symmetric.
        """
        return (np.arange(self.n_alpha) - (self.n_alpha - 1) / 2.0) * (2.0 * np.pi / self.n_alpha)


def load_nav_config(path) -> NavConfig:
    """Load navigator limits/weights from JSON; missing keys keep defaults."""
    with open(path) as f:
        cfg = json.load(f)
    known = {k: cfg[k] for k in NavConfig.__dataclass_fields__ if k in cfg}
    return replace(NavConfig(), **known)


def arc_for_alpha(alpha: float, lookahead: float = 2.0) -> float:
    """Curvature (1/m) of the arc indexed by alpha.

    kappa = (2/L) * tan(alpha/2): zero at alpha = 0 (straight), odd and
    monotone in alpha, diverging toward turn-in-place at alpha = +-pi.
    """
    return (2.0 / lookahead) * np.tan(0.5 * alpha)


def _first_contact_straight(points: np.ndarray, radius: float, lookahead: float) -> float:
    """Arc length to first contact along the straight arc, or inf."""
    if len(points) == 0:
        return np.inf
    px, py = points[:, 0], points[:, 1]
    hit = np.abs(py) <= radius
    if not np.any(hit):
        return np.inf
    s = px[hit] - np.sqrt(radius**2 - py[hit] ** 2)
    inside_now = np.hypot(px, py) <= radius
    if np.any(inside_now):
        return 0.0
    ahead = s[s >= 0]
    return float(ahead.min()) if len(ahead) else np.inf


def _first_contact_arc(points: np.ndarray, kappa: float, radius: float) -> float:
    """Arc length to first contact along a circular arc of curvature kappa."""
    if len(points) == 0:
        return np.inf
    if np.any(np.hypot(points[:, 0], points[:, 1]) <= radius):
        return 0.0
    r0 = 1.0 / abs(kappa)
    center = np.array([0.0, 1.0 / kappa])
    rel = points - center
    rho = np.hypot(rel[:, 0], rel[:, 1])
    # the swept disc touches a point only while the path circle passes
    # within `radius` of it
    reach = np.abs(rho - r0) <= radius
    if not np.any(reach):
        return np.inf
    rel = rel[reach]
    rho = rho[reach]
    cos_d = (r0**2 + rho**2 - radius**2) / (2.0 * r0 * rho)
    d = np.arccos(np.clip(cos_d, -1.0, 1.0))
    phi_p = np.arctan2(rel[:, 1], rel[:, 0])
    phi_start = -np.sign(kappa) * np.pi / 2.0
    # first arrival at either tangency angle, sweeping in the kappa direction
    s_candidates = []
    for contact in (phi_p - d, phi_p + d):
        delta = np.sign(kappa) * (contact - phi_start)
        delta = np.mod(delta, 2.0 * np.pi)
        s_candidates.append(delta * r0)
    return float(np.min(np.concatenate(s_candidates)))


def scan_to_tp(scan: LaserScan, shape: RobotShape, config: NavConfig) -> np.ndarray:
    """Transform a scan into per-arc normalized free distances in [0, 1].

    Entry i is the fraction of the lookahead arc the robot's swept disc can
    travel along arc alpha_i before first touching any scan point; 1 means
    free for the whole lookahead.
    """
    radius = shape.radius + config.inflation
    pts = scan.points()
    # points the swept disc cannot reach within one lookahead cannot matter
    if len(pts):
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= config.lookahead + radius]
    out = np.empty(config.n_alpha)
    for i, alpha in enumerate(config.alphas()):
        kappa = arc_for_alpha(alpha, config.lookahead)
        if abs(kappa) < 1e-12:
            s = _first_contact_straight(pts, radius, config.lookahead)
        else:
            s = _first_contact_arc(pts, kappa, radius)
        out[i] = np.clip(s / config.lookahead, 0.0, 1.0)
    return out


def free_distance_along(
    scan: LaserScan, shape: RobotShape, kappa: float, lookahead: float, inflation: float = 0.0
) -> float:
    """First-contact distance for one exact arc, capped at the lookahead."""
    radius = shape.radius + inflation
    pts = scan.points()
    if len(pts):
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= lookahead + radius]
    if abs(kappa) < 1e-12:
        s = _first_contact_straight(pts, radius, lookahead)
    else:
        s = _first_contact_arc(pts, kappa, radius)
    return float(min(s, lookahead))


def goal_to_tp(goal_xy, config: NavConfig) -> tuple[float, float]:
    """Map a robot-frame goal to (alpha_goal, normalized arc distance).

    For goals ahead this inverts the arc family exactly (the alpha whose
    arc passes through the point); for goals behind, where the exact
    inversion degenerates toward the straight arc, it saturates toward
    turn-in-place so the quadrant of alpha always matches the side the
    goal is on.
    """
    gx, gy = float(goal_xy[0]), float(goal_xy[1])
    r = np.hypot(gx, gy)
    if r < 1e-12:
        return 0.0, 0.0
    beta = np.arctan2(gy, gx)
    exact = 2.0 * np.arctan2(config.lookahead * np.sin(beta), r)
    fallback = np.sign(beta) * (2.0 * abs(beta) - np.pi)
    alpha = max(exact, fallback) if beta >= 0 else min(exact, fallback)
    # arc length along the through-goal arc: r * beta / sin(beta)
    sinc = np.sinc(beta / np.pi)
    s = r / max(sinc, 1e-12)
    return float(alpha), float(min(s / config.lookahead, 1.0))


def _clearance(tp: np.ndarray, window: int = 3) -> np.ndarray:
    """Windowed mean of tp: arcs inside wide free corridors score higher.

    The window wraps around, matching the circular topology of the arc
    parameter (alpha = +pi and -pi are both near-in-place turns).
    """
    kernel = np.ones(2 * window + 1)
    padded = np.pad(tp, window, mode="wrap")
    return np.convolve(padded, kernel, mode="valid") / kernel.sum()


def _stoppable_speed(free_dist: float, config: NavConfig) -> float:
    """Largest v whose control period plus full stop fits inside free_dist."""
    d = max(free_dist - SAFETY_MARGIN, 0.0)
    a, dt = config.a_max, config.control_period
    return max(-a * dt + np.sqrt(a * a * dt * dt + 2.0 * a * d), 0.0)


def choose_motion(
    tp: np.ndarray, goal_tp: tuple[float, float], config: NavConfig
) -> tuple[str, VelocityCmd]:
    """Pick the best arc and turn it into a velocity command.

    Returns (NAVIGATING, cmd) or (BLOCKED, stop) when no arc clears the
    safety fraction.  Deterministic: score ties break toward smaller
    |alpha|, then toward negative alpha.
    """
    alphas = config.alphas()
    alpha_goal, _ = goal_tp
    admissible = tp > config.safety_fraction
    if not np.any(admissible):
        return BLOCKED, STOP

    # gap steering: when the arc pointing at the goal is itself shut, aim
    # the goal term at the nearest open arc instead.  The fixed rightward
    # bias keeps that choice stable while the heading wobbles around a
    # mirror-symmetric obstacle; without it the robot dithers left/right
    # in front of a wide wall without ever committing to going around.
    nearest = int(np.argmin(np.abs(alphas - alpha_goal)))
    if not admissible[nearest]:
        open_d = np.where(admissible, np.abs(alphas - (alpha_goal - 0.2)), np.inf)
        order_open = np.lexsort((alphas, open_d))
        alpha_goal = alphas[order_open[0]]

    # circular distance on the alpha circle: the near-in-place arcs at
    # +-pi are the same physical motion and must not repel each other
    diff = np.abs(alphas - alpha_goal)
    goal_term = 1.0 - np.minimum(diff, 2.0 * np.pi - diff) / np.pi
    score = config.w_goal * goal_term + config.w_clear * _clearance(tp) + config.w_free * tp
    score[~admissible] = -np.inf
    # quantize so mirror-symmetric situations tie exactly despite float noise
    score_q = np.round(score * 1e9)
    order = np.lexsort((alphas, np.abs(alphas), -score_q))
    best = order[0]

    free = tp[best]
    v = config.v_max * free * min(1.0, free / 0.5)
    v = min(v, _stoppable_speed(free * config.lookahead, config))
    kappa = arc_for_alpha(alphas[best], config.lookahead)
    w = v * kappa
    if abs(w) > config.w_max:
        # stay on the arc: cap the turn rate and scale speed to match
        w = np.sign(w) * config.w_max
        v = abs(w / kappa)
    return NAVIGATING, VelocityCmd(float(v), float(w))


@dataclass
class ReactiveNavigator:
    """Goal holder + per-tick decision function.

    One logical owner (the service tick or the experiment loop) calls
    step(); goal changes go through set_goal/clear_goal on that same owner.
    Commands are slew-feasible continuations of the current motion, so the
    plant can follow them exactly and the per-arc safety budget describes
    the path actually driven.
    """

    config: NavConfig = field(default_factory=NavConfig)
    shape: RobotShape = field(default_factory=RobotShape)
    goal: Optional[NavGoal] = None
    last_cmd: VelocityCmd = STOP

    def set_goal(self, x: float, y: float, tolerance: Optional[float] = None) -> NavGoal:
        self.goal = NavGoal(x, y, tolerance if tolerance is not None else self.config.tolerance)
        return self.goal

    def clear_goal(self) -> None:
        self.goal = None

    def _feasible(self, v_target: float, w_target: float, current: VelocityCmd) -> VelocityCmd:
        """Clamp a target into the one-tick slew-reachable window."""
        cfg = self.config
        dv = cfg.a_max * cfg.control_period
        dw = cfg.alpha_max * cfg.control_period
        v = float(np.clip(v_target, max(current.v - dv, 0.0), min(current.v + dv, cfg.v_max)))
        w = float(np.clip(w_target, current.w - dw, current.w + dw))
        w = float(np.clip(w, -cfg.w_max, cfg.w_max))
        return VelocityCmd(v, w)

    def _brake(self, current: VelocityCmd) -> VelocityCmd:
        return self._feasible(0.0, 0.0, current)

    def step(
        self,
        pose: OdomPose,
        scan: LaserScan,
        current: Optional[VelocityCmd] = None,
    ) -> tuple[str, VelocityCmd]:
        """One control decision for the current pose/scan/goal.

        current is the measured (v, w) the robot is actually moving with;
        when omitted, the navigator assumes its own previous command was
        tracked exactly.
        """
        current = current if current is not None else self.last_cmd
        if self.goal is None:
            cmd = self._brake(current)
            self.last_cmd = cmd
            return IDLE, cmd
        dist = pose.distance_to(self.goal.x, self.goal.y)
        if dist <= self.goal.tolerance:
            cmd = self._brake(current)
            self.last_cmd = cmd
            return ARRIVED, cmd
        # goal into the robot frame
        dx, dy = self.goal.x - pose.x, self.goal.y - pose.y
        c, s = np.cos(-pose.theta), np.sin(-pose.theta)
        local = (c * dx - s * dy, s * dx + c * dy)

        tp = scan_to_tp(scan, self.shape, self.config)
        status, target = choose_motion(tp, goal_to_tp(local, self.config), self.config)
        if status != NAVIGATING:
            cmd = self._brake(current)
            self.last_cmd = cmd
            return status, cmd

        # deceleration envelope toward the goal: always stoppable inside the
        # remaining distance, but never slower than a creep until arrival
        v_goal = np.sqrt(2.0 * self.config.a_max * max(dist - self.goal.tolerance, 0.0))
        v = min(target.v, max(v_goal, CREEP_SPEED))
        w = target.w if target.v == 0 else target.w * (v / target.v)
        cmd = self._feasible(v, w, current)

        # re-verify the slew-clamped command against the scan along the exact
        # arc it commands: the followed arc differs from the chosen grid arc
        # while the turn rate is still converging toward it
        if cmd.v > 0:
            free = free_distance_along(scan, self.shape, cmd.w / cmd.v,
                                       self.config.lookahead, self.config.inflation)
            v_safe = _stoppable_speed(free, self.config)
            if cmd.v > v_safe:
                scale = v_safe / cmd.v
                cmd = self._feasible(v_safe, cmd.w * scale, current)
        self.last_cmd = cmd
        return NAVIGATING, cmd
