import numpy as np
import pytest

from clicknav.odom import OdomPose, integrate
from clicknav.reactnav import (
    ARRIVED,
    BLOCKED,
    IDLE,
    NAVIGATING,
    LaserScan,
    NavConfig,
    ReactiveNavigator,
    RobotShape,
    VelocityCmd,
    arc_for_alpha,
    choose_motion,
    goal_to_tp,
    load_nav_config,
    scan_to_tp,
)

CFG = NavConfig()
SHAPE = RobotShape(radius=0.25)


def empty_scan(n=360, max_range=6.0):
    return LaserScan(angle_min=-np.pi, angle_increment=2 * np.pi / n,
                     ranges=np.full(n, np.inf), max_range=max_range)


def scan_from_points(points, n=360, max_range=6.0):
    """Synthesize the scan a lidar would return for isolated point obstacles."""
    ranges = np.full(n, np.inf)
    inc = 2 * np.pi / n
    for px, py in points:
        r = np.hypot(px, py)
        idx = int(round((np.arctan2(py, px) + np.pi) / inc)) % n
        ranges[idx] = min(ranges[idx], r)
    return LaserScan(angle_min=-np.pi, angle_increment=inc, ranges=ranges, max_range=max_range)


def brute_force_tp(scan, shape, config, n_steps=4000):
    """Independent obstacle transform: finely sample every arc and find the
    first sample whose swept (inflated) disc touches a scan point."""
    pts = scan.points()
    radius = shape.radius + config.inflation
    out = np.empty(config.n_alpha)
    s_grid = np.linspace(0.0, config.lookahead, n_steps)
    for i, alpha in enumerate(config.alphas()):
        kappa = arc_for_alpha(alpha, config.lookahead)
        if abs(kappa) < 1e-12:
            centers = np.column_stack([s_grid, np.zeros_like(s_grid)])
        else:
            centers = np.column_stack([np.sin(kappa * s_grid) / kappa,
                                       (1 - np.cos(kappa * s_grid)) / kappa])
        if len(pts) == 0:
            out[i] = 1.0
            continue
        d = np.linalg.norm(centers[:, None, :] - pts[None, :, :], axis=2)
        hit = np.flatnonzero(np.any(d <= radius, axis=1))
        out[i] = 1.0 if len(hit) == 0 else s_grid[hit[0]] / config.lookahead
    return out


class TestArcForAlpha:
    def test_zero_is_straight(self):
        assert arc_for_alpha(0.0) == 0.0

    def test_odd_symmetry(self):
        for a in (0.3, 1.1, 2.5):
            assert arc_for_alpha(-a) == pytest.approx(-arc_for_alpha(a))

    def test_half_pi_with_lookahead_two(self):
        kappa = arc_for_alpha(np.pi / 2, lookahead=2.0)
        assert kappa == pytest.approx(1.0)
        # the through-point relation: that arc reaches bearing pi/2 at the
        # point whose chord satisfies kappa = 2 sin(beta) / r
        r = 2.0 * np.sin(np.pi / 2) / kappa
        assert r == pytest.approx(2.0)


class TestScanToTp:
    def test_empty_scan_all_free(self):
        tp = scan_to_tp(empty_scan(), SHAPE, CFG)
        assert np.all(tp == 1.0)

    def test_obstacle_dead_ahead_straight_arc(self):
        d = 1.0
        tp = scan_to_tp(scan_from_points([(d, 0.0)]), SHAPE, CFG)
        center = CFG.n_alpha // 2
        assert CFG.alphas()[center] == 0.0
        reach = SHAPE.radius + CFG.inflation
        assert tp[center] == pytest.approx((d - reach) / CFG.lookahead, abs=1e-9)

    def test_obstacle_left_leaves_right_arcs_free(self):
        tp = scan_to_tp(scan_from_points([(0.3, 0.8)]), SHAPE, CFG)
        alphas = CFG.alphas()
        assert np.all(tp[alphas < -0.5] == 1.0)
        assert np.any(tp[alphas > 0] < 1.0)

    def test_point_inside_footprint_blocks_everything(self):
        tp = scan_to_tp(scan_from_points([(0.1, 0.05)]), SHAPE, CFG)
        assert np.all(tp == 0.0)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        pts = np.column_stack([rng.uniform(-2.0, 2.5, 12), rng.uniform(-2.0, 2.0, 12)])
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.3]
        scan = scan_from_points(pts)
        fast = scan_to_tp(scan, SHAPE, CFG)
        slow = brute_force_tp(scan, SHAPE, CFG)
        assert np.max(np.abs(fast - slow)) < 2e-3

    def test_entries_always_in_unit_interval(self):
        rng = np.random.default_rng(77)
        ranges = rng.uniform(0.2, 6.0, 360)
        ranges[rng.random(360) < 0.5] = np.inf
        scan = LaserScan(-np.pi, 2 * np.pi / 360, ranges, max_range=6.0)
        tp = scan_to_tp(scan, SHAPE, CFG)
        assert np.all((tp >= 0.0) & (tp <= 1.0))


class TestGoalToTp:
    def test_straight_ahead_half_lookahead(self):
        alpha, d = goal_to_tp((CFG.lookahead / 2, 0.0), CFG)
        assert alpha == 0.0
        assert d == pytest.approx(0.5)

    def test_matches_numeric_inversion_for_forward_goals(self):
        # oracle: solve arc_for_alpha(alpha) == through-point curvature
        gx, gy = np.cos(np.pi / 4), np.sin(np.pi / 4)
        beta, r = np.pi / 4, 1.0
        kappa_goal = 2.0 * np.sin(beta) / r
        lo, hi = 0.0, np.pi - 1e-9
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if arc_for_alpha(mid, CFG.lookahead) < kappa_goal:
                lo = mid
            else:
                hi = mid
        alpha, _ = goal_to_tp((gx, gy), CFG)
        assert alpha == pytest.approx(0.5 * (lo + hi), abs=1e-9)

    def test_goal_behind_turns_past_half_pi(self):
        for beta in (2.5, 3.0, -2.7, -3.1):
            alpha, _ = goal_to_tp((np.cos(beta), np.sin(beta)), CFG)
            assert abs(alpha) > np.pi / 2
            assert np.sign(alpha) == np.sign(beta)

    def test_arc_length_for_quarter_circle(self):
        # unit-radius quarter circle: goal (1, 1), arc length pi/2
        _, d = goal_to_tp((1.0, 1.0), CFG)
        assert d == pytest.approx((np.pi / 2) / CFG.lookahead)


class TestChooseMotion:
    def test_all_free_goal_ahead_goes_straight(self):
        tp = np.ones(CFG.n_alpha)
        status, cmd = choose_motion(tp, (0.0, 1.0), CFG)
        assert status == NAVIGATING
        assert cmd.v == pytest.approx(CFG.v_max)
        assert cmd.w == 0.0

    def test_everything_unsafe_is_blocked(self):
        tp = np.full(CFG.n_alpha, CFG.safety_fraction)
        status, cmd = choose_motion(tp, (0.0, 1.0), CFG)
        assert status == BLOCKED
        assert cmd == VelocityCmd(0.0, 0.0)

    def test_center_blocked_swerves_to_freer_side(self):
        tp = np.ones(CFG.n_alpha)
        alphas = CFG.alphas()
        tp[np.abs(alphas) < 0.25] = 0.05      # dead ahead blocked
        tp[(alphas >= 0.25) & (alphas < 0.9)] = 0.4   # left partially blocked
        status, cmd = choose_motion(tp, (0.0, 1.0), CFG)
        assert status == NAVIGATING
        assert cmd.w < 0  # right side is the freer one

    def test_deterministic_and_ties_break_negative(self):
        tp = np.ones(CFG.n_alpha)
        center = CFG.n_alpha // 2
        tp[center] = 0.05  # exclude the straight arc itself
        first = choose_motion(tp, (0.0, 1.0), CFG)
        assert all(choose_motion(tp, (0.0, 1.0), CFG) == first for _ in range(5))
        # symmetric situation: the winner is the negative-alpha neighbor
        assert first[1].w < 0

    def test_respects_velocity_limits(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            tp = rng.uniform(0.0, 1.0, CFG.n_alpha)
            goal = (rng.uniform(-np.pi, np.pi), rng.uniform(0, 1))
            _, cmd = choose_motion(tp, goal, CFG)
            assert abs(cmd.v) <= CFG.v_max + 1e-12
            assert abs(cmd.w) <= CFG.w_max + 1e-12


def closed_loop(nav, start, scan_fn, dt=0.05, timeout=60.0):
    """Drive the navigator against a scan source; returns (poses, statuses)."""
    pose = start
    t = 0.0
    poses, statuses = [pose], []
    while t < timeout:
        status, cmd = nav.step(pose, scan_fn(pose))
        statuses.append(status)
        if status in (ARRIVED, BLOCKED, IDLE):
            break
        pose = integrate(pose, cmd.v, cmd.w, dt)
        poses.append(pose)
        t += dt
    return poses, statuses


class TestNavStep:
    def test_no_goal_is_idle(self):
        nav = ReactiveNavigator()
        assert nav.step(OdomPose(), empty_scan()) == (IDLE, VelocityCmd(0.0, 0.0))

    def test_at_goal_is_arrived_and_stays_arrived(self):
        nav = ReactiveNavigator()
        nav.set_goal(0.05, 0.0)
        for _ in range(3):
            status, cmd = nav.step(OdomPose(), empty_scan())
            assert status == ARRIVED
            assert cmd == VelocityCmd(0.0, 0.0)

    def test_empty_world_straight_run(self):
        nav = ReactiveNavigator()
        nav.set_goal(2.0, 0.0)
        poses, statuses = closed_loop(nav, OdomPose(), lambda p: empty_scan())
        assert statuses[-1] == ARRIVED
        assert all(abs(p.y) < 1e-6 for p in poses)
        assert poses[-1].distance_to(2.0, 0.0) <= nav.goal.tolerance

    def test_goal_behind_turns_and_arrives(self):
        # first command pivots (slew-limited turn, no sprint forward), and
        # the U-turn eventually reaches the goal behind the start
        nav = ReactiveNavigator()
        nav.set_goal(-2.0, 0.0)
        status, first = nav.step(OdomPose(), empty_scan())
        assert status == NAVIGATING
        assert abs(first.w) >= 0.14
        assert first.v < 0.1
        nav2 = ReactiveNavigator()
        nav2.set_goal(-2.0, 0.0)
        _, statuses = closed_loop(nav2, OdomPose(), lambda p: empty_scan())
        assert statuses[-1] == ARRIVED

    def test_liveness_from_random_starts(self):
        rng = np.random.default_rng(2024)
        for _ in range(15):
            nav = ReactiveNavigator()
            nav.set_goal(0.0, 0.0)
            start = OdomPose(rng.uniform(-3.5, 3.5), rng.uniform(-3.5, 3.5),
                             rng.uniform(-np.pi, np.pi))
            if start.distance_to(0, 0) > 5:
                continue
            _, statuses = closed_loop(nav, start, lambda p: empty_scan())
            assert statuses[-1] == ARRIVED

    def test_blocked_when_sealed_in_tightly(self):
        # 2 cm of clearance all around: every arc, including the sharpest
        # turning ones, touches the ring within the safety fraction
        nav = ReactiveNavigator()
        nav.set_goal(3.0, 0.0)
        ring = [(0.27 * np.cos(a), 0.27 * np.sin(a)) for a in np.linspace(-np.pi, np.pi, 120)]
        status, cmd = nav.step(OdomPose(), scan_from_points(ring))
        assert status == BLOCKED
        assert cmd == VelocityCmd(0.0, 0.0)


def stop_distance_path(pose, cmd, config, n=200):
    """Forward-simulate one control period at (v, w) plus a worst-case stop:
    the center travels v*dt + v^2/(2 a_max) along the commanded arc."""
    total = cmd.v * config.control_period + cmd.v**2 / (2 * config.a_max)
    if total == 0:
        return np.array([[pose.x, pose.y]])
    kappa = 0.0 if cmd.v == 0 else cmd.w / cmd.v
    s = np.linspace(0, total, n)
    if abs(kappa) < 1e-12:
        local = np.column_stack([s, np.zeros_like(s)])
    else:
        local = np.column_stack([np.sin(kappa * s) / kappa, (1 - np.cos(kappa * s)) / kappa])
    c, sn = np.cos(pose.theta), np.sin(pose.theta)
    return np.column_stack([pose.x + c * local[:, 0] - sn * local[:, 1],
                            pose.y + sn * local[:, 0] + c * local[:, 1]])


class TestSafetyInvariant:
    @pytest.mark.parametrize("seed", range(8))
    def test_every_emitted_command_stoppable_clear_of_scan(self, seed):
        # closed loop against a static scene: each emitted command, followed
        # for one period plus a worst-case stop, must keep the footprint clear
        rng = np.random.default_rng(seed)
        nav = ReactiveNavigator()
        pts = np.column_stack([rng.uniform(-1.5, 2.5, 10), rng.uniform(-2.0, 2.0, 10)])
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > SHAPE.radius + 0.02]
        if len(pts) == 0:
            return
        nav.set_goal(rng.uniform(1.0, 3.0), rng.uniform(-1.5, 1.5))
        pose = OdomPose()
        for _ in range(400):
            scan = scan_from_points(_to_robot_frame(pts, pose))
            status, cmd = nav.step(pose, scan)
            if status in (ARRIVED, BLOCKED):
                break
            # the guarantee is against the scan the navigator saw: transform
            # its points back to world at the emission pose
            local = scan.points()
            c, s = np.cos(pose.theta), np.sin(pose.theta)
            seen = np.column_stack([pose.x + c * local[:, 0] - s * local[:, 1],
                                    pose.y + s * local[:, 0] + c * local[:, 1]])
            path = stop_distance_path(pose, cmd, nav.config)
            d = np.linalg.norm(path[:, None, :] - seen[None, :, :], axis=2)
            assert d.min() > SHAPE.radius
            pose = integrate(pose, cmd.v, cmd.w, nav.config.control_period)


def _to_robot_frame(pts_world, pose):
    c, s = np.cos(pose.theta), np.sin(pose.theta)
    dx = pts_world[:, 0] - pose.x
    dy = pts_world[:, 1] - pose.y
    return np.column_stack([c * dx + s * dy, -s * dx + c * dy])


def test_config_file_overrides(tmp_path):
    p = tmp_path / "nav.json"
    p.write_text('{"v_max": 0.4, "n_alpha": 31, "w_goal": 0.5}')
    cfg = load_nav_config(p)
    assert cfg.v_max == 0.4
    assert cfg.n_alpha == 31
    assert cfg.w_goal == 0.5
    assert cfg.w_max == NavConfig().w_max
