"""Headless benchmark harness for the three scenario worlds.

Each trial drives the robot from a jittered start pose to the marked
target zone, either by the click-to-go pipeline (one click at the target
center it sees, then reactive navigation on odometry) or by a scripted
stand-in for a human operator (delayed, quantized, heading-then-drive
keyboard control).  Results are emitted as per-trial CSV tables plus an
auto-vs-manual comparison, all byte-reproducible under a fixed seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .camgeom import CameraModel, default_camera, load_camera_config
from .kinchain import (
    KinematicChain,
    ground_to_pixel,
    load_chain_config,
    pixel_to_ground,
    webot_chain,
)
from .odom import OdomNoise, OdomPose, add_noise, integrate_delta, wrap_angle
from .reactnav import (
    ARRIVED,
    BLOCKED,
    NavConfig,
    LaserScan,
    ReactiveNavigator,
    VelocityCmd,
    load_nav_config,
)
from .simworld import DT, SCENARIO_NAMES, ScenarioSpec, SimRobot, raycast_lidar, scenario, step

TRIAL_TIMEOUT = 60.0
SETTLE_TIME = 1.0

# Human-surrogate controller constants: keyboard-style quantized commands,
# a fixed reaction delay, and a 2 Hz decision rate.
MANUAL_V = 0.4
MANUAL_W = 0.8
MANUAL_DECISION_PERIOD = 0.5
MANUAL_REACTION_DELAY = 0.25
MANUAL_HEADING_DEADBAND = 0.15
MANUAL_TURN_FIRST_ANGLE = 0.35
MANUAL_WAYPOINT_RADIUS = 0.2
MANUAL_STOP_RADIUS = 0.12

DEFAULT_NOISE = OdomNoise(trans_std_per_m=0.005, rot_std_per_rad=0.01, rot_std_per_m=0.003)

# Comparison guards against division by (near) zero manual errors.
EPS_CM = 0.1
EPS_RAD = 0.01
EPS_SEC = 0.1


@dataclass(frozen=True)
class TrialResult:
    x_err_cm: float
    y_err_cm: float
    f_err_rad: float
    t_sec: float
    collided: bool
    timed_out: bool = False
    path_length_m: float = 0.0

    @property
    def arrived(self) -> bool:
        return not self.collided and not self.timed_out


@dataclass(frozen=True)
class ComparisonRow:
    x_pct: float
    y_pct: float
    f_pct: float
    t_pct: float


@dataclass
class Harness:
    """Shared geometry/config bundle for all trials."""

    camera: CameraModel = field(default_factory=default_camera)
    chain: KinematicChain = field(default_factory=webot_chain)
    nav: NavConfig = field(default_factory=NavConfig)
    noise: OdomNoise = DEFAULT_NOISE


def _jittered_start(spec: ScenarioSpec, rng: np.random.Generator) -> OdomPose:
    return OdomPose(
        spec.start_pose.x + rng.uniform(-0.05, 0.05),
        spec.start_pose.y + rng.uniform(-0.05, 0.05),
        spec.start_pose.theta + rng.uniform(-0.05, 0.05),
    )


def _world_to_robot(pose: OdomPose, x: float, y: float) -> tuple[float, float]:
    dx, dy = x - pose.x, y - pose.y
    c, s = np.cos(-pose.theta), np.sin(-pose.theta)
    return c * dx - s * dy, s * dx + c * dy


def click_target_pixel(spec: ScenarioSpec, robot: SimRobot, harness: Harness) -> tuple[int, int]:
    """The integer pixel where the rendered frame shows the target center.

    The renderer draws through the same projection pipeline, so the
    forward projection of the target center IS its rendered location;
    rounding models the discreteness of a real click.
    """
    bx, by = _world_to_robot(robot.pose, spec.target.cx, spec.target.cy)
    u, v = ground_to_pixel(harness.camera, harness.chain, robot.joints(), (bx, by))
    if not harness.camera.in_frame(u, v):
        raise ValueError(f"target center projects outside the frame at ({u:.0f}, {v:.0f})")
    return int(round(u)), int(round(v))


def run_auto_trial(spec: ScenarioSpec, rng: np.random.Generator, harness: Harness) -> TrialResult:
    """One click at the rendered target center, then reactive navigation."""
    robot = SimRobot(pose=_jittered_start(spec, rng))
    u, v = click_target_pixel(spec, robot, harness)
    goal_pt = pixel_to_ground(harness.camera, harness.chain, robot.joints(), float(u), float(v))

    nav = ReactiveNavigator(config=harness.nav, shape=robot.shape)
    nav.set_goal(goal_pt.x, goal_pt.y)  # odometry frame == robot frame at click time
    odom = OdomPose()

    t = 0.0
    path_len = 0.0
    collided = False
    arrived_at: Optional[float] = None
    while t < TRIAL_TIMEOUT:
        scan = LaserScan(
            angle_min=-np.pi,
            angle_increment=2 * np.pi / 360,
            ranges=raycast_lidar(spec.world, robot.pose),
            max_range=6.0,
            timestamp=t,
        )
        status, cmd = nav.step(odom, scan, current=VelocityCmd(robot.v, robot.w))
        if status == ARRIVED and arrived_at is None:
            arrived_at = t
        prev = robot.pose
        events = step(spec.world, robot, cmd, DT, a_max=harness.nav.a_max)
        if "collision" in events:
            collided = True
            break
        true_dist = np.hypot(robot.pose.x - prev.x, robot.pose.y - prev.y)
        true_turn = wrap_angle(robot.pose.theta - prev.theta)
        path_len += true_dist
        noisy = add_noise(true_dist, true_turn, harness.noise, rng)
        odom = integrate_delta(odom, *noisy)
        t += DT
        if arrived_at is not None and abs(robot.v) < 1e-3 and t - arrived_at >= SETTLE_TIME:
            break
    timed_out = arrived_at is None and not collided
    return _measure(spec, robot, arrived_at if arrived_at is not None else t, collided, timed_out, path_len)


def _manual_waypoints(spec: ScenarioSpec) -> list[tuple[float, float]]:
    tc = (spec.target.cx, spec.target.cy)
    if spec.name == "doorway":
        return [(0.7, 0.0), (1.3, 0.0), tc]
    if spec.name == "block":
        # skirt the square with margin for the quantized-command wobble
        return [(0.1, 1.0), (1.6, 1.05), (2.2, 0.55), tc]
    return [tc]


def run_manual_trial(spec: ScenarioSpec, rng: np.random.Generator, harness: Harness) -> TrialResult:
    """Scripted operator: watches the true pose, drives waypoint to waypoint
    with delayed, quantized, heading-then-drive keyboard commands."""
    robot = SimRobot(pose=_jittered_start(spec, rng))
    waypoints = _manual_waypoints(spec)
    wp_idx = 0
    pending: list[tuple[float, VelocityCmd]] = []  # (due time, command)
    active = VelocityCmd(0.0, 0.0)
    next_decision = 0.0
    stopped_at: Optional[float] = None

    t = 0.0
    path_len = 0.0
    collided = False
    while t < TRIAL_TIMEOUT:
        if t >= next_decision and stopped_at is None:
            next_decision = t + MANUAL_DECISION_PERIOD
            wx, wy = waypoints[wp_idx]
            dist = robot.pose.distance_to(wx, wy)
            last = wp_idx == len(waypoints) - 1
            reach = MANUAL_STOP_RADIUS if last else MANUAL_WAYPOINT_RADIUS
            if dist <= reach:
                if last:
                    pending.append((t + MANUAL_REACTION_DELAY, VelocityCmd(0.0, 0.0)))
                    stopped_at = t + MANUAL_REACTION_DELAY
                else:
                    wp_idx += 1
            else:
                heading = np.arctan2(wy - robot.pose.y, wx - robot.pose.x)
                err = wrap_angle(heading - robot.pose.theta)
                if abs(err) > MANUAL_TURN_FIRST_ANGLE:
                    cmd = VelocityCmd(0.0, MANUAL_W * np.sign(err))
                elif abs(err) > MANUAL_HEADING_DEADBAND:
                    cmd = VelocityCmd(MANUAL_V, MANUAL_W * np.sign(err))
                else:
                    cmd = VelocityCmd(MANUAL_V, 0.0)
                pending.append((t + MANUAL_REACTION_DELAY, cmd))
        while pending and pending[0][0] <= t:
            active = pending.pop(0)[1]
        prev = robot.pose
        events = step(spec.world, robot, active, DT, a_max=harness.nav.a_max)
        if "collision" in events:
            collided = True
            break
        path_len += np.hypot(robot.pose.x - prev.x, robot.pose.y - prev.y)
        t += DT
        if stopped_at is not None and abs(robot.v) < 1e-3 and t > stopped_at:
            break
    timed_out = stopped_at is None and not collided
    return _measure(spec, robot, stopped_at if stopped_at is not None else t, collided, timed_out, path_len)


def _measure(spec, robot, t, collided, timed_out, path_len) -> TrialResult:
    return TrialResult(
        x_err_cm=100.0 * (robot.pose.x - spec.target.cx),
        y_err_cm=100.0 * (robot.pose.y - spec.target.cy),
        f_err_rad=wrap_angle(robot.pose.theta - spec.start_pose.theta),
        t_sec=float(t),
        collided=collided,
        timed_out=timed_out,
        path_length_m=float(path_len),
    )


def run_trials(
    spec: ScenarioSpec,
    controller: str,
    n: int,
    seed: int,
    harness: Optional[Harness] = None,
) -> list[TrialResult]:
    """n independent seeded trials of one controller on one scenario."""
    if n < 1:
        raise ValueError("need at least one trial")
    if controller not in ("auto", "manual"):
        raise ValueError(f"unknown controller {controller!r}")
    harness = harness or Harness()
    run = run_auto_trial if controller == "auto" else run_manual_trial
    results = []
    for i in range(n):
        rng = np.random.default_rng([seed, i, 0 if controller == "auto" else 1])
        results.append(run(spec, rng, harness))
    return results


def summarize(auto: list[TrialResult], manual: list[TrialResult]) -> list[ComparisonRow]:
    """Per-trial-pair percent improvement of auto over manual, plus the
    aggregate row (mean of the per-pair values) appended last."""
    if len(auto) != len(manual):
        raise ValueError(f"length mismatch: {len(auto)} auto vs {len(manual)} manual")

    def pct(m: float, a: float, eps: float) -> float:
        return 100.0 * (abs(m) - abs(a)) / max(abs(m), eps)

    rows = [
        ComparisonRow(
            x_pct=pct(m.x_err_cm, a.x_err_cm, EPS_CM),
            y_pct=pct(m.y_err_cm, a.y_err_cm, EPS_CM),
            f_pct=pct(m.f_err_rad, a.f_err_rad, EPS_RAD),
            t_pct=pct(m.t_sec, a.t_sec, EPS_SEC),
        )
        for a, m in zip(auto, manual)
    ]
    rows.append(ComparisonRow(
        x_pct=float(np.mean([r.x_pct for r in rows])),
        y_pct=float(np.mean([r.y_pct for r in rows])),
        f_pct=float(np.mean([r.f_pct for r in rows])),
        t_pct=float(np.mean([r.t_pct for r in rows])),
    ))
    return rows


def format_trials_csv(results: list[TrialResult], with_heading: bool) -> str:
    """Fixed-format table: errors to 1 decimal, heading to 2, time to 1."""
    header = "trial,x_cm,y_cm,f_rad,t_sec" if with_heading else "trial,x_cm,y_cm,t_sec"
    lines = [header]
    for i, r in enumerate(results, start=1):
        cells = [str(i), f"{r.x_err_cm:.1f}", f"{r.y_err_cm:.1f}"]
        if with_heading:
            cells.append(f"{r.f_err_rad:.2f}")
        cells.append(f"{r.t_sec:.1f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_comparison_csv(rows: list[ComparisonRow], with_heading: bool) -> str:
    header = "trial,x_pct,y_pct,f_pct,t_pct" if with_heading else "trial,x_pct,y_pct,t_pct"
    lines = [header]
    for i, r in enumerate(rows[:-1], start=1):
        cells = [str(i), f"{r.x_pct:.0f}", f"{r.y_pct:.0f}"]
        if with_heading:
            cells.append(f"{r.f_pct:.0f}")
        cells.append(f"{r.t_pct:.0f}")
        lines.append(",".join(cells))
    agg = rows[-1]
    cells = ["results", f"{agg.x_pct:.0f}", f"{agg.y_pct:.0f}"]
    if with_heading:
        cells.append(f"{agg.f_pct:.0f}")
    cells.append(f"{agg.t_pct:.0f}")
    lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit(
    out_dir: Path,
    scenario_name: str,
    auto: Optional[list[TrialResult]],
    manual: Optional[list[TrialResult]],
) -> list[Path]:
    """Write the per-controller tables (and the comparison when both ran)."""
    if not auto and not manual:
        raise ValueError("nothing to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with_heading = scenario_name == "open_space"
    written = []
    for name, results in (("auto", auto), ("manual", manual)):
        if not results:
            continue
        p = out_dir / f"{scenario_name}_{name}.csv"
        p.write_text(format_trials_csv(results, with_heading))
        written.append(p)
    if auto and manual:
        p = out_dir / f"{scenario_name}_comparison.csv"
        p.write_text(format_comparison_csv(summarize(auto, manual), with_heading))
        written.append(p)
    return written


def print_table(scenario_name: str, controller: str, results: list[TrialResult]) -> None:
    with_heading = scenario_name == "open_space"
    cols = "x, cm    y, cm" + ("    f, rad" if with_heading else "") + "    t, sec"
    print(f"\n{scenario_name} / {controller}")
    print(f"  #  {cols}")
    for i, r in enumerate(results, start=1):
        row = f"{i:>3}  {r.x_err_cm:>6.1f}  {r.y_err_cm:>6.1f}"
        if with_heading:
            row += f"  {r.f_err_rad:>7.2f}"
        row += f"  {r.t_sec:>7.1f}"
        if r.collided:
            row += "  [collision]"
        if r.timed_out:
            row += "  [timeout]"
        print(row)


def check_invariants(per_scenario: dict[str, dict[str, list[TrialResult]]]) -> list[str]:
    """Gate conditions for the exit code; returns failure descriptions."""
    failures = []
    for name, by_ctrl in per_scenario.items():
        auto = by_ctrl.get("auto")
        if not auto:
            continue
        n = len(auto)
        collisions = sum(r.collided for r in auto)
        if collisions:
            failures.append(f"{name}: {collisions}/{n} auto trials collided")
        arrivals = sum(r.arrived for r in auto)
        need = n if name == "open_space" else int(np.ceil(0.95 * n))
        if arrivals < need:
            failures.append(f"{name}: only {arrivals}/{n} auto arrivals (need {need})")
        if name == "block":
            short = [r for r in auto if r.arrived and r.path_length_m <= 2.0]
            if short:
                failures.append(f"block: {len(short)} auto paths did not detour (<= 2.0 m)")
    return failures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clicknav-experiments",
                                     description="Run the scenario benchmark suites headlessly.")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run trials and emit CSV tables")
    run_p.add_argument("--scenario", choices=[*SCENARIO_NAMES, "all"], default="all")
    run_p.add_argument("--controller", choices=["auto", "manual", "both"], default="both")
    run_p.add_argument("--trials", type=int, default=10)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--out", type=Path, default=Path("results"))
    run_p.add_argument("--camera-config", type=Path, default=None)
    run_p.add_argument("--chain-config", type=Path, default=None)
    run_p.add_argument("--nav-config", type=Path, default=None)
    args = parser.parse_args(argv)

    harness = Harness(
        camera=load_camera_config(args.camera_config) if args.camera_config else default_camera(),
        chain=load_chain_config(args.chain_config) if args.chain_config else webot_chain(),
        nav=load_nav_config(args.nav_config) if args.nav_config else NavConfig(),
    )
    names = SCENARIO_NAMES if args.scenario == "all" else (args.scenario,)
    controllers = ("auto", "manual") if args.controller == "both" else (args.controller,)

    per_scenario: dict[str, dict[str, list[TrialResult]]] = {}
    for name in names:
        spec = scenario(name)
        per_scenario[name] = {}
        for ctrl in controllers:
            results = run_trials(spec, ctrl, args.trials, args.seed, harness)
            per_scenario[name][ctrl] = results
            print_table(name, ctrl, results)
        emit(args.out, name,
             per_scenario[name].get("auto"), per_scenario[name].get("manual"))

    failures = check_invariants(per_scenario)
    for f in failures:
        print(f"INVARIANT FAILED: {f}", file=sys.stderr)
    print(f"\nwrote tables to {args.out}/")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
