"""Network-facing control service for the click-to-go robot.

A single authoritative loop owns the simulation and navigator.  Network
handlers only enqueue commands and read immutable snapshots; commands are
applied one per tick in arrival order.  Frames are announced by sequence
number over the message channel and pulled via HTTP, keeping the channel
lightweight.

Wire protocol (JSON text messages):
  client -> server: {"type":"goto","u":...,"v":...}, {"type":"velocity","v":...,"w":...},
                    {"type":"stop"}, {"type":"set_camera","tilt":...,"pan":...},
                    {"type":"load_scenario","name":...}
  server -> client: {"type":"state",...}, {"type":"frame_ready","seq":...},
                    {"type":"error","code":...,"message":...}
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from aiohttp import WSMsgType, web

from .camgeom import CameraModel, NoConvergence, OutOfFrame, default_camera, load_camera_config
from .kinchain import (
    AboveHorizon,
    BehindCamera,
    KinematicChain,
    OutOfRange,
    camera_joints,
    load_chain_config,
    pixel_to_ground,
    webot_chain,
)
from .odom import OdomPose, integrate_delta, wrap_angle
from .reactnav import (
    ARRIVED,
    BLOCKED,
    IDLE,
    NAVIGATING,
    NavConfig,
    LaserScan,
    ReactiveNavigator,
    VelocityCmd,
    load_nav_config,
)
from .simworld import (
    DT,
    RENDER_EVERY,
    ScenarioSpec,
    SimRobot,
    UnknownScenario,
    raycast_lidar,
    render_camera,
    scenario,
    step as sim_step,
)

log = logging.getLogger("clicknav.teleop")

FRAME_CACHE = 8

SESSION_KEY = web.AppKey("session", object)
CLIENTS_KEY = web.AppKey("clients", set)
PACE_KEY = web.AppKey("pace", float)

ERROR_CODES = {
    AboveHorizon: "above_horizon",
    BehindCamera: "above_horizon",
    OutOfRange: "out_of_range",
    OutOfFrame: "out_of_frame",
    UnknownScenario: "unknown_scenario",
    NoConvergence: "no_convergence",
}


@dataclass
class FrameRecord:
    seq: int
    png: bytes
    pose: OdomPose       # odometry pose at render time
    tilt: float
    pan: float


@dataclass
class TeleopSession:
    """Authoritative sim + nav state, advanced tick by tick.

    Pure headless core: the network layer enqueues commands, calls tick(),
    and forwards the returned events.  Everything here is synchronous and
    deterministic, so tests can drive it directly.
    """

    spec: ScenarioSpec
    camera: CameraModel = field(default_factory=default_camera)
    chain: KinematicChain = field(default_factory=webot_chain)
    nav_config: NavConfig = field(default_factory=NavConfig)

    def __post_init__(self):
        self.robot = SimRobot(pose=self.spec.start_pose)
        self.nav = ReactiveNavigator(config=self.nav_config, shape=self.robot.shape)
        self.odom = OdomPose()
        self.tick_count = 0
        self.nav_status = IDLE
        self.manual_cmd: Optional[VelocityCmd] = None
        self.commands: deque[dict] = deque()
        self.frames: OrderedDict[int, FrameRecord] = OrderedDict()
        self.frame_seq = 0
        self.last_frame: Optional[FrameRecord] = None

    # -- command intake (called from any handler) --

    def enqueue(self, cmd: dict) -> None:
        self.commands.append(cmd)

    # -- one authoritative cycle --

    def tick(self) -> list[dict]:
        """Apply at most one queued command, advance control + physics, and
        render when due.  Returns the events to broadcast."""
        events = []
        if self.commands:
            err = self._apply(self.commands.popleft())
            if err is not None:
                events.append(err)

        cmd = VelocityCmd(0.0, 0.0)
        if self.manual_cmd is not None:
            cmd = self.manual_cmd
        elif self.nav.goal is not None:
            scan = LaserScan(
                angle_min=-np.pi,
                angle_increment=2 * np.pi / 360,
                ranges=raycast_lidar(self.spec.world, self.robot.pose),
                max_range=6.0,
                timestamp=self.tick_count * DT,
            )
            self.nav_status, cmd = self.nav.step(
                self.odom, scan, current=VelocityCmd(self.robot.v, self.robot.w)
            )

        prev = self.robot.pose
        sim_step(self.spec.world, self.robot, cmd, DT, a_max=self.nav_config.a_max)
        dist = float(np.hypot(self.robot.pose.x - prev.x, self.robot.pose.y - prev.y))
        turn = wrap_angle(self.robot.pose.theta - prev.theta)
        self.odom = integrate_delta(self.odom, dist, turn)

        self.tick_count += 1
        if (self.tick_count - 1) % RENDER_EVERY == 0:
            events.append(self._render())
        events.append(self.state_event())
        return events

    def _apply(self, cmd: dict) -> Optional[dict]:
        kind = cmd.get("type")
        try:
            if kind == "goto":
                self._apply_goto(float(cmd["u"]), float(cmd["v"]))
            elif kind == "velocity":
                v = float(np.clip(float(cmd["v"]), -self.nav_config.v_max, self.nav_config.v_max))
                w = float(np.clip(float(cmd["w"]), -self.nav_config.w_max, self.nav_config.w_max))
                self.manual_cmd = VelocityCmd(v, w)
                self.nav.clear_goal()
                self.nav_status = IDLE
            elif kind == "stop":
                self.manual_cmd = None
                self.nav.clear_goal()
                self.nav_status = IDLE
            elif kind == "set_camera":
                if "tilt" in cmd:
                    self.robot.camera_tilt = float(cmd["tilt"])
                if "pan" in cmd:
                    self.robot.camera_pan = float(cmd["pan"])
            elif kind == "load_scenario":
                self._load_scenario(str(cmd["name"]))
            else:
                return _error("bad_message", f"unknown command type {kind!r}")
        except (KeyError, TypeError, ValueError, NoConvergence) as e:
            if type(e) in ERROR_CODES:
                return _error(ERROR_CODES[type(e)], str(e))
            return _error("bad_message", f"malformed {kind or 'command'}: {e}")
        return None

    def _apply_goto(self, u: float, v: float) -> None:
        """Click conversion through the geometry of the frame the user saw."""
        frame = self.last_frame
        joints = camera_joints(frame.pan, frame.tilt) if frame else self.robot.joints()
        gp = pixel_to_ground(self.camera, self.chain, joints, u, v)
        base = frame.pose if frame else self.odom
        c, s = np.cos(base.theta), np.sin(base.theta)
        gx = base.x + c * gp.x - s * gp.y
        gy = base.y + s * gp.x + c * gp.y
        self.manual_cmd = None
        self.nav.set_goal(gx, gy)
        self.nav_status = NAVIGATING

    def _load_scenario(self, name: str) -> None:
        self.spec = scenario(name)
        self.robot = SimRobot(pose=self.spec.start_pose)
        self.nav = ReactiveNavigator(config=self.nav_config, shape=self.robot.shape)
        self.odom = OdomPose()
        self.nav_status = IDLE
        self.manual_cmd = None

    def _render(self) -> dict:
        self.frame_seq += 1
        frame = render_camera(
            self.spec.world, self.robot, self.camera, self.chain,
            target=self.spec.target, seq=self.frame_seq,
        )
        rec = FrameRecord(
            seq=self.frame_seq, png=frame.to_png(), pose=self.odom,
            tilt=self.robot.camera_tilt, pan=self.robot.camera_pan,
        )
        self.frames[rec.seq] = rec
        while len(self.frames) > FRAME_CACHE:
            self.frames.popitem(last=False)
        self.last_frame = rec
        return {"type": "frame_ready", "seq": rec.seq}

    def state_event(self) -> dict:
        goal = self.nav.goal
        return {
            "type": "state",
            "tick": self.tick_count,
            "pose": {"x": self.odom.x, "y": self.odom.y, "theta": self.odom.theta},
            "goal": None if goal is None else {"x": goal.x, "y": goal.y},
            "nav_status": self.nav_status,
            "collision": self.robot.collided,
        }

    def frame_png(self, seq: int) -> Optional[bytes]:
        rec = self.frames.get(seq)
        return rec.png if rec else None


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


FALLBACK_PAGE = """<!doctype html>
<html><head><title>clicknav teleop</title></head>
<body><h1>clicknav teleop service</h1>
<p>No frontend build found. The JSON/WebSocket API is live:
GET /state, GET /frame/{seq}, WS /ws.</p>
<p>Build the browser console with <code>npm run build</code> in frontend/
and restart, or point a client at the wire protocol directly.</p>
</body></html>"""


def build_app(
    session: TeleopSession, static_dir: Optional[Path] = None, pace: float = 1.0
) -> web.Application:
    """pace scales the loop's real-time budget per tick; 0 runs flat out
    (simulated time detaches from wall time, useful for tests)."""
    app = web.Application()
    app[SESSION_KEY] = session
    app[CLIENTS_KEY] = set()
    app[PACE_KEY] = pace

    async def index(request):
        if static_dir and (static_dir / "index.html").exists():
            return web.FileResponse(static_dir / "index.html")
        return web.Response(text=FALLBACK_PAGE, content_type="text/html")

    async def state(request):
        return web.json_response(session.state_event())

    async def frame(request):
        try:
            seq = int(request.match_info["seq"])
        except ValueError:
            raise web.HTTPBadRequest(text="seq must be an integer")
        png = session.frame_png(seq)
        if png is None:
            raise web.HTTPNotFound(text=f"frame {seq} not cached")
        return web.Response(body=png, content_type="image/png")

    async def ws_handler(request):
        ws = web.WebSocketResponse(heartbeat=30)
        await ws.prepare(request)
        app[CLIENTS_KEY].add(ws)
        # greet with the current state so late joiners can draw immediately
        await ws.send_json(session.state_event())
        if session.last_frame is not None:
            await ws.send_json({"type": "frame_ready", "seq": session.last_frame.seq})
        try:
            async for msg in ws:
                if msg.type != WSMsgType.TEXT:
                    continue
                try:
                    cmd = json.loads(msg.data)
                except json.JSONDecodeError:
                    await ws.send_json(_error("bad_message", "not valid JSON"))
                    continue
                if not isinstance(cmd, dict):
                    await ws.send_json(_error("bad_message", "expected a JSON object"))
                    continue
                session.enqueue(cmd)
        finally:
            app[CLIENTS_KEY].discard(ws)
        return ws

    app.router.add_get("/", index)
    app.router.add_get("/state", state)
    app.router.add_get("/frame/{seq}", frame)
    app.router.add_get("/ws", ws_handler)
    if static_dir and static_dir.exists():
        app.router.add_static("/static", static_dir)

    async def loop(app):
        task = asyncio.create_task(_run_loop(app))
        yield
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass

    app.cleanup_ctx.append(loop)
    return app


async def _run_loop(app: web.Application) -> None:
    """20 Hz authoritative loop: tick, then broadcast events to all clients."""
    session: TeleopSession = app[SESSION_KEY]
    pace = app[PACE_KEY]
    loop = asyncio.get_running_loop()
    next_tick = loop.time()
    while True:
        events = session.tick()
        dead = []
        for ws in app[CLIENTS_KEY]:
            for ev in events:
                try:
                    await ws.send_json(ev)
                except ConnectionResetError:
                    dead.append(ws)
                    break
        for ws in dead:
            app[CLIENTS_KEY].discard(ws)
        next_tick += DT * pace
        await asyncio.sleep(max(next_tick - loop.time(), 0.0))


def default_static_dir() -> Optional[Path]:
    for candidate in (
        Path(__file__).resolve().parent.parent.parent / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ):
        if candidate.exists():
            return candidate
    return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clicknav-serve",
                                     description="Serve the teleoperation console and control loop.")
    parser.add_argument("--bind", default="127.0.0.1:8080", help="host:port to listen on")
    parser.add_argument("--scenario", default="open_space")
    parser.add_argument("--camera-config", type=Path, default=None)
    parser.add_argument("--chain-config", type=Path, default=None)
    parser.add_argument("--nav-config", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=0, help="reserved for noise models")
    parser.add_argument("--static-dir", type=Path, default=None)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    session = TeleopSession(
        spec=scenario(args.scenario),
        camera=load_camera_config(args.camera_config) if args.camera_config else default_camera(),
        chain=load_chain_config(args.chain_config) if args.chain_config else webot_chain(),
        nav_config=load_nav_config(args.nav_config) if args.nav_config else NavConfig(),
    )
    host, _, port = args.bind.partition(":")
    static_dir = args.static_dir or default_static_dir()
    app = build_app(session, static_dir=static_dir)
    log.info("serving %s on http://%s/ (static: %s)", args.scenario, args.bind, static_dir)
    try:
        web.run_app(app, host=host or "127.0.0.1", port=int(port or 8080))
    except OSError as e:
        log.error("bind failed: %s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
