"""Click-to-go robot teleoperation.

The operator clicks a pixel on the robot's camera view; the pixel is
back-projected through the calibrated camera model and the kinematic
chain onto the ground plane, and a purely reactive navigator drives the
(simulated) differential-drive robot there while avoiding obstacles.

Main entry points:

- camgeom: pinhole + distortion camera model
- kinchain: DH chain, axis remap, pixel-to-ground conversion
- reactnav: trajectory-parameter-space reactive navigator
- odom: exact-arc dead reckoning
- simworld: 2D simulator, lidar, synthetic camera renderer, scenarios
- teleop_service: HTTP/WebSocket control service (clicknav-serve)
- experiments: headless benchmark harness (clicknav-experiments)
"""

from .camgeom import CameraModel, default_camera, load_camera_config
from .kinchain import (
    DhLink,
    GroundPoint,
    KinematicChain,
    camera_joints,
    ground_to_pixel,
    load_chain_config,
    pixel_to_ground,
    webot_chain,
)
from .odom import OdomNoise, OdomPose, integrate
from .reactnav import LaserScan, NavConfig, NavGoal, ReactiveNavigator, RobotShape, VelocityCmd
from .simworld import ScenarioSpec, SimRobot, World, raycast_lidar, render_camera, scenario

__version__ = "0.1.0"

__all__ = [
    "CameraModel", "default_camera", "load_camera_config",
    "DhLink", "GroundPoint", "KinematicChain", "camera_joints",
    "ground_to_pixel", "load_chain_config", "pixel_to_ground", "webot_chain",
    "OdomNoise", "OdomPose", "integrate",
    "LaserScan", "NavConfig", "NavGoal", "ReactiveNavigator", "RobotShape", "VelocityCmd",
    "ScenarioSpec", "SimRobot", "World", "raycast_lidar", "render_camera", "scenario",
    "__version__",
]
