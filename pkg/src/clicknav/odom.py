"""Dead-reckoning pose estimate, the system's only localization.

Pose updates use the exact unicycle arc rather than Euler steps, so the
integration is step-size invariant for constant commands and experiment
metrics carry no integrator artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def wrap_angle(theta: float) -> float:
    """Wrap into (-pi, pi]."""
    w = np.arctan2(np.sin(theta), np.cos(theta))
    # arctan2 returns -pi for inputs at the branch cut; the convention here is +pi
    return float(np.pi) if w == -np.pi else float(w)


@dataclass(frozen=True)
class OdomPose:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def distance_to(self, x: float, y: float) -> float:
        return float(np.hypot(self.x - x, self.y - y))


def integrate(pose: OdomPose, v: float, w: float, dt: float) -> OdomPose:
    """Advance the pose along the exact circular arc for constant (v, w).

    Uses the half-angle form d = v*dt*sinc(w*dt/2) applied at the mid
    heading, which equals the classic (v/w)*(sin..) arc solution but has
    no singular branch at w = 0 and stays exact for arbitrarily small w.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    half = 0.5 * w * dt
    chord = v * dt * np.sinc(half / np.pi)  # np.sinc is the normalized sin(pi x)/(pi x)
    mid = pose.theta + half
    return OdomPose(
        x=pose.x + chord * np.cos(mid),
        y=pose.y + chord * np.sin(mid),
        theta=pose.theta + w * dt,
    )


@dataclass(frozen=True)
class OdomNoise:
    """Gaussian drift model: std-devs per meter traveled and per radian turned."""

    trans_std_per_m: float = 0.0
    rot_std_per_rad: float = 0.0
    rot_std_per_m: float = 0.0

    def __post_init__(self):
        if min(self.trans_std_per_m, self.rot_std_per_rad, self.rot_std_per_m) < 0:
            raise ValueError("noise std-devs must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.trans_std_per_m == 0 and self.rot_std_per_rad == 0 and self.rot_std_per_m == 0


def add_noise(
    dist: float, turn: float, noise: OdomNoise, rng: np.random.Generator
) -> tuple[float, float]:
    """Perturb an arc increment (distance traveled, angle turned).

    Gaussian error scales with the increment itself: std_per_m times the
    meters moved on the distance, std_per_rad times the radians turned
    (plus an optional per-meter heading drift) on the turn.  Zero std-devs
    return the inputs untouched and consume no randomness, so a noiseless
    run is bit-identical to one with no noise model at all.
    """
    if noise.is_zero:
        return dist, turn
    n_dist = dist + rng.normal(0.0, 1.0) * noise.trans_std_per_m * abs(dist)
    n_turn = (
        turn
        + rng.normal(0.0, 1.0) * noise.rot_std_per_rad * abs(turn)
        + rng.normal(0.0, 1.0) * noise.rot_std_per_m * abs(dist)
    )
    return n_dist, n_turn


def integrate_delta(pose: OdomPose, dist: float, turn: float) -> OdomPose:
    """Advance the pose by an arc increment (exact arc, unit time)."""
    return integrate(pose, dist, turn, 1.0)
