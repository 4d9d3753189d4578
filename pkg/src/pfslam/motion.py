"""Differential-drive motion model.

Linear velocity comes from the wheel encoders, yaw rate from the fiber
optic gyro, and poses are advanced with forward-Euler integration:

    v       = mean over wheels of  dticks / (dt * resolution) * pi * d_wheel
    omega   = delta_yaw / dt
    x      += v * dt * cos(theta)
    y      += v * dt * sin(theta)
    theta  += omega * dt          (normalized afterwards)

The translation uses the heading from before the rotation update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, normalize_angle
from .sensor_io import CalibrationConfig, EncoderRecord

__all__ = [
    "MotionNoiseParams",
    "VelocityEstimate",
    "encoder_velocity",
    "propagate",
    "propagate_noisy",
]

MICROSECONDS = 1e-6


@dataclass(frozen=True)
class VelocityEstimate:
    """Control input for one step: speed, yaw rate, and the step length."""

    v: float
    omega: float
    dt: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError("velocity components must be finite")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")


@dataclass(frozen=True)
class MotionNoiseParams:
    """Std deviations of the zero-mean Gaussian noise added to (v, omega)."""

    sigma_v: float = 0.0
    sigma_omega: float = 0.0

    def __post_init__(self):
        if self.sigma_v < 0 or self.sigma_omega < 0:
            raise ValueError("noise sigmas must be >= 0")

    @classmethod
    def zero(cls) -> "MotionNoiseParams":
        return cls(0.0, 0.0)


def encoder_velocity(
    prev: EncoderRecord,
    curr: EncoderRecord,
    delta_yaw: float,
    calib: CalibrationConfig,
) -> VelocityEstimate:
    """Velocity estimate over one encoder interval.

    Per-wheel revolutions per second are dticks / (dt * resolution); each
    wheel's speed is that times its circumference pi * d; v averages the
    two wheels. The yaw rate is the accumulated gyro increment over dt.
    """
    dt = (curr.timestamp_us - prev.timestamp_us) * MICROSECONDS
    if dt <= 0:
        raise ValueError(
            f"encoder interval must have positive duration, got dt={dt}"
        )
    rev_left = (curr.left_ticks - prev.left_ticks) / (dt * calib.encoder_resolution)
    rev_right = (curr.right_ticks - prev.right_ticks) / (dt * calib.encoder_resolution)
    speed_left = rev_left * math.pi * calib.wheel_diameter_left
    speed_right = rev_right * math.pi * calib.wheel_diameter_right
    return VelocityEstimate(
        v=0.5 * (speed_left + speed_right),
        omega=delta_yaw / dt,
        dt=dt,
    )


def propagate(pose: Pose2D, u: VelocityEstimate) -> Pose2D:
    """One Euler step: translate along the current heading, then rotate."""
    step = u.v * u.dt
    return Pose2D(
        pose.x + step * math.cos(pose.theta),
        pose.y + step * math.sin(pose.theta),
        normalize_angle(pose.theta + u.omega * u.dt),
    )


def propagate_noisy(
    pose: Pose2D,
    u: VelocityEstimate,
    noise: MotionNoiseParams,
    rng: np.random.Generator,
) -> Pose2D:
    """Euler step with one Gaussian draw on v and one on omega.

    Exactly two values are consumed from `rng` per call (v first), so
    per-particle streams stay aligned regardless of the noise magnitude.
    """
    eps_v = rng.normal(0.0, noise.sigma_v)
    eps_omega = rng.normal(0.0, noise.sigma_omega)
    return propagate(pose, VelocityEstimate(u.v + eps_v, u.omega + eps_omega, u.dt))
