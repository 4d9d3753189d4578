"""SE(2) poses, rigid transforms, and the lidar -> vehicle -> world chain.

Rotations are kept as a scalar angle; the 2x2 rotation matrix is
materialized only when a transform is applied to points. All angles are
normalized into (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Point2D",
    "Pose2D",
    "RigidTransform2D",
    "apply",
    "apply_to_points",
    "compose",
    "inverse",
    "normalize_angle",
    "normalize_angles",
    "polar_to_cartesian",
    "polar_to_cartesian_arrays",
]


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta}")
    wrapped = math.fmod(theta, math.tau)
    if wrapped > math.pi:
        wrapped -= math.tau
    elif wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


def normalize_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized :func:`normalize_angle` for float arrays."""
    wrapped = np.fmod(np.asarray(theta, dtype=np.float64), math.tau)
    wrapped = np.where(wrapped > math.pi, wrapped - math.tau, wrapped)
    wrapped = np.where(wrapped <= -math.pi, wrapped + math.tau, wrapped)
    return wrapped


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")


@dataclass(frozen=True)
class Point2D:
    """A point in the plane, meters."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("Point2D coordinate", self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class Pose2D:
    """Vehicle pose: position in meters, heading in radians.

    The heading is normalized into (-pi, pi] at construction, so every
    operation that builds a pose preserves the normalization invariant.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        _require_finite("Pose2D field", self.x, self.y, self.theta)
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def position(self) -> Point2D:
        return Point2D(self.x, self.y)


@dataclass(frozen=True)
class RigidTransform2D:
    """SE(2) transform: rotate by `rotation`, then translate by (tx, ty)."""

    rotation: float
    tx: float
    ty: float

    def __post_init__(self):
        _require_finite("RigidTransform2D field", self.rotation, self.tx, self.ty)

    @property
    def translation(self) -> tuple[float, float]:
        return (self.tx, self.ty)

    @classmethod
    def identity(cls) -> "RigidTransform2D":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_pose(cls, pose: Pose2D) -> "RigidTransform2D":
        """Transform mapping body-frame coordinates into the world frame."""
        return cls(pose.theta, pose.x, pose.y)

    def to_pose(self) -> Pose2D:
        return Pose2D(self.tx, self.ty, self.rotation)


def compose(a: RigidTransform2D, b: RigidTransform2D) -> RigidTransform2D:
    """Return the transform equal to applying b first, then a.

    Rotations add (mod 2pi); the translation is a.translation plus b's
    translation rotated by a.rotation.
    """
    c, s = math.cos(a.rotation), math.sin(a.rotation)
    return RigidTransform2D(
        normalize_angle(a.rotation + b.rotation),
        a.tx + c * b.tx - s * b.ty,
        a.ty + s * b.tx + c * b.ty,
    )


def inverse(t: RigidTransform2D) -> RigidTransform2D:
    """Transform u with compose(t, u) == identity (up to rounding)."""
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    return RigidTransform2D(
        normalize_angle(-t.rotation),
        -(c * t.tx + s * t.ty),
        -(-s * t.tx + c * t.ty),
    )


def apply(t: RigidTransform2D, p: Point2D) -> Point2D:
    """Map a point through the transform: rot(t.rotation) @ p + t.translation."""
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    return Point2D(t.tx + c * p.x - s * p.y, t.ty + s * p.x + c * p.y)


def apply_to_points(t: RigidTransform2D, xy: np.ndarray) -> np.ndarray:
    """Apply a transform to an (n, 2) array of points."""
    xy = np.asarray(xy, dtype=np.float64)
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    out = np.empty_like(xy)
    out[:, 0] = t.tx + c * xy[:, 0] - s * xy[:, 1]
    out[:, 1] = t.ty + s * xy[:, 0] + c * xy[:, 1]
    return out


def polar_to_cartesian(range_m: float, angle: float) -> Point2D:
    """Convert one polar reading (range, bearing) to a point in the same frame."""
    if range_m < 0:
        raise ValueError(f"range must be >= 0, got {range_m}")
    return Point2D(range_m * math.cos(angle), range_m * math.sin(angle))


def polar_to_cartesian_arrays(ranges: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Vectorized polar -> cartesian; returns an (n, 2) array."""
    ranges = np.asarray(ranges, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    return np.column_stack((ranges * np.cos(angles), ranges * np.sin(angles)))
