"""SE(2) pose algebra: composition, inversion, and their Jacobians.

Poses are (x, y, theta) with theta always normalized to (-pi, pi].
Uncertainty propagation elsewhere in the package treats pose noise as an
additive perturbation of this 3-vector, expressed in the frame of the
first ("from") pose of a measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    return math.pi - (math.pi - a) % TWO_PI


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized :func:`normalize_angle`."""
    return np.pi - np.mod(np.pi - np.asarray(a), TWO_PI)


@dataclass(frozen=True)
class Pose2:
    """A 2D rigid-body pose (x, y in meters, theta in radians)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_vec(cls, v) -> "Pose2":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def to_vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous transform."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    def compose(self, other: "Pose2") -> "Pose2":
        """Return self (+) other: other expressed in self's parent frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def pose_compose(a: Pose2, b: Pose2) -> Pose2:
    """SE(2) group operation a (+) b."""
    return a.compose(b)


def pose_inverse(a: Pose2) -> Pose2:
    """SE(2) group inverse, so that a (+) inverse(a) is the identity."""
    return a.inverse()


def relative_pose(a: Pose2, b: Pose2) -> Pose2:
    """Pose of b expressed in a's frame: inverse(a) (+) b."""
    return a.inverse().compose(b)


def compose_jacobians(a: Pose2, b: Pose2) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of pose_compose(a, b) w.r.t. the 3-vectors of a and b."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    ja = np.array(
        [
            [1.0, 0.0, -s * b.x - c * b.y],
            [0.0, 1.0, c * b.x - s * b.y],
            [0.0, 0.0, 1.0],
        ]
    )
    jb = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return ja, jb


def inverse_jacobian(a: Pose2) -> np.ndarray:
    """Jacobian of pose_inverse(a) w.r.t. the 3-vector of a."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return np.array(
        [
            [-c, -s, s * a.x - c * a.y],
            [s, -c, c * a.x + s * a.y],
            [0.0, 0.0, -1.0],
        ]
    )


def pose_difference(a: Pose2, b: Pose2) -> np.ndarray:
    """Component-wise b - a with the angle residual wrapped to (-pi, pi]."""
    return np.array([b.x - a.x, b.y - a.y, normalize_angle(b.theta - a.theta)])
