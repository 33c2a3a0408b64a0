"""Planar rigid-transform algebra shared by every subsystem."""

from __future__ import annotations

import math
from dataclasses import dataclass


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    elif theta > math.pi:
        theta -= 2.0 * math.pi
    return theta


@dataclass(frozen=True)
class Transform2D:
    """Rigid planar transform (and pose): translation plus heading."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @staticmethod
    def identity() -> "Transform2D":
        return Transform2D(0.0, 0.0, 0.0)

    def compose(self, other: "Transform2D") -> "Transform2D":
        """self * other: apply `other` first, then self."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Transform2D(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Transform2D":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Transform2D(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.theta,
        )

    def apply(self, x: float, y: float) -> tuple[float, float]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return (self.x + c * x - s * y, self.y + s * x + c * y)

    def delta_to(self, other: "Transform2D") -> "Transform2D":
        """Transform expressing `other` in this pose's frame."""
        return self.inverse().compose(other)


# A pose is a transform from the body frame into its parent frame.
Pose2D = Transform2D
