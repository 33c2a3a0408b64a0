"""Planar lidar and the fixed-exposure intensity channel.

Both sensors are pure functions of the world, a pose, and (for the lidar)
an explicit random stream, so every run is reproducible from the scenario
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, wrap_angle
from .world import WorldModel, raycast

DEFAULT_AMBIENT = 40.0
DEFAULT_GAIN = 1200.0
DEFAULT_MIN_DISTANCE = 0.5


@dataclass(frozen=True)
class LidarSpec:
    beam_count: int = 180
    fov: float = 2.0 * math.pi
    max_range: float = 20.0
    range_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.beam_count <= 1:
            raise ValueError("beam_count must be > 1")
        if not (0.0 < self.fov <= 2.0 * math.pi):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.max_range <= 0 or self.range_noise_sigma < 0:
            raise ValueError("max_range must be > 0 and noise sigma >= 0")

    def beam_angles(self) -> np.ndarray:
        """Beam angles relative to the sensor heading, evenly spaced, centered."""
        if self.fov >= 2.0 * math.pi - 1e-12:
            # full circle: avoid duplicating the wrap-around beam
            step = 2.0 * math.pi / self.beam_count
            return -math.pi + step * np.arange(self.beam_count)
        return np.linspace(-self.fov / 2.0, self.fov / 2.0, self.beam_count)


@dataclass(frozen=True)
class Scan:
    pose_at_capture: Pose2D  # ground truth; withheld from SLAM consumers
    angles: tuple[float, ...]  # sensor frame, rad
    ranges: tuple[float, ...]
    hits: tuple[bool, ...]
    timestamp: float = 0.0

    def hit_points_sensor_frame(self) -> np.ndarray:
        """(N, 2) coordinates of hit returns in the sensor frame."""
        pts = [
            (r * math.cos(a), r * math.sin(a))
            for a, r, h in zip(self.angles, self.ranges, self.hits)
            if h
        ]
        return np.array(pts, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class CameraSpec:
    fov: float = 0.6
    max_effective_range: float = 8.0
    ambient_level: float = DEFAULT_AMBIENT
    gain: float = DEFAULT_GAIN
    min_distance: float = DEFAULT_MIN_DISTANCE

    def __post_init__(self):
        if not (0.0 < self.fov < math.pi):
            raise ValueError("fov must be in (0, pi)")
        if not (0.0 <= self.ambient_level < 255.0):
            raise ValueError("ambient_level must be in [0, 255)")
        if self.min_distance <= 0:
            raise ValueError("min_distance must be > 0")


@dataclass(frozen=True)
class IntensityReading:
    mean_gray: float  # 0..255, real-valued
    camera_pose: Pose2D  # mount pose in world frame
    timestamp: float = 0.0


def simulate_lidar(
    world: WorldModel,
    sensor_pose: Pose2D,
    spec: LidarSpec,
    rng: np.random.Generator,
    timestamp: float = 0.0,
) -> Scan:
    """Raycast every beam and add clamped Gaussian range noise.

    Noise is drawn for all beams in a single batch so the stream advances
    identically whether or not individual beams hit.
    """
    angles = spec.beam_angles()
    noise = rng.normal(0.0, spec.range_noise_sigma, size=len(angles)) if spec.range_noise_sigma > 0 else np.zeros(len(angles))
    ranges = []
    hits = []
    origin = (sensor_pose.x, sensor_pose.y)
    for a, n in zip(angles, noise):
        world_angle = sensor_pose.theta + a
        direction = (math.cos(world_angle), math.sin(world_angle))
        hit = raycast(world, origin, direction, spec.max_range)
        if hit is None:
            ranges.append(spec.max_range)
            hits.append(False)
        else:
            r = hit.distance + n
            r = min(max(r, 1e-9), spec.max_range)
            ranges.append(r)
            hits.append(True)
    return Scan(
        pose_at_capture=sensor_pose,
        angles=tuple(float(a) for a in angles),
        ranges=tuple(ranges),
        hits=tuple(hits),
        timestamp=timestamp,
    )


def light_visible(
    world: WorldModel, camera_pose: Pose2D, spec: CameraSpec, position: tuple[float, float]
) -> bool:
    """Is a point within the fov cone, in range, and not occluded by a wall."""
    dx = position[0] - camera_pose.x
    dy = position[1] - camera_pose.y
    d = math.hypot(dx, dy)
    if d > spec.max_effective_range:
        return False
    if d > 0:
        bearing = wrap_angle(math.atan2(dy, dx) - camera_pose.theta)
        if abs(bearing) > spec.fov / 2.0:
            return False
        direction = (dx / d, dy / d)
        hit = raycast(world, (camera_pose.x, camera_pose.y), direction, d)
        if hit is not None and hit.distance < d:
            return False
    return True


def simulate_camera_intensity(
    world: WorldModel, camera_pose: Pose2D, spec: CameraSpec, timestamp: float = 0.0
) -> IntensityReading:
    """Mean grayscale of the fixed-exposure detector channel.

    Each enabled, visible, in-cone light contributes gain * power / d^2,
    floored at min_distance to avoid the contact singularity; the total is
    clamped to the 8-bit range.
    """
    total = spec.ambient_level
    for light in world.lights:
        if not light.enabled:
            continue
        if not light_visible(world, camera_pose, spec, light.position):
            continue
        d = math.hypot(light.position[0] - camera_pose.x, light.position[1] - camera_pose.y)
        total += spec.gain * light.power / max(d * d, spec.min_distance * spec.min_distance)
    mean_gray = min(max(total, 0.0), 255.0)
    return IntensityReading(mean_gray=mean_gray, camera_pose=camera_pose, timestamp=timestamp)
