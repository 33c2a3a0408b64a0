"""Directional-Geiger-counter proxy: threshold, projection, distance bins.

A fixed-exposure intensity reading at or above the trigger threshold marks
the camera's view direction as radioactive; lidar returns inside the
camera cone become colored map annotations, binned by camera distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .geometry import Pose2D, Transform2D, wrap_angle
from .mapping import (
    AnnotatedMap,
    RadiationAnnotation,
    RadiationLevel,
    closer_observation_wins,
)
from .sensors import IntensityReading, Scan

DEFAULT_THRESHOLD = 112.0  # 44% of the 8-bit range
DEFAULT_MAX_PROJECTION_RANGE = 5.0
DEFAULT_BIN_EDGES = (2.0, 3.0)


@dataclass(frozen=True)
class GeigerConfig:
    threshold: float = DEFAULT_THRESHOLD
    fov: float = 0.6  # camera cone, rad
    max_projection_range: float = DEFAULT_MAX_PROJECTION_RANGE
    bin_edges: tuple[float, float] = DEFAULT_BIN_EDGES  # red/orange, orange/yellow

    def __post_init__(self):
        if not (0.0 < self.threshold < 255.0):
            raise ValueError("threshold must be in (0, 255)")
        if not (self.bin_edges[0] < self.bin_edges[1] <= self.max_projection_range):
            raise ValueError("bin_edges must increase and fit inside max_projection_range")


@dataclass(frozen=True)
class DetectionTrigger:
    reading: IntensityReading


@dataclass(frozen=True)
class DetectionEvent:
    reading: IntensityReading
    annotated_point_count: int  # 0 reproduces the camera/lidar mismatch case
    robot_id: str


def detect(reading: IntensityReading, config: GeigerConfig) -> Optional[DetectionTrigger]:
    """Trigger iff mean_gray >= threshold (boundary inclusive)."""
    if reading.mean_gray >= config.threshold:
        return DetectionTrigger(reading=reading)
    return None


def bin_level(distance: float, config: GeigerConfig) -> RadiationLevel:
    """Severity from observation distance; boundaries belong to the nearer bin."""
    if not (0.0 <= distance <= config.max_projection_range):
        raise ValueError(f"distance {distance} outside [0, {config.max_projection_range}]")
    if distance <= config.bin_edges[0]:
        return "red"
    if distance <= config.bin_edges[1]:
        return "orange"
    return "yellow"


def project_detection(
    scan: Scan,
    camera_pose: Pose2D,
    robot_pose_in_map: Transform2D,
    config: GeigerConfig,
    time: float,
) -> list[tuple[tuple[float, float], RadiationAnnotation]]:
    """Project a triggered reading onto the scan's hit points.

    Hit points whose bearing from the camera lies inside the cone and whose
    camera distance is within range become annotations, expressed in map
    frame. The list may be empty when the camera sees the source but no
    lidar return falls inside the cone.
    """
    out = []
    sensor_pose = scan.pose_at_capture
    # map_from_world moves scan points (world frame) into the map frame
    map_from_world = robot_pose_in_map.compose(sensor_pose.inverse())
    for angle, rng, hit in zip(scan.angles, scan.ranges, scan.hits):
        if not hit:
            continue
        wx, wy = sensor_pose.apply(rng * math.cos(angle), rng * math.sin(angle))
        dx, dy = wx - camera_pose.x, wy - camera_pose.y
        d = math.hypot(dx, dy)
        if d > config.max_projection_range:
            continue
        bearing = wrap_angle(math.atan2(dy, dx) - camera_pose.theta)
        if abs(bearing) > config.fov / 2.0:
            continue
        mx, my = map_from_world.apply(wx, wy)
        out.append(
            (
                (mx, my),
                RadiationAnnotation(
                    level=bin_level(d, config), observation_distance=d, observed_at=time
                ),
            )
        )
    return out


def update_annotations(
    map_: AnnotatedMap,
    new: list[tuple[tuple[float, float], RadiationAnnotation]],
    rule=closer_observation_wins,
) -> AnnotatedMap:
    """Merge fresh annotations into the map under the refinement rule.

    Each point must already occupy a voxel (the caller inserts scan points
    first via update_map).
    """
    for (x, y), annotation in new:
        idx = map_.index_at(x, y)
        if idx is None:
            raise KeyError(f"annotation at ({x:.3f}, {y:.3f}) has no map point")
        map_.annotate(idx, annotation, rule=rule)
    return map_
