"""Operator-assist behaviors: gap-based steering and teach-and-repeat."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .geometry import Pose2D, wrap_angle
from .sensors import Scan


@dataclass(frozen=True)
class GapParams:
    clearance_range: float = 2.0  # m; beams farther than this count as clear
    min_gap_width: float = 0.2  # rad
    width_weight: float = 0.6
    heading_weight: float = 0.4
    steer_gain: float = 1.5  # 1/s
    v_max: float = 1.0
    omega_max: float = 1.5

    def __post_init__(self):
        if self.width_weight < 0 or self.heading_weight < 0:
            raise ValueError("weights must be >= 0")
        if self.width_weight + self.heading_weight <= 0:
            raise ValueError("weights must not both be zero")
        if min(self.steer_gain, self.v_max, self.omega_max) <= 0:
            raise ValueError("gains and limits must be > 0")


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    omega: float


@dataclass(frozen=True)
class Gap:
    start_angle: float
    end_angle: float  # start + width; may exceed pi for a wrap-around gap

    @property
    def width(self) -> float:
        return self.end_angle - self.start_angle

    @property
    def center(self) -> float:
        return wrap_angle((self.start_angle + self.end_angle) / 2.0)


def _scan_fov(scan: Scan) -> float:
    if len(scan.angles) < 2:
        return 0.0
    step = scan.angles[1] - scan.angles[0]
    return (scan.angles[-1] - scan.angles[0]) + step


def find_gaps(scan: Scan, params: GapParams) -> list[Gap]:
    """Maximal runs of clear beams, wide enough to aim for.

    A beam is clear when its range exceeds clearance_range (max-range
    misses included). Full-circle scans merge the runs touching both ends
    of the angle array into one wrap-around gap.
    """
    n = len(scan.angles)
    step = scan.angles[1] - scan.angles[0] if n > 1 else 0.0
    clear = [
        (not h) or r > params.clearance_range
        for r, h in zip(scan.ranges, scan.hits)
    ]
    runs: list[tuple[int, int]] = []  # inclusive beam index ranges
    start = None
    for i, c in enumerate(clear):
        if c and start is None:
            start = i
        elif not c and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, n - 1))

    full_circle = _scan_fov(scan) >= 2.0 * math.pi - 1e-9
    wrapped = None
    if full_circle and len(runs) >= 2 and runs[0][0] == 0 and runs[-1][1] == n - 1:
        first = runs.pop(0)
        last = runs.pop()
        # the trailing run continues through the wrap into the leading run
        start_angle = scan.angles[last[0]]
        width = ((last[1] - last[0]) + (first[1] - first[0]) + 2) * step
        wrapped = Gap(start_angle, start_angle + width)

    gaps = []
    for s, e in runs:
        start_angle = scan.angles[s]
        width = (e - s + 1) * step
        gaps.append(Gap(start_angle, start_angle + width))
    if wrapped is not None:
        gaps.append(wrapped)
    gaps = [g for g in gaps if g.width >= params.min_gap_width]
    gaps.sort(key=lambda g: g.start_angle)
    return gaps


def follow_the_gap(scan: Scan, goal_heading: float, params: GapParams) -> VelocityCommand:
    """Steer toward the best-scoring gap center, biased toward the goal heading.

    Score per gap: width_weight * (width / fov) + heading_weight * cos(center
    - goal_heading). With no gap at all, rotate in place toward the goal.
    """
    gaps = find_gaps(scan, params)
    if not gaps:
        sign = 1.0 if goal_heading >= 0.0 else -1.0
        return VelocityCommand(0.0, sign * params.omega_max)
    fov = _scan_fov(scan)

    def score(g: Gap) -> float:
        return params.width_weight * (g.width / fov) + params.heading_weight * math.cos(
            g.center - goal_heading
        )

    def sort_key(g: Gap):
        return (-score(g), abs(wrap_angle(g.center - goal_heading)), g.start_angle)

    best = min(gaps, key=sort_key)
    center = best.center
    omega = max(-params.omega_max, min(params.omega_max, params.steer_gain * center))
    v = params.v_max * max(0.0, 1.0 - abs(center) / (fov / 2.0))
    return VelocityCommand(v, omega)


@dataclass
class PathRecord:
    waypoints: list[Pose2D] = field(default_factory=list)
    spacing: float = 1.0


class PathRecorder:
    """Incremental teach recorder: keep poses at least `spacing` apart."""

    def __init__(self, spacing: float):
        if spacing <= 0:
            raise ValueError("spacing must be > 0")
        self.record = PathRecord(spacing=spacing)

    def observe(self, pose: Pose2D) -> None:
        wps = self.record.waypoints
        if not wps:
            wps.append(pose)
            return
        last = wps[-1]
        if math.hypot(pose.x - last.x, pose.y - last.y) >= self.record.spacing:
            wps.append(pose)


def teach_record(pose_stream: Iterable[Pose2D], spacing: float) -> PathRecord:
    recorder = PathRecorder(spacing)
    for pose in pose_stream:
        recorder.observe(pose)
    return recorder.record


DONE = "done"


class RepeatFollower:
    """Pure pursuit back along a recorded path, waypoints in reverse order."""

    def __init__(self, record: PathRecord, params: GapParams):
        if not record.waypoints:
            raise ValueError("cannot repeat an empty path")
        self.record = record
        self.params = params
        self.target_index = len(record.waypoints) - 1
        self.lookahead = 2.0 * record.spacing

    def command(self, current_pose: Pose2D):
        """Next velocity command, or DONE when back at the start waypoint."""
        wps = self.record.waypoints
        home = wps[0]
        if math.hypot(current_pose.x - home.x, current_pose.y - home.y) < self.record.spacing / 2.0:
            return DONE
        # advance (strictly decreasing) past waypoints inside the lookahead circle
        while self.target_index > 0:
            wp = wps[self.target_index]
            if math.hypot(current_pose.x - wp.x, current_pose.y - wp.y) < self.lookahead:
                self.target_index -= 1
            else:
                break
        target = wps[self.target_index]
        err = wrap_angle(
            math.atan2(target.y - current_pose.y, target.x - current_pose.x)
            - current_pose.theta
        )
        omega = max(-self.params.omega_max, min(self.params.omega_max, self.params.steer_gain * err))
        v = self.params.v_max * max(0.0, 1.0 - abs(err) / (math.pi / 2.0))
        return VelocityCommand(v, omega)


def repeat_path(record: PathRecord, current_pose: Pose2D, params: GapParams,
                follower: Optional[RepeatFollower] = None):
    """One-shot form of RepeatFollower for callers without loop state."""
    if follower is None:
        follower = RepeatFollower(record, params)
    return follower.command(current_pose)
