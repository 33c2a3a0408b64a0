"""Point clouds, the voxel-deduplicated annotated map, and its export formats."""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from .geometry import Transform2D

DEFAULT_MAP_VOXEL = 0.10
DEFAULT_SCAN_VOXEL = 0.05

RadiationLevel = Literal["red", "orange", "yellow"]
LEVEL_CODES = {"red": 1, "orange": 2, "yellow": 3}
LEVEL_NAMES = {v: k for k, v in LEVEL_CODES.items()}

MAP_MAGIC = b"ISMP"
MAP_VERSION = 1
# per-point record: x, y float32 | descriptor uint8 | level uint8 | distance u16 (1/256 m)
POINT_STRUCT = struct.Struct("<ffBBH")
DISTANCE_SCALE = 256.0


@dataclass(frozen=True)
class RadiationAnnotation:
    level: RadiationLevel
    observation_distance: float  # camera-to-point distance at observation, m
    observed_at: float  # sim seconds


def closer_observation_wins(
    old: Optional[RadiationAnnotation], new: RadiationAnnotation
) -> RadiationAnnotation:
    """Refinement rule: smallest observation distance wins, earlier tie-break."""
    if old is None:
        return new
    if new.observation_distance < old.observation_distance:
        return new
    return old


def strongest_level_wins(
    old: Optional[RadiationAnnotation], new: RadiationAnnotation
) -> RadiationAnnotation:
    """Safety-conservative alternative: keep the most severe level."""
    if old is None:
        return new
    if LEVEL_CODES[new.level] < LEVEL_CODES[old.level]:
        return new
    if LEVEL_CODES[new.level] == LEVEL_CODES[old.level]:
        return closer_observation_wins(old, new)
    return old


@dataclass
class PointCloud:
    points: np.ndarray  # (N, 2) float64
    descriptors: Optional[np.ndarray] = None  # (N,) grayscale units
    frame_id: str = "unknown"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.descriptors is not None:
            self.descriptors = np.asarray(self.descriptors, dtype=float).reshape(-1)
            if len(self.descriptors) != len(self.points):
                raise ValueError("descriptor length must match point count")

    def __len__(self) -> int:
        return len(self.points)

    def transformed(self, transform: Transform2D) -> "PointCloud":
        c, s = math.cos(transform.theta), math.sin(transform.theta)
        rot = np.array([[c, -s], [s, c]])
        pts = self.points @ rot.T + np.array([transform.x, transform.y])
        return PointCloud(points=pts, descriptors=self.descriptors, frame_id=self.frame_id)


def voxel_key(x: float, y: float, voxel: float) -> tuple[int, int]:
    return (math.floor(x / voxel), math.floor(y / voxel))


def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """Keep the first point per voxel cell, in point order (deterministic)."""
    seen: set[tuple[int, int]] = set()
    keep = []
    for i, (x, y) in enumerate(cloud.points):
        key = voxel_key(x, y, voxel)
        if key not in seen:
            seen.add(key)
            keep.append(i)
    idx = np.array(keep, dtype=int)
    return PointCloud(
        points=cloud.points[idx],
        descriptors=None if cloud.descriptors is None else cloud.descriptors[idx],
        frame_id=cloud.frame_id,
    )


class AnnotatedMap:
    """Accumulate-only voxel map with per-point descriptors and annotations.

    Points are never moved or retired; one point per voxel cell. Single
    writer (the owning robot's step or the base station merge); readers
    take value snapshots.
    """

    def __init__(self, voxel: float = DEFAULT_MAP_VOXEL, origin_frame: str = "map"):
        self.voxel = voxel
        self.origin_frame = origin_frame
        self._xs: list[float] = []
        self._ys: list[float] = []
        self._descriptors: list[float] = []
        self._cells: dict[tuple[int, int], int] = {}
        self.annotations: dict[int, RadiationAnnotation] = {}
        self._array_cache: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._xs)

    @property
    def points(self) -> np.ndarray:
        if self._array_cache is None or len(self._array_cache) != len(self._xs):
            self._array_cache = np.column_stack(
                [np.array(self._xs, dtype=float), np.array(self._ys, dtype=float)]
            ) if self._xs else np.empty((0, 2))
        return self._array_cache

    @property
    def descriptors(self) -> np.ndarray:
        return np.array(self._descriptors, dtype=float)

    def cell_of(self, index: int) -> tuple[int, int]:
        return voxel_key(self._xs[index], self._ys[index], self.voxel)

    def index_at(self, x: float, y: float) -> Optional[int]:
        return self._cells.get(voxel_key(x, y, self.voxel))

    def insert(self, x: float, y: float, descriptor: float = 0.0) -> int:
        """Insert a point; returns the index of the occupying point (new or prior)."""
        key = voxel_key(x, y, self.voxel)
        existing = self._cells.get(key)
        if existing is not None:
            return existing
        idx = len(self._xs)
        self._xs.append(float(x))
        self._ys.append(float(y))
        self._descriptors.append(float(descriptor))
        self._cells[key] = idx
        self._array_cache = None
        return idx

    def cloud(self) -> PointCloud:
        return PointCloud(
            points=self.points.copy(),
            descriptors=self.descriptors,
            frame_id=self.origin_frame,
        )

    def annotate(self, index: int, annotation: RadiationAnnotation, rule=closer_observation_wins):
        if not (0 <= index < len(self._xs)):
            raise IndexError(f"annotation for missing point {index}")
        self.annotations[index] = rule(self.annotations.get(index), annotation)

    def copy(self) -> "AnnotatedMap":
        out = AnnotatedMap(voxel=self.voxel, origin_frame=self.origin_frame)
        out._xs = list(self._xs)
        out._ys = list(self._ys)
        out._descriptors = list(self._descriptors)
        out._cells = dict(self._cells)
        out.annotations = dict(self.annotations)
        return out


def update_map(map_: AnnotatedMap, scan_cloud: PointCloud, pose: Transform2D) -> AnnotatedMap:
    """Insert a scan (expressed in `pose`'s frame) into the map.

    Existing points and annotations are untouched; descriptors carry through.
    """
    moved = scan_cloud.transformed(pose)
    desc = moved.descriptors
    for i, (x, y) in enumerate(moved.points):
        map_.insert(x, y, 0.0 if desc is None else desc[i])
    return map_


def merge_maps(
    global_map: AnnotatedMap,
    incoming: AnnotatedMap,
    incoming_to_global: Transform2D,
    rule=closer_observation_wins,
) -> AnnotatedMap:
    """Fold another robot's map (and its annotations) into the global map."""
    cloud = incoming.cloud()
    moved = cloud.transformed(incoming_to_global)
    desc = moved.descriptors
    for i, (x, y) in enumerate(moved.points):
        idx = global_map.insert(x, y, 0.0 if desc is None else desc[i])
        ann = incoming.annotations.get(i)
        if ann is not None:
            global_map.annotate(idx, ann, rule=rule)
    return global_map


def export_map(map_: AnnotatedMap) -> bytes:
    """Versioned little-endian binary export; 12 bytes per point after the header."""
    buf = io.BytesIO()
    frame = map_.origin_frame.encode("utf-8")
    buf.write(MAP_MAGIC)
    buf.write(struct.pack("<HfH", MAP_VERSION, map_.voxel, len(frame)))
    buf.write(frame)
    buf.write(struct.pack("<I", len(map_)))
    for i in range(len(map_)):
        ann = map_.annotations.get(i)
        level = 0 if ann is None else LEVEL_CODES[ann.level]
        dist = 0 if ann is None else min(int(round(ann.observation_distance * DISTANCE_SCALE)), 0xFFFF)
        desc = min(max(int(round(map_._descriptors[i])), 0), 255)
        buf.write(POINT_STRUCT.pack(map_._xs[i], map_._ys[i], desc, level, dist))
    return buf.getvalue()


def import_map(data: bytes) -> AnnotatedMap:
    buf = io.BytesIO(data)
    magic = buf.read(4)
    if magic != MAP_MAGIC:
        raise ValueError("not a map export (bad magic)")
    version, voxel, frame_len = struct.unpack("<HfH", buf.read(8))
    if version != MAP_VERSION:
        raise ValueError(f"unsupported map export version {version}")
    frame = buf.read(frame_len).decode("utf-8")
    (count,) = struct.unpack("<I", buf.read(4))
    out = AnnotatedMap(voxel=voxel, origin_frame=frame)
    for _ in range(count):
        x, y, desc, level, dist = POINT_STRUCT.unpack(buf.read(POINT_STRUCT.size))
        idx = out.insert(x, y, float(desc))
        if level != 0:
            out.annotations[idx] = RadiationAnnotation(
                level=LEVEL_NAMES[level],
                observation_distance=dist / DISTANCE_SCALE,
                observed_at=0.0,
            )
    return out


def export_map_text(map_: AnnotatedMap) -> str:
    """Plain-text debug export, one point per line."""
    lines = [f"# inspectsim map v{MAP_VERSION} voxel={map_.voxel} frame={map_.origin_frame}"]
    for i in range(len(map_)):
        ann = map_.annotations.get(i)
        level = "-" if ann is None else ann.level
        dist = 0.0 if ann is None else ann.observation_distance
        lines.append(
            f"{map_._xs[i]:.4f} {map_._ys[i]:.4f} {map_._descriptors[i]:.1f} {level} {dist:.3f}"
        )
    return "\n".join(lines) + "\n"
