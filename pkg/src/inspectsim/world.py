"""Static environment model: wall geometry, lights, labeled regions.

All intersection predicates use exact rational arithmetic so grazing
contacts (a path through a shared wall endpoint, a ray along a wall face)
behave deterministically. Endpoint contact counts as an intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


class ScenarioError(ValueError):
    """Schema or invariant violation in a scenario document.

    `path` points into the offending part of the document.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class WallSegment:
    a: tuple[float, float]
    b: tuple[float, float]
    radio_attenuation: float = 0.0  # dB per crossing
    opaque: bool = True


@dataclass(frozen=True)
class LightSource:
    position: tuple[float, float]
    power: float = 1.0
    enabled: bool = True


@dataclass(frozen=True)
class LabeledPolygon:
    label: str  # "indoor" | "outdoor"
    vertices: tuple[tuple[float, float], ...]

    def contains(self, x: float, y: float) -> bool:
        """Even-odd point-in-polygon test, boundary-inclusive enough for labeling."""
        inside = False
        n = len(self.vertices)
        for i in range(n):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % n]
            if (y1 > y) != (y2 > y):
                xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x < xi:
                    inside = not inside
        return inside


@dataclass(frozen=True)
class Hit:
    distance: float
    segment_index: int


@dataclass
class WorldModel:
    """Immutable after construction; safe for concurrent reads."""

    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    segments: list[WallSegment] = field(default_factory=list)
    lights: list[LightSource] = field(default_factory=list)
    regions: list[LabeledPolygon] = field(default_factory=list)

    def validate(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ScenarioError("world.bounds", "bounds must span a positive area")

        def in_bounds(p):
            return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax

        for i, seg in enumerate(self.segments):
            if seg.a == seg.b:
                raise ScenarioError(f"world.segments[{i}]", "degenerate segment")
            if not math.isfinite(seg.radio_attenuation) or seg.radio_attenuation < 0:
                raise ScenarioError(
                    f"world.segments[{i}]", "radio_attenuation must be finite and >= 0"
                )
            if not (in_bounds(seg.a) and in_bounds(seg.b)):
                raise ScenarioError(f"world.segments[{i}]", "endpoint outside bounds")
        for i, light in enumerate(self.lights):
            if light.power <= 0:
                raise ScenarioError(f"world.lights[{i}]", "power must be > 0")
            if not in_bounds(light.position):
                raise ScenarioError(f"world.lights[{i}]", "position outside bounds")
        for i, region in enumerate(self.regions):
            if region.label not in ("indoor", "outdoor"):
                raise ScenarioError(f"world.regions[{i}]", f"unknown label {region.label!r}")
            if len(region.vertices) < 3:
                raise ScenarioError(f"world.regions[{i}]", "polygon needs >= 3 vertices")
            for v in region.vertices:
                if not in_bounds(v):
                    raise ScenarioError(f"world.regions[{i}]", "vertex outside bounds")
            if _self_intersects(region.vertices):
                raise ScenarioError(f"world.regions[{i}]", "polygon self-intersects")


def _point(p) -> tuple[Fraction, Fraction]:
    return (Fraction(p[0]), Fraction(p[1]))


def _orient(a, b, c) -> int:
    """Sign of the cross product (b-a) x (c-a), computed exactly."""
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (v > 0) - (v < 0)


def _on_segment(a, b, p) -> bool:
    """p collinear with a-b assumed; is p within the closed bounding box."""
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(
        a[1], b[1]
    )


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Exact closed-segment intersection test (endpoints inclusive)."""
    p1, p2, q1, q2 = _point(p1), _point(p2), _point(q1), _point(q2)
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def raycast(
    world: WorldModel,
    origin: tuple[float, float],
    direction: tuple[float, float],
    max_range: float,
) -> Optional[Hit]:
    """Nearest intersection of a ray with an opaque segment.

    Ties at identical distance go to the lowest segment index. Returns None
    when nothing opaque lies within max_range.
    """
    ox, oy = origin
    dx, dy = direction
    best: Optional[Hit] = None
    for idx, seg in enumerate(world.segments):
        if not seg.opaque:
            continue
        ax, ay = seg.a
        bx, by = seg.b
        ex, ey = bx - ax, by - ay
        denom = dx * ey - dy * ex
        if denom == 0.0:
            continue  # parallel; collinear grazing yields no frontal hit
        # origin + t*dir == a + s*e
        t = ((ax - ox) * ey - (ay - oy) * ex) / denom
        s = ((ax - ox) * dy - (ay - oy) * dx) / denom
        if 0.0 <= s <= 1.0 and 0.0 <= t <= max_range:
            if best is None or t < best.distance:
                best = Hit(distance=t, segment_index=idx)
    return best


def walls_between(world: WorldModel, a: tuple[float, float], b: tuple[float, float]) -> float:
    """Total radio attenuation (dB) over every wall the open path a-b crosses.

    Endpoint grazes count; a crossing through the shared endpoint of two
    walls counts each wall once.
    """
    if a == b:
        raise ValueError("walls_between requires distinct endpoints")
    total = 0.0
    for seg in world.segments:
        if segments_intersect(a, b, seg.a, seg.b):
            total += seg.radio_attenuation
    return total


def _self_intersects(vertices) -> bool:
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # skip adjacent edges (share a vertex by construction)
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(*edges[i], *edges[j]):
                return True
    return False


def _parse_point(obj, path) -> tuple[float, float]:
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or not all(isinstance(v, (int, float)) for v in obj)
    ):
        raise ScenarioError(path, "expected a [x, y] pair of numbers")
    return (float(obj[0]), float(obj[1]))


def load_world(document: dict) -> WorldModel:
    """Build and validate a WorldModel from a parsed scenario document."""
    if "world" not in document:
        raise ScenarioError("world", "missing")
    w = document["world"]
    if "bounds" not in w:
        raise ScenarioError("world.bounds", "missing")
    b = w["bounds"]
    if not isinstance(b, (list, tuple)) or len(b) != 4:
        raise ScenarioError("world.bounds", "expected [xmin, ymin, xmax, ymax]")
    segments = []
    for i, s in enumerate(w.get("segments", [])):
        segments.append(
            WallSegment(
                a=_parse_point(s.get("a"), f"world.segments[{i}].a"),
                b=_parse_point(s.get("b"), f"world.segments[{i}].b"),
                radio_attenuation=float(s.get("radio_attenuation", 0.0)),
                opaque=bool(s.get("opaque", True)),
            )
        )
    lights = []
    for i, l in enumerate(w.get("lights", [])):
        lights.append(
            LightSource(
                position=_parse_point(l.get("position"), f"world.lights[{i}].position"),
                power=float(l.get("power", 1.0)),
                enabled=bool(l.get("enabled", True)),
            )
        )
    regions = []
    for i, r in enumerate(w.get("regions", [])):
        verts = tuple(
            _parse_point(v, f"world.regions[{i}].vertices[{j}]")
            for j, v in enumerate(r.get("vertices", []))
        )
        regions.append(LabeledPolygon(label=str(r.get("label", "")), vertices=verts))
    model = WorldModel(
        bounds=tuple(float(v) for v in b),
        segments=segments,
        lights=lights,
        regions=regions,
    )
    model.validate()
    return model
