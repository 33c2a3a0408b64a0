"""Top-down raster rendering of annotated maps and trajectories."""

from __future__ import annotations

from typing import Optional

from PIL import Image, ImageDraw

from .mapping import AnnotatedMap

BACKGROUND = (20, 20, 24)
POINT_GRAY = (160, 160, 160)
LEVEL_COLORS = {
    "red": (220, 40, 40),
    "orange": (240, 140, 20),
    "yellow": (230, 210, 40),
}
# trajectory colors follow the field-report map conventions
TRAJECTORY_COLORS = {"hd2": (70, 120, 240), "warthog": (240, 140, 20)}
FALLBACK_TRAJECTORY = (90, 200, 120)


def trajectories_from_log(log: list[dict]) -> dict[str, list[tuple[float, float]]]:
    """Per-robot estimated-pose tracks (map frame) from pose records."""
    tracks: dict[str, list[tuple[float, float]]] = {}
    for rec in log:
        if rec.get("kind") == "pose" and rec.get("est_x") is not None:
            tracks.setdefault(rec["robot"], []).append((rec["est_x"], rec["est_y"]))
    return tracks


def render_map(
    map_: AnnotatedMap,
    trajectories: Optional[dict[str, list[tuple[float, float]]]] = None,
    scale: float = 20.0,  # px per meter
    margin: float = 2.0,  # m
    extent: Optional[tuple[float, float, float, float]] = None,
) -> Image.Image:
    """Draw map points (gray), radiation annotations (red/orange/yellow),
    and trajectory overlays onto a raster image. y grows upward."""
    pts = map_.points
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    for track in (trajectories or {}).values():
        xs.extend(p[0] for p in track)
        ys.extend(p[1] for p in track)
    if extent is not None:
        xmin, ymin, xmax, ymax = extent
    elif xs:
        xmin, xmax = min(xs) - margin, max(xs) + margin
        ymin, ymax = min(ys) - margin, max(ys) + margin
    else:
        xmin, ymin, xmax, ymax = -margin, -margin, margin, margin
    width = max(1, int(round((xmax - xmin) * scale)))
    height = max(1, int(round((ymax - ymin) * scale)))
    image = Image.new("RGB", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(image)

    def to_px(x: float, y: float) -> tuple[int, int]:
        return (int((x - xmin) * scale), int((ymax - y) * scale))

    for name, track in sorted((trajectories or {}).items()):
        if len(track) < 2:
            continue
        color = TRAJECTORY_COLORS.get(name, FALLBACK_TRAJECTORY)
        draw.line([to_px(x, y) for x, y in track], fill=color, width=2)
    for i, (x, y) in enumerate(pts):
        ann = map_.annotations.get(i)
        color = POINT_GRAY if ann is None else LEVEL_COLORS[ann.level]
        px, py = to_px(x, y)
        r = 1 if ann is None else 2
        draw.ellipse([px - r, py - r, px + r, py + r], fill=color)
    return image
