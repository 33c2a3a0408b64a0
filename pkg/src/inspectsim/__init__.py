"""Deterministic two-robot inspection-mission simulator.

Outdoor mapping by a large platform, wireless map hand-off over a mesh
radio model, operator-guided relocalization of a smaller indoor platform,
assisted teleoperation, and light-proxy radiation detection projected
onto a unified global point-cloud map.
"""

from .geometry import Pose2D, Transform2D
from .mapping import AnnotatedMap, PointCloud, RadiationAnnotation
from .world import WorldModel, load_world

__all__ = [
    "AnnotatedMap",
    "PointCloud",
    "Pose2D",
    "RadiationAnnotation",
    "Transform2D",
    "WorldModel",
    "load_world",
]

__version__ = "0.1.0"
