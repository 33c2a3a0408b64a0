"""Point-to-point ICP registration and operator-guess relocalization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Transform2D, wrap_angle
from .mapping import AnnotatedMap, PointCloud

DEFAULT_MAX_ITERATIONS = 50
DEFAULT_MAX_CORRESPONDENCE = 1.0
DEFAULT_TRIM_RATIO = 0.9
DEFAULT_CONV_TRANSLATION = 1e-4
DEFAULT_CONV_ROTATION = 1e-4


class InsufficientOverlapError(RuntimeError):
    """Fewer than 3 correspondences survived an ICP iteration."""


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    max_correspondence_dist: float = DEFAULT_MAX_CORRESPONDENCE
    trim_ratio: float = DEFAULT_TRIM_RATIO
    convergence_translation: float = DEFAULT_CONV_TRANSLATION
    convergence_rotation: float = DEFAULT_CONV_ROTATION

    def __post_init__(self):
        if min(
            self.max_iterations,
            self.max_correspondence_dist,
            self.trim_ratio,
            self.convergence_translation,
            self.convergence_rotation,
        ) <= 0 or self.trim_ratio > 1.0:
            raise ValueError("ICP parameters must be positive, trim_ratio in (0, 1]")


@dataclass(frozen=True)
class IcpResult:
    transform: Transform2D
    mean_residual: float
    converged: bool
    iterations: int
    residual_history: tuple[float, ...] = ()


def _best_rigid(src: np.ndarray, dst: np.ndarray) -> Transform2D:
    """Closed-form least-squares rigid transform mapping src onto dst."""
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    s = src - sc
    d = dst - dc
    num = float(np.sum(s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0]))
    den = float(np.sum(s[:, 0] * d[:, 0] + s[:, 1] * d[:, 1]))
    theta = math.atan2(num, den)
    c, si = math.cos(theta), math.sin(theta)
    tx = dc[0] - (c * sc[0] - si * sc[1])
    ty = dc[1] - (si * sc[0] + c * sc[1])
    return Transform2D(tx, ty, theta)


def icp_register(
    source: PointCloud,
    target: PointCloud,
    initial: Transform2D = Transform2D(),
    params: IcpParams = IcpParams(),
    target_tree: Optional[cKDTree] = None,
) -> IcpResult:
    """Trimmed point-to-point ICP with a closed-form per-iteration solve.

    Correspondences beyond max_correspondence_dist are dropped, then the
    best trim_ratio fraction by distance is kept (ties by source index).
    Raises InsufficientOverlapError when fewer than 3 correspondences
    survive. A prebuilt KD-tree over target may be passed to amortize
    repeated registrations against the same cloud.
    """
    if len(source) < 3 or len(target) < 3:
        raise ValueError("source and target need at least 3 points")
    tree = target_tree if target_tree is not None else cKDTree(target.points)
    n_target = len(target)
    transform = initial
    residuals: list[float] = []
    converged = False
    iterations = 0
    mean_residual = math.inf
    for iterations in range(1, params.max_iterations + 1):
        moved = source.transformed(transform).points
        dist, idx = tree.query(moved, distance_upper_bound=params.max_correspondence_dist)
        valid = np.flatnonzero(idx < n_target)
        if len(valid) < 3:
            raise InsufficientOverlapError(
                f"only {len(valid)} correspondences within "
                f"{params.max_correspondence_dist} m"
            )
        order = valid[np.lexsort((valid, dist[valid]))]
        keep = max(3, int(math.ceil(params.trim_ratio * len(order))))
        kept = order[:keep]
        delta = _best_rigid(moved[kept], target.points[idx[kept]])
        transform = delta.compose(transform)
        after = source.transformed(transform).points[kept]
        mean_residual = float(
            np.mean(np.linalg.norm(after - target.points[idx[kept]], axis=1))
        )
        residuals.append(mean_residual)
        if (
            math.hypot(delta.x, delta.y) < params.convergence_translation
            and abs(wrap_angle(delta.theta)) < params.convergence_rotation
        ):
            converged = True
            break
    return IcpResult(
        transform=transform,
        mean_residual=mean_residual,
        converged=converged,
        iterations=iterations,
        residual_history=tuple(residuals),
    )


@dataclass(frozen=True)
class RelocalizeParams:
    grid_extent: float = 1.0  # +/- meters around the guess
    grid_steps: int = 3  # per axis
    heading_count: int = 8  # starts spaced 2*pi / heading_count
    accept_residual: float = 0.15
    min_inlier_fraction: float = 0.8
    inlier_radius: float = 0.3  # a scan point is explained if map is this close
    max_correction: float = 5.0  # accepted pose must stay near the guess
    icp: IcpParams = field(default_factory=IcpParams)
    # final refinement of the winning candidate: the tight correspondence cap
    # rejects non-overlap clutter, and the higher trim keeps the sparse points
    # on orthogonal structure that pin down the along-wall direction
    polish: IcpParams = field(
        default_factory=lambda: IcpParams(
            max_iterations=100,
            max_correspondence_dist=0.3,
            trim_ratio=0.95,
            convergence_translation=1e-5,
            convergence_rotation=1e-5,
        )
    )


@dataclass(frozen=True)
class RelocalizeResult:
    success: bool
    transform: Optional[Transform2D]
    residual: float  # best mean residual found, success or not
    inlier_fraction: float


def _inlier_fraction(
    tree: cKDTree, n_target: int, cloud: PointCloud, transform: Transform2D, max_dist: float
) -> float:
    moved = cloud.transformed(transform).points
    _, idx = tree.query(moved, distance_upper_bound=max_dist)
    return float(np.count_nonzero(idx < n_target)) / len(moved)


def relocalize(
    map_: AnnotatedMap,
    scan_cloud: PointCloud,
    coarse_guess: Transform2D,
    search: RelocalizeParams = RelocalizeParams(),
) -> RelocalizeResult:
    """Grid of ICP starts around an operator's approximate pose guess.

    Candidates are ranked by inlier fraction first and trimmed residual
    second: in sparse scenes (a long featureless wall) an aliased pose can
    edge out the true one on residual alone because the trim discards the
    few distinctive points that disagree, while the inlier count still
    drops for every point left unexplained. The winner is refined by a
    final tight-correspondence pass, then accepted only when the residual
    and inlier gates pass and the pose stays within max_correction of the
    operator's guess (a wildly corrected pose means ICP slid along
    repeated structure rather than locking onto the guessed spot).
    Otherwise the result reports failure with the best score so the
    operator can retry with a better guess.
    """
    if len(map_) == 0:
        raise ValueError("cannot relocalize in an empty map")
    if len(scan_cloud) < 3:
        raise ValueError("scan needs at least 3 hit points")
    target = map_.cloud()
    tree = cKDTree(target.points)
    offsets = np.linspace(-search.grid_extent, search.grid_extent, search.grid_steps)
    headings = [2.0 * math.pi * k / search.heading_count for k in range(search.heading_count)]
    best: Optional[IcpResult] = None
    best_inliers = 0.0
    for dx in offsets:
        for dy in offsets:
            for dth in headings:
                start = Transform2D(
                    coarse_guess.x + dx, coarse_guess.y + dy, coarse_guess.theta + dth
                )
                try:
                    result = icp_register(
                        scan_cloud, target, start, search.icp, target_tree=tree
                    )
                except InsufficientOverlapError:
                    continue
                inliers = _inlier_fraction(
                    tree, len(target), scan_cloud, result.transform,
                    search.inlier_radius,
                )
                if best is None or (inliers, -result.mean_residual) > (
                    best_inliers, -best.mean_residual
                ):
                    best = result
                    best_inliers = inliers
    if best is None:
        return RelocalizeResult(False, None, math.inf, 0.0)
    try:
        polished = icp_register(
            scan_cloud, target, best.transform, search.polish, target_tree=tree
        )
        best = polished
        best_inliers = _inlier_fraction(
            tree, len(target), scan_cloud, best.transform, search.inlier_radius
        )
    except InsufficientOverlapError:
        pass  # keep the unpolished candidate; the gates below decide
    correction = math.hypot(
        best.transform.x - coarse_guess.x, best.transform.y - coarse_guess.y
    )
    if (
        best.mean_residual < search.accept_residual
        and best_inliers > search.min_inlier_fraction
        and correction <= search.max_correction
    ):
        return RelocalizeResult(True, best.transform, best.mean_residual, best_inliers)
    return RelocalizeResult(False, None, best.mean_residual, best_inliers)
