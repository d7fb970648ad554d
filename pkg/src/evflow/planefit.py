"""Events-only sparse flow via robust local plane fitting.

Each event's spatio-temporal neighborhood is modeled as a plane
t = a*x + b*y + c (t in seconds, x/y in pixels) refined by iterative outlier
rejection; flow is the inverse gradient (a, b) / (a^2 + b^2) in pixels per
second. Thresholds are interpreted in seconds: the vanishing-gradient
threshold in seconds/pixel and the outlier distance in seconds.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Event, EventStream
from .errors import DataError

MICROS = 1e-6


@dataclass(frozen=True)
class PlaneFitOptions:
    spatial_radius: int = 2            # 2 -> 5x5 window
    temporal_window: int = 50_000      # microseconds each side of the event
    vanish_threshold: float = 1e-3     # seconds/pixel
    outlier_threshold: float = 1e-2    # seconds
    max_refit_iterations: int = 10
    min_inliers: int = 8
    same_polarity: bool = False        # restrict neighborhoods to the center polarity

    def __post_init__(self):
        if self.spatial_radius < 1 or self.temporal_window < 1:
            raise DataError("neighborhood extents must be positive")
        if self.vanish_threshold <= 0 or self.outlier_threshold <= 0:
            raise DataError("thresholds must be positive")
        if self.max_refit_iterations < 1 or self.min_inliers < 3:
            raise DataError("need at least one fit iteration and 3 inliers")


@dataclass(frozen=True)
class SparseFlowEstimate:
    x: int
    y: int
    t: int
    u: float          # pixels/second
    v: float          # pixels/second
    inlier_count: int


def collect_neighborhood(stream: EventStream, center: Event,
                         opts: PlaneFitOptions = PlaneFitOptions()) -> np.ndarray:
    """Points (x, y, t_seconds) near the center event, t relative to it."""
    lo = int(np.searchsorted(stream.t, center.t - opts.temporal_window, side="left"))
    hi = int(np.searchsorted(stream.t, center.t + opts.temporal_window, side="right"))
    x = stream.x[lo:hi]
    y = stream.y[lo:hi]
    keep = (np.abs(x - center.x) <= opts.spatial_radius) & \
           (np.abs(y - center.y) <= opts.spatial_radius)
    if opts.same_polarity:
        keep &= stream.p[lo:hi] == center.p
    ts = (stream.t[lo:hi][keep] - center.t).astype(np.float64) * MICROS
    return np.column_stack([x[keep].astype(np.float64), y[keep].astype(np.float64), ts])


def fit_plane(points: np.ndarray) -> tuple[float, float, float]:
    """Least-squares plane t = a*x + b*y + c through (x, y, t) points.

    Coordinates are centered internally for conditioning; the intercept is
    shifted back. Raises DataError for fewer than 3 points or an (x, y)
    configuration that does not span a plane.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DataError("points must be an (n, 3) array")
    if pts.shape[0] < 3:
        raise DataError("plane fit needs at least 3 points")
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    xm, ym = x.mean(), y.mean()
    a_mat = np.column_stack([x - xm, y - ym, np.ones_like(x)])
    if np.linalg.matrix_rank(a_mat) < 3:
        raise DataError("degenerate neighborhood: (x, y) points are collinear")
    (a, b, c0), *_ = np.linalg.lstsq(a_mat, t, rcond=None)
    return float(a), float(b), float(c0 - a * xm - b * ym)


def robust_fit(points: np.ndarray, opts: PlaneFitOptions = PlaneFitOptions()
               ) -> tuple[float, float, float, np.ndarray] | None:
    """fit_plane with iterative outlier rejection.

    Points farther than the outlier threshold from the current plane are
    dropped and the plane refit, until no removals or the iteration cap.
    Returns (a, b, c, inlier_points) or None when fewer than min_inliers
    survive or the configuration is degenerate.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < opts.min_inliers:
        return None
    try:
        plane = fit_plane(pts)
    except DataError:
        return None
    for _ in range(opts.max_refit_iterations):
        a, b, c = plane
        residual = pts[:, 2] - (a * pts[:, 0] + b * pts[:, 1] + c)
        outliers = np.abs(residual) > opts.outlier_threshold
        if not outliers.any():
            break
        pts = pts[~outliers]
        if pts.shape[0] < opts.min_inliers:
            return None
        try:
            plane = fit_plane(pts)
        except DataError:
            return None
    return plane[0], plane[1], plane[2], pts


def plane_to_flow(a: float, b: float,
                  opts: PlaneFitOptions = PlaneFitOptions()) -> tuple[float, float] | None:
    """Invert the plane gradient into pixels/second flow.

    Returns None when the gradient magnitude falls below the vanishing
    threshold (flow undefined or too fast to resolve).
    """
    g2 = a * a + b * b
    if np.sqrt(g2) < opts.vanish_threshold:
        return None
    return a / g2, b / g2


def _estimate_range(stream: EventStream, opts: PlaneFitOptions,
                    lo: int, hi: int) -> list[SparseFlowEstimate]:
    out: list[SparseFlowEstimate] = []
    for i in range(lo, hi):
        center = stream.event(i)
        pts = collect_neighborhood(stream, center, opts)
        fit = robust_fit(pts, opts)
        if fit is None:
            continue
        a, b, _, inliers = fit
        uv = plane_to_flow(a, b, opts)
        if uv is None:
            continue
        out.append(SparseFlowEstimate(center.x, center.y, center.t,
                                      uv[0], uv[1], int(inliers.shape[0])))
    return out


def estimate_sparse_flow(stream: EventStream,
                         opts: PlaneFitOptions = PlaneFitOptions(),
                         threads: int = 1) -> list[SparseFlowEstimate]:
    """One plane-fit attempt per event; rejected events are omitted.

    Output keeps input event order regardless of the thread count.
    """
    n = len(stream)
    if n == 0:
        return []
    threads = max(1, int(threads))
    if threads == 1:
        return _estimate_range(stream, opts, 0, n)
    bounds = np.linspace(0, n, threads * 4 + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        chunks = pool.map(lambda se: _estimate_range(stream, opts, se[0], se[1]),
                          zip(bounds[:-1], bounds[1:]))
    return [est for chunk in chunks for est in chunk]
