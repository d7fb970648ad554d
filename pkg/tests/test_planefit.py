"""Local plane fitting: neighborhood collection, robust fit, flow inversion."""

import numpy as np
import pytest

from evflow import (DataError, Event, EventStream, PlaneFitOptions,
                    collect_neighborhood, estimate_sparse_flow, fit_plane,
                    make_edge_sweep, plane_to_flow, robust_fit)

OPTS = PlaneFitOptions()


def lattice_points(a=0.1, b=0.2, c=0.05, size=5):
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    t = a * xx + b * yy + c
    return np.column_stack([xx.ravel(), yy.ravel(), t.ravel()])


class TestCollectNeighborhood:
    def test_spatial_window_limit(self):
        # radius 2 -> at most the 25 pixels of a 5x5 window contribute
        n = 200
        rng = np.random.default_rng(3)
        stream = EventStream(20, 20, rng.integers(0, 20, n), rng.integers(0, 20, n),
                             np.sort(rng.integers(0, 100, n)), np.ones(n, dtype=int))
        center = stream.event(n // 2)
        pts = collect_neighborhood(stream, center, OPTS)
        pixels = {(int(px), int(py)) for px, py, _ in pts}
        assert len(pixels) <= 25
        assert all(abs(px - center.x) <= 2 and abs(py - center.y) <= 2 for px, py in pixels)

    def test_temporal_window_excludes(self):
        stream = EventStream(8, 8, [1, 1, 1], [1, 1, 1], [0, 100_000, 200_000], [1, 1, 1])
        pts = collect_neighborhood(stream, Event(1, 1, 100_000, 1), OPTS)
        assert pts.shape[0] == 3  # +-50 ms window includes both ends exactly
        pts = collect_neighborhood(stream, Event(1, 1, 0, 1), OPTS)
        assert pts.shape[0] == 2

    def test_lone_center(self):
        stream = EventStream(8, 8, [3], [4], [10], [1])
        pts = collect_neighborhood(stream, stream.event(0), OPTS)
        assert pts.tolist() == [[3.0, 4.0, 0.0]]

    def test_timestamps_relative_seconds(self):
        stream = EventStream(8, 8, [1, 1], [1, 1], [0, 30_000], [1, 1])
        pts = collect_neighborhood(stream, stream.event(1), OPTS)
        assert sorted(p[2] for p in pts) == [-0.03, 0.0]

    def test_same_polarity_filter(self):
        stream = EventStream(8, 8, [1, 1, 1], [1, 1, 1], [0, 1, 2], [1, -1, 1])
        opts = PlaneFitOptions(same_polarity=True)
        assert collect_neighborhood(stream, Event(1, 1, 1, -1), opts).shape[0] == 1


class TestFitPlane:
    def test_exact_plane_recovery(self):
        a, b, c = fit_plane(lattice_points())
        assert abs(a - 0.1) < 1e-12 and abs(b - 0.2) < 1e-12 and abs(c - 0.05) < 1e-12

    def test_single_pixel_degenerate(self):
        pts = np.column_stack([np.full(6, 2.0), np.full(6, 3.0), np.arange(6.0)])
        with pytest.raises(DataError, match="degenerate|collinear"):
            fit_plane(pts)

    def test_collinear_degenerate(self):
        pts = np.column_stack([np.arange(5.0), np.arange(5.0) * 2 + 1, np.ones(5)])
        with pytest.raises(DataError):
            fit_plane(pts)

    def test_three_points_interpolate(self):
        pts = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 2.0], [0.0, 1.0, 3.0]])
        a, b, c = fit_plane(pts)
        residual = pts[:, 2] - (a * pts[:, 0] + b * pts[:, 1] + c)
        assert np.max(np.abs(residual)) < 1e-12

    def test_too_few_points(self):
        with pytest.raises(DataError, match="3 points"):
            fit_plane(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))

    def test_global_minimum_property(self, rng):
        for _ in range(20):
            pts = np.column_stack([rng.uniform(0, 5, 15), rng.uniform(0, 5, 15),
                                   rng.standard_normal(15)])
            if np.linalg.matrix_rank(np.column_stack([pts[:, 0], pts[:, 1], np.ones(15)])) < 3:
                continue
            a, b, c = fit_plane(pts)
            best = np.sum((pts[:, 2] - a * pts[:, 0] - b * pts[:, 1] - c) ** 2)
            for da, db, dc in ((1e-3, 0, 0), (-1e-3, 0, 0), (0, 1e-3, 0),
                               (0, -1e-3, 0), (0, 0, 1e-3), (0, 0, -1e-3)):
                perturbed = np.sum((pts[:, 2] - (a + da) * pts[:, 0]
                                    - (b + db) * pts[:, 1] - (c + dc)) ** 2)
                assert perturbed >= best - 1e-15

    def test_translation_invariance(self, rng):
        pts = np.column_stack([rng.uniform(0, 5, 20), rng.uniform(0, 5, 20),
                               rng.standard_normal(20) * 0.01])
        a0, b0, c0 = fit_plane(pts)
        shifted = pts.copy()
        shifted[:, 2] += 7.5
        a1, b1, c1 = fit_plane(shifted)
        assert abs(a1 - a0) < 1e-9 and abs(b1 - b0) < 1e-9
        assert abs((c1 - c0) - 7.5) < 1e-9


class TestRobustFit:
    def test_clean_points_no_removals(self):
        pts = lattice_points()
        fit = robust_fit(pts, OPTS)
        assert fit is not None
        a, b, c, inliers = fit
        exact = fit_plane(pts)
        assert (a, b, c) == exact
        assert inliers.shape[0] == pts.shape[0]

    def test_contaminated_recovery(self, rng):
        pts = lattice_points(size=5)  # 25 points
        dirty = pts.copy()
        dirty[:3, 2] += 10 * OPTS.outlier_threshold
        fit = robust_fit(dirty, OPTS)
        assert fit is not None
        a, b, c, inliers = fit
        assert abs(a - 0.1) < 1e-9 and abs(b - 0.2) < 1e-9 and abs(c - 0.05) < 1e-9
        # surviving inliers all sit on the true plane
        residual = inliers[:, 2] - (a * inliers[:, 0] + b * inliers[:, 1] + c)
        assert np.max(np.abs(residual)) <= OPTS.outlier_threshold

    def test_inlier_floor_rejects(self):
        pts = lattice_points()[:5]
        assert robust_fit(pts, OPTS) is None

    def test_idempotent_on_own_inliers(self, rng):
        pts = lattice_points()
        pts[:, 2] += rng.standard_normal(pts.shape[0]) * 1e-3
        fit = robust_fit(pts, OPTS)
        assert fit is not None
        a, b, c, inliers = fit
        a2, b2, c2 = fit_plane(inliers)
        assert abs(a2 - a) < 1e-12 and abs(b2 - b) < 1e-12 and abs(c2 - c) < 1e-12


class TestPlaneToFlow:
    def test_inverse_gradient(self):
        assert plane_to_flow(0.1, 0.2, OPTS) == pytest.approx((2.0, 4.0), rel=1e-12)

    def test_vanishing_gradient_invalid(self):
        assert plane_to_flow(0.0, 0.0, OPTS) is None

    def test_slow_gradient_fast_flow(self):
        assert plane_to_flow(0.01, 0.0, OPTS) == pytest.approx((100.0, 0.0), rel=1e-12)

    def test_threshold_rule_exact(self):
        assert plane_to_flow(1e-3, 0.0, OPTS) is not None          # |g| == th3
        assert plane_to_flow(np.nextafter(1e-3, 0), 0.0, OPTS) is None

    def test_direction_and_magnitude_identities(self, rng):
        for _ in range(30):
            a, b = rng.standard_normal(2) * 0.1
            uv = plane_to_flow(a, b, OPTS)
            if uv is None:
                continue
            u, v = uv
            assert abs(u * b - v * a) < 1e-12 * max(1.0, abs(u * b))
            assert np.hypot(u, v) == pytest.approx(1.0 / np.hypot(a, b), rel=1e-12)


class TestEstimateSparseFlow:
    def test_edge_sweep_recovery(self):
        stream, _ = make_edge_sweep(width=40, height=16, speed=20.0)
        estimates = estimate_sparse_flow(stream, OPTS)
        assert len(estimates) > 0.3 * len(stream)
        u = np.array([e.u for e in estimates])
        v = np.array([e.v for e in estimates])
        assert abs(np.median(u) - 20.0) < 1.0  # within 5%
        assert abs(np.median(v)) < 1.0
        assert all(e.inlier_count >= OPTS.min_inliers for e in estimates)

    def test_random_times_mostly_rejected(self, rng):
        n = 3000
        stream = EventStream(24, 24, rng.integers(0, 24, n), rng.integers(0, 24, n),
                             np.sort(rng.integers(0, 1_000_000, n)),
                             rng.choice([-1, 1], n))
        estimates = estimate_sparse_flow(stream, OPTS)
        assert len(estimates) < 0.1 * n

    def test_empty_stream(self):
        stream = EventStream(4, 4, [], [], [], [])
        assert estimate_sparse_flow(stream, OPTS) == []

    def test_output_order_and_threading(self):
        stream, _ = make_edge_sweep(width=24, height=12, speed=20.0)
        serial = estimate_sparse_flow(stream, OPTS, threads=1)
        threaded = estimate_sparse_flow(stream, OPTS, threads=3)
        assert serial == threaded
        ts = [e.t for e in serial]
        assert ts == sorted(ts)
