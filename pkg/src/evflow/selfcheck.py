"""Built-in property suite behind the `selfcheck` subcommand.

Runs quick, seeded versions of the package's key correctness properties and
prints one line per check. Returns the number of failures so the CLI can map
any failure to a nonzero exit.
"""

from __future__ import annotations

import numpy as np

from . import formats
from .camera import CameraModel
from .core import DepthMap, EventStream, FlowField, Frame, PoseSample, Trajectory
from .errors import EvflowError
from .event_image import encode, slice_window
from .loss import CharbonnierParams, LossWeights, loss_gradient, total_loss
from .metrics import evaluate
from .motionfield import VelocitySample, motion_field
from .planefit import PlaneFitOptions, fit_plane, plane_to_flow, robust_fit
from .rotation import rotation_exp, rotation_log, skew, unskew
from .synth import OrbitParams, make_orbit, make_shift_pair
from .motionfield import GtFlowRequest, generate_gt_flow
from .variational import SolverOptions, estimate_flow

SEED = 20240501


def _random_flow(rng, w, h):
    # Fractional parts on a 0.05 lattice in [0.2, 0.8]: neighbor differences
    # are then 0 exactly or at least 0.05, keeping the finite-difference
    # comparison away from the charbonnier curvature spike near zero.
    grid = np.arange(0.2, 0.8001, 0.05)
    u = rng.integers(-1, 2, size=(h, w)) + rng.choice(grid, size=(h, w))
    v = rng.integers(-1, 2, size=(h, w)) + rng.choice(grid, size=(h, w))
    return FlowField(u, v, np.ones((h, w), dtype=bool))


def _fd_gradient(i0, i1, flow, cp, wt, h=1e-4):
    gu = np.zeros_like(flow.u)
    gv = np.zeros_like(flow.v)
    for comp, grad in (("u", gu), ("v", gv)):
        arr = getattr(flow, comp)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            hi = total_loss(i0, i1, flow, cp, wt).total
            arr[idx] = orig - h
            lo = total_loss(i0, i1, flow, cp, wt).total
            arr[idx] = orig
            grad[idx] = (hi - lo) / (2.0 * h)
    return gu, gv


def check_formats(rng) -> None:
    for _ in range(60):
        w, h = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        n = int(rng.integers(0, 12))
        t = np.sort(rng.integers(0, 1000, size=n))
        stream = EventStream(w, h, rng.integers(0, w, n), rng.integers(0, h, n),
                             t, rng.choice([-1, 1], n))
        again = formats.read_events(formats.write_events(stream), w, h)
        assert np.array_equal(again.t, stream.t) and np.array_equal(again.p, stream.p)

        frame = Frame(rng.integers(0, 256, size=(h, w)).astype(np.float64) / 255.0, 5)
        back = formats.read_frame_pgm(formats.write_frame_pgm(frame), 5)
        assert np.array_equal(back.pixels, frame.pixels)

        depth = DepthMap(np.where(rng.random((h, w)) < 0.2, np.nan,
                                  rng.random((h, w)) + 0.1).astype(np.float32), 7)
        back_d = formats.read_depth(formats.write_depth(depth))
        assert np.array_equal(back_d.depths, depth.depths, equal_nan=True)

        flow = FlowField(rng.standard_normal((h, w)).astype(np.float32).astype(float),
                         rng.standard_normal((h, w)).astype(np.float32).astype(float),
                         rng.random((h, w)) < 0.8)
        back_f = formats.read_flo(formats.write_flo(flow))
        assert np.array_equal(back_f.valid, flow.valid)
        assert np.array_equal(back_f.u[flow.valid], flow.u[flow.valid])
    for corrupt in (b"", b"PIEX" + b"\0" * 20, b"P6\n1 1\n255\n\0", b"EVDEPTA 1 1 0\n" + b"\0" * 4):
        for reader in (formats.read_flo, lambda b: formats.read_frame_pgm(b),
                       formats.read_depth):
            try:
                reader(corrupt)
                raise AssertionError("corrupt input was accepted")
            except EvflowError:
                pass


def check_event_images(rng) -> None:
    for _ in range(30):
        w, h, n = 8, 6, int(rng.integers(1, 40))
        t = np.sort(rng.integers(0, 1000, size=n))
        stream = EventStream(w, h, rng.integers(0, w, n), rng.integers(0, h, n),
                             t, rng.choice([-1, 1], n))
        window = slice_window(stream, 0, 1000)
        image = encode(window)
        assert image.count_pos.sum() + image.count_neg.sum() == len(window)
        perm = rng.permutation(len(window))
        shuffled = EventStream.from_events(
            w, h, sorted((stream.event(i) for i in perm), key=lambda e: e.t))
        image2 = encode(slice_window(shuffled, 0, 1000))
        assert np.array_equal(image.ts_pos, image2.ts_pos)
        assert np.array_equal(image.count_neg, image2.count_neg)


def check_gradient(rng) -> None:
    cp, wt = CharbonnierParams(), LossWeights()
    for _ in range(3):
        i0 = Frame(rng.random((6, 6)))
        i1 = Frame(rng.random((6, 6)))
        flow = _random_flow(rng, 6, 6)
        gu, gv = loss_gradient(i0, i1, flow, cp, wt)
        fu, fv = _fd_gradient(i0, i1, flow, cp, wt)
        for a, f in ((gu, fu), (gv, fv)):
            rel = np.abs(a - f) / np.maximum(np.abs(f), 1e-8)
            assert rel.max() < 1e-3, f"gradient mismatch {rel.max():.2e}"


def check_planefit(rng) -> None:
    opts = PlaneFitOptions()
    x = rng.uniform(0, 10, 30)
    y = rng.uniform(0, 10, 30)
    t = 0.1 * x + 0.2 * y + 0.05
    a, b, c = fit_plane(np.column_stack([x, y, t]))
    assert abs(a - 0.1) < 1e-12 and abs(b - 0.2) < 1e-12 and abs(c - 0.05) < 1e-12
    dirty = np.column_stack([x, y, t])
    dirty[:4, 2] += 10 * opts.outlier_threshold
    fit = robust_fit(dirty, opts)
    assert fit is not None and abs(fit[0] - 0.1) < 1e-9 and abs(fit[1] - 0.2) < 1e-9
    assert fit[3].shape[0] >= opts.min_inliers
    assert plane_to_flow(0.0005, 0.0, opts) is None
    uv = plane_to_flow(0.1, 0.2, opts)
    assert uv is not None and abs(uv[0] - 2.0) < 1e-12 and abs(uv[1] - 4.0) < 1e-12


def check_rotation(rng) -> None:
    for _ in range(200):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        omega = axis * rng.uniform(0, np.pi - 0.1)
        r = rotation_exp(omega)
        assert np.max(np.abs(rotation_log(r) - omega)) < 1e-10
        assert np.max(np.abs(unskew(skew(omega)) - omega)) == 0.0


def check_motionfield(rng) -> None:
    cam = CameraModel(100.0, 100.0, 15.5, 15.5)
    depth = DepthMap(np.full((32, 32), 2.0, dtype=np.float32))
    v1 = VelocitySample(0, rng.standard_normal(3) * 0.1, rng.standard_normal(3) * 0.1)
    v2 = VelocitySample(0, rng.standard_normal(3) * 0.1, rng.standard_normal(3) * 0.1)
    both = VelocitySample(0, v1.v + v2.v, v1.omega + v2.omega)
    x1, y1, _ = motion_field(v1, depth, cam)
    x2, y2, _ = motion_field(v2, depth, cam)
    xs, ys, _ = motion_field(both, depth, cam)
    assert np.max(np.abs(xs - (x1 + x2))) < 1e-12
    assert np.max(np.abs(ys - (y1 + y2))) < 1e-12

    params = OrbitParams(size=32, k1=0.0)
    trajectory, depth_o, cam_o, gt = make_orbit(params)
    approx = generate_gt_flow(GtFlowRequest(params.t0, params.t1, trajectory, depth_o, cam_o))
    aee = np.hypot(approx.u - gt.u, approx.v - gt.v)[approx.valid & gt.valid].mean()
    assert aee < 1e-3, f"orbit AEE {aee:.2e}"


def check_metrics(rng) -> None:
    for _ in range(20):
        w, h = 7, 5
        gt = FlowField(rng.standard_normal((h, w)) * 4, rng.standard_normal((h, w)) * 4,
                       rng.random((h, w)) < 0.9)
        pred = FlowField(rng.standard_normal((h, w)) * 4, rng.standard_normal((h, w)) * 4,
                         rng.random((h, w)) < 0.9)
        mask = rng.random((h, w)) < 0.8
        if not np.any(mask & gt.valid & pred.valid):
            continue
        report = evaluate(pred, gt, mask)
        total = 0.0
        count = 0
        outliers = 0
        for r in range(h):
            for c in range(w):
                if mask[r, c] and gt.valid[r, c] and pred.valid[r, c]:
                    ee = np.hypot(pred.u[r, c] - gt.u[r, c], pred.v[r, c] - gt.v[r, c])
                    mag = np.hypot(gt.u[r, c], gt.v[r, c])
                    total += ee
                    count += 1
                    outliers += bool(ee > 3.0 and ee > 0.05 * mag)
        assert abs(report.aee - total / count) <= 1e-12 * max(1.0, abs(report.aee))
        assert report.evaluated_pixel_count == count
        assert abs(report.outlier_pct - 100.0 * outliers / count) < 1e-12


def check_variational(rng) -> None:
    frame0, frame1, gt = make_shift_pair(size=32, dx=1.0, dy=0.5, seed=11)
    flow = estimate_flow(frame0, frame1, SolverOptions(levels=3, iterations_per_level=150))
    inner = np.zeros((32, 32), dtype=bool)
    inner[3:-3, 3:-3] = True
    aee = np.hypot(flow.u - gt.u, flow.v - gt.v)[inner].mean()
    assert aee < 0.3, f"variational AEE {aee:.3f}"


CHECKS = (
    ("formats-roundtrip", check_formats),
    ("event-image-properties", check_event_images),
    ("loss-gradient-fd", check_gradient),
    ("planefit-recovery", check_planefit),
    ("rotation-roundtrip", check_rotation),
    ("motionfield-oracles", check_motionfield),
    ("metrics-bruteforce", check_metrics),
    ("variational-recovery", check_variational),
)


def run(out) -> int:
    failures = 0
    for name, fn in CHECKS:
        rng = np.random.default_rng(SEED)
        try:
            fn(rng)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            failures += 1
            print(f"FAIL {name}: {exc}", file=out)
        else:
            print(f"ok   {name}", file=out)
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed", file=out)
    return failures
