"""Command-line interface.

Subcommands: encode, loss, estimate-var, estimate-planefit, gtflow, eval,
synth, selfcheck. Exit codes: 0 success, 1 usage error, 2 data/format error.
Diagnostics go to stderr; machine-readable output is JSON lines on stdout or
the files named by each subcommand.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import selfcheck as selfcheck_mod
from .camera import dump_camera_json, load_camera_json
from .core import FlowField
from .errors import DataError, EvflowError
from .event_image import (encode, event_image_to_pgm_channels, event_mask,
                          slice_window, write_event_image_raw, CHANNEL_NAMES)
from .formats import (read_events, read_flo, read_frame_pgm, read_depth,
                      read_trajectory, write_events, write_flo,
                      write_frame_index, write_frame_pgm)
from .loss import CharbonnierParams, LossWeights, total_loss
from .metrics import evaluate
from .motionfield import GtFlowOptions, GtFlowRequest, generate_gt_flow
from .planefit import PlaneFitOptions, estimate_sparse_flow
from .synth import OrbitParams, make_edge_sweep, make_orbit, make_shift_pair
from .variational import LevelTrace, SolverOptions, estimate_flow
from .core import Frame


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _default_threads() -> int:
    env = os.environ.get("EVFLOW_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _load_frame(path: str) -> Frame:
    return read_frame_pgm(_read(path))


def _char_params(args) -> CharbonnierParams:
    return CharbonnierParams(alpha=args.alpha, epsilon=args.epsilon)


def _add_loss_flags(parser):
    parser.add_argument("--alpha", type=float, default=0.45,
                        help="charbonnier exponent (default 0.45)")
    parser.add_argument("--epsilon", type=float, default=1e-3,
                        help="charbonnier epsilon (default 1e-3)")
    parser.add_argument("--smooth-weight", type=float, default=0.5,
                        help="smoothness weight (default 0.5)")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_encode(args) -> int:
    stream = read_events(_read(args.events), args.width, args.height)
    if len(stream) == 0 and (args.t_start is None or args.t_end is None):
        raise DataError("empty stream: pass --t-start and --t-end explicitly")
    t_start = args.t_start if args.t_start is not None else int(stream.t[0])
    t_end = args.t_end if args.t_end is not None else int(stream.t[-1]) + 1
    window = slice_window(stream, t_start, t_end)
    image = encode(window)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    channels = event_image_to_pgm_channels(image)
    for name in CHANNEL_NAMES:
        frame = Frame(channels[name].astype(np.float64) / 255.0, t_start)
        Path(f"{prefix}.{name}.pgm").write_bytes(write_frame_pgm(frame))
    Path(f"{prefix}.evimg").write_bytes(write_event_image_raw(image, t_start, t_end))
    print(json.dumps({"events": len(window), "t_start": t_start, "t_end": t_end}))
    return 0


def _cmd_loss(args) -> int:
    i0 = _load_frame(args.frame0)
    i1 = _load_frame(args.frame1)
    flow = read_flo(_read(args.flow))
    breakdown = total_loss(i0, i1, flow, _char_params(args),
                           LossWeights(args.smooth_weight), normalize=args.normalize)
    print(json.dumps(breakdown.as_dict()))
    return 0


def _cmd_estimate_var(args) -> int:
    i0 = _load_frame(args.frame0)
    i1 = _load_frame(args.frame1)
    opts = SolverOptions(levels=args.levels,
                         iterations_per_level=args.iterations,
                         step_init=args.step_init,
                         step_decay=args.step_decay,
                         convergence_tol=args.tol,
                         char_params=_char_params(args),
                         weights=LossWeights(args.smooth_weight))
    traces: list[LevelTrace] = []
    flow = estimate_flow(i0, i1, opts, traces)
    for trace in traces:
        print(json.dumps(trace.as_dict()), file=sys.stderr)
    Path(args.out).write_bytes(write_flo(flow))
    return 0


def _cmd_estimate_planefit(args) -> int:
    stream = read_events(_read(args.events), args.width, args.height)
    opts = PlaneFitOptions(spatial_radius=args.radius,
                           temporal_window=args.temporal_window,
                           vanish_threshold=args.vanish_threshold,
                           outlier_threshold=args.outlier_threshold,
                           max_refit_iterations=args.max_refits,
                           min_inliers=args.min_inliers,
                           same_polarity=args.same_polarity)
    estimates = estimate_sparse_flow(stream, opts, threads=args.threads)
    lines = [f"{e.t},{e.x},{e.y},{float(e.u)!r},{float(e.v)!r},{e.inlier_count}"
             for e in estimates]
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")
    fraction = len(estimates) / len(stream) if len(stream) else 0.0
    print(json.dumps({"events": len(stream), "estimates": len(estimates),
                      "valid_fraction": fraction}), file=sys.stderr)
    return 0


def _cmd_gtflow(args) -> int:
    trajectory = read_trajectory(_read(args.poses))
    depth = read_depth(_read(args.depth))
    cam = load_camera_json(_read(args.camera))
    request = GtFlowRequest(args.t0, args.t1, trajectory, depth, cam)
    options = GtFlowOptions(convention=args.convention,
                            depth_tolerance=args.depth_tolerance,
                            smooth_half_width=args.smooth_halfwidth)
    flow = generate_gt_flow(request, options)
    Path(args.out).write_bytes(write_flo(flow))
    print(json.dumps({"valid_pixels": int(flow.valid.sum()),
                      "pixels": flow.valid.size}), file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    pred = read_flo(_read(args.pred))
    gt = read_flo(_read(args.gt))
    mask = None
    if args.events is not None:
        stream = read_events(_read(args.events), pred.width, pred.height)
        if len(stream) == 0:
            raise DataError("event file for masking holds no events")
        window = slice_window(stream, int(stream.t[0]), int(stream.t[-1]) + 1)
        mask = event_mask(window)
    report = evaluate(pred, gt, mask)
    print(json.dumps(report.as_dict()))
    return 0


def _write_shift(args, out: Path) -> None:
    frame0, frame1, gt = make_shift_pair(args.size, args.dx, args.dy, args.seed)
    (out / "frame0.pgm").write_bytes(write_frame_pgm(frame0))
    (out / "frame1.pgm").write_bytes(write_frame_pgm(frame1))
    (out / "frames.csv").write_bytes(write_frame_index(
        [(frame0.timestamp, "frame0.pgm"), (frame1.timestamp, "frame1.pgm")]))
    (out / "gt.flo").write_bytes(write_flo(gt))


def _write_edge_sweep(args, out: Path) -> None:
    stream, truth = make_edge_sweep(args.width, args.height, args.speed)
    (out / "events.csv").write_bytes(write_events(stream))
    lines = [f"{t},{x},{y},{u!r},{v!r}" for t, x, y, u, v in truth]
    (out / "truth.csv").write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_orbit(args, out: Path) -> None:
    params = OrbitParams(size=args.size, z0=args.z0, omega=args.omega,
                         radius=args.radius, vz=args.vz,
                         k1=args.k1, k2=args.k2, p1=args.p1, p2=args.p2, k3=args.k3,
                         t0=args.t0, t1=args.t1)
    trajectory, depth, cam, gt = make_orbit(params)
    from .formats import write_depth, write_trajectory
    (out / "poses.csv").write_bytes(write_trajectory(trajectory))
    (out / "depth.evdepth").write_bytes(write_depth(depth))
    (out / "camera.json").write_text(dump_camera_json(cam), encoding="ascii")
    (out / "gt.flo").write_bytes(write_flo(gt))
    meta = {"t0": params.t0, "t1": params.t1, "size": params.size,
            "omega": params.omega, "radius": params.radius, "vz": params.vz,
            "z0": params.z0}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="ascii")


def _cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.case == "shift":
        _write_shift(args, out)
    elif args.case == "edge-sweep":
        _write_edge_sweep(args, out)
    else:
        _write_orbit(args, out)
    return 0


def _cmd_selfcheck(args) -> int:
    failures = selfcheck_mod.run(sys.stdout)
    return 0 if failures == 0 else 2


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="evflow",
                     description="Event-camera optical flow toolkit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("encode", parents=[], help="encode an event window into 4-channel images")
    p.add_argument("events", help="event CSV (t,x,y,p)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--t-start", type=int, default=None, help="window start, microseconds")
    p.add_argument("--t-end", type=int, default=None, help="window end, microseconds (exclusive)")
    p.add_argument("--out-prefix", required=True,
                   help="writes <prefix>.<channel>.pgm previews plus <prefix>.evimg raw channels")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("loss", help="evaluate the self-supervised loss of a flow field")
    p.add_argument("frame0")
    p.add_argument("frame1")
    p.add_argument("flow", help=".flo flow field")
    _add_loss_flags(p)
    p.add_argument("--normalize", action="store_true",
                   help="report per-pixel / per-pair means instead of sums")
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("estimate-var",
                       help="coarse-to-fine variational flow between two frames")
    p.add_argument("frame0")
    p.add_argument("frame1")
    p.add_argument("-o", "--out", required=True, help="output .flo path")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--iterations", type=int, default=200, help="iterations per level")
    p.add_argument("--step-init", type=float, default=1.0)
    p.add_argument("--step-decay", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-6, help="relative loss decrease stop")
    _add_loss_flags(p)
    p.set_defaults(func=_cmd_estimate_var)

    p = sub.add_parser("estimate-planefit", help="events-only sparse flow by local plane fitting")
    p.add_argument("events", help="event CSV (t,x,y,p)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("-o", "--out", required=True, help="output CSV: t,x,y,u,v,inliers")
    p.add_argument("--radius", type=int, default=2, help="spatial radius (2 = 5x5 window)")
    p.add_argument("--temporal-window", type=int, default=50_000, help="microseconds")
    p.add_argument("--vanish-threshold", type=float, default=1e-3, help="seconds/pixel")
    p.add_argument("--outlier-threshold", type=float, default=1e-2, help="seconds")
    p.add_argument("--max-refits", type=int, default=10)
    p.add_argument("--min-inliers", type=int, default=8)
    p.add_argument("--same-polarity", action="store_true")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker thread cap (default: EVFLOW_THREADS or 1)")
    p.set_defaults(func=_cmd_estimate_planefit)

    p = sub.add_parser("gtflow", help="ground-truth flow from poses, depth and camera")
    p.add_argument("--poses", required=True, help="pose CSV")
    p.add_argument("--depth", required=True, help="EVDEPTH depth map at t0")
    p.add_argument("--camera", required=True, help="camera JSON (9 calibration scalars)")
    p.add_argument("--t0", type=int, required=True)
    p.add_argument("--t1", type=int, required=True)
    p.add_argument("-o", "--out", required=True, help="output .flo path")
    p.add_argument("--convention", choices=["standard", "paper_literal"], default="standard")
    p.add_argument("--smooth-halfwidth", type=int, default=0,
                   help="velocity moving-average half width over adjacent windows")
    p.add_argument("--depth-tolerance", type=int, default=10_000,
                   help="max |depth timestamp - t0|, microseconds")
    p.set_defaults(func=_cmd_gtflow)

    p = sub.add_parser("eval", help="score predicted flow against ground truth")
    p.add_argument("pred", help="predicted .flo")
    p.add_argument("gt", help="ground-truth .flo")
    p.add_argument("--events", default=None,
                   help="event CSV; restricts scoring to pixels with events")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate deterministic synthetic fixtures")
    p.add_argument("--case", choices=["shift", "edge-sweep", "orbit"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=64, help="shift/orbit image size")
    p.add_argument("--dx", type=float, default=3.0, help="shift: x displacement")
    p.add_argument("--dy", type=float, default=2.0, help="shift: y displacement")
    p.add_argument("--width", type=int, default=64, help="edge-sweep sensor width")
    p.add_argument("--height", type=int, default=32, help="edge-sweep sensor height")
    p.add_argument("--speed", type=float, default=20.0, help="edge-sweep speed, px/s")
    p.add_argument("--z0", type=float, default=2.0, help="orbit plane depth, m")
    p.add_argument("--omega", type=float, default=0.5, help="orbit yaw rate, rad/s")
    p.add_argument("--radius", type=float, default=0.5, help="orbit radius, m")
    p.add_argument("--vz", type=float, default=0.2, help="orbit z drift, m/s")
    p.add_argument("--k1", type=float, default=0.0)
    p.add_argument("--k2", type=float, default=0.0)
    p.add_argument("--p1", type=float, default=0.0)
    p.add_argument("--p2", type=float, default=0.0)
    p.add_argument("--k3", type=float, default=0.0)
    p.add_argument("--t0", type=int, default=400_000, help="orbit window start")
    p.add_argument("--t1", type=int, default=500_000, help="orbit window end")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("selfcheck", help="run the built-in property suite")
    p.set_defaults(func=_cmd_selfcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except EvflowError as exc:
        print(f"evflow: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"evflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
