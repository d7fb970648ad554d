"""Ground-truth optical flow from camera poses and depth maps.

Velocities come from finite pose differences under a linear-motion
assumption: v as the translation difference over dt and omega through the
rotation logarithm of the relative rotation. Poses are world-from-camera;
omega is therefore already a body (camera-frame) rate, and the world-frame
v is rotated into the camera frame at t0 before the interaction matrix is
applied. The per-pixel motion field is scaled by the time window and pushed
through the lens distortion so the result lives on the distorted pixel grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .core import DepthMap, FlowField, Trajectory
from .errors import DataError
from .rotation import rotation_exp, rotation_log

MICROS = 1e-6
CONVENTIONS = ("standard", "paper_literal")


@dataclass
class VelocitySample:
    timestamp: int
    v: np.ndarray       # meters/second
    omega: np.ndarray   # radians/second

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        self.omega = np.asarray(self.omega, dtype=np.float64)
        if self.v.shape != (3,) or self.omega.shape != (3,):
            raise DataError("velocity components must be 3-vectors")
        if not (np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.omega))):
            raise DataError("velocity components must be finite")


@dataclass
class GtFlowRequest:
    t0: int
    t1: int
    trajectory: Trajectory
    depth: DepthMap
    camera: CameraModel

    def __post_init__(self):
        if self.t0 >= self.t1:
            raise DataError("ground-truth request needs t0 < t1")


@dataclass(frozen=True)
class GtFlowOptions:
    convention: str = "standard"
    depth_tolerance: int = 10_000          # |depth timestamp - t0| bound, microseconds
    smooth_half_width: int = 0             # 0 disables velocity smoothing
    undistort_max_iterations: int = 50
    undistort_tol: float = 1e-10

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise DataError(f"convention must be one of {CONVENTIONS}")
        if self.depth_tolerance < 0 or self.smooth_half_width < 0:
            raise DataError("tolerances must be non-negative")


def interpolate_pose(trajectory: Trajectory, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Pose (R, p) at time t: linear in translation, spherical-linear in
    rotation between the bracketing samples."""
    if len(trajectory) == 0:
        raise DataError("empty trajectory")
    ts = trajectory.timestamps
    if t < ts[0] or t > ts[-1]:
        raise DataError(f"time {t} outside trajectory span [{ts[0]}, {ts[-1]}]")
    i = int(np.searchsorted(ts, t, side="left"))
    if ts[i] == t:
        s = trajectory.samples[i]
        return s.rotation.copy(), s.translation.copy()
    a, b = trajectory.samples[i - 1], trajectory.samples[i]
    s = (t - a.timestamp) / (b.timestamp - a.timestamp)
    p = a.translation + s * (b.translation - a.translation)
    r = a.rotation @ rotation_exp(s * rotation_log(a.rotation.T @ b.rotation))
    return r, p


def differentiate_pose(trajectory: Trajectory, t0: int, t1: int) -> VelocitySample:
    """Finite-difference velocity over [t0, t1] under linear motion.

    v is the raw translation difference over dt (the trajectory frame);
    omega is the body rate from the rotation log of the relative rotation.
    """
    if t0 >= t1:
        raise DataError("differentiate_pose needs t0 < t1")
    r0, p0 = interpolate_pose(trajectory, t0)
    r1, p1 = interpolate_pose(trajectory, t1)
    dt = (t1 - t0) * MICROS
    return VelocitySample(t0, (p1 - p0) / dt, rotation_log(r0.T @ r1) / dt)


def smooth_velocities(samples: list[VelocitySample], half_width: int) -> list[VelocitySample]:
    """Central moving average over [i - h, i + h], truncated at the ends.

    Assumes uniformly spaced samples; timestamps pass through unchanged.
    """
    if half_width < 0:
        raise DataError("half_width must be >= 0")
    if half_width == 0 or not samples:
        return list(samples)
    vs = np.stack([s.v for s in samples])
    ws = np.stack([s.omega for s in samples])
    out = []
    n = len(samples)
    for i in range(n):
        lo, hi = max(0, i - half_width), min(n, i + half_width + 1)
        out.append(VelocitySample(samples[i].timestamp,
                                  vs[lo:hi].mean(axis=0), ws[lo:hi].mean(axis=0)))
    return out


def windowed_pair_velocity(trajectory: Trajectory, t0: int, t1: int,
                           half_width: int) -> VelocitySample:
    """Velocity for [t0, t1] averaged over the 2*half_width neighboring
    windows of the same length, dropping windows outside the trajectory span.
    """
    if half_width == 0:
        return differentiate_pose(trajectory, t0, t1)
    ts = trajectory.timestamps
    dt = t1 - t0
    samples = []
    center = None
    for k in range(-half_width, half_width + 1):
        a, b = t0 + k * dt, t1 + k * dt
        if a < ts[0] or b > ts[-1]:
            continue
        sample = differentiate_pose(trajectory, a, b)
        samples.append(sample)
        if k == 0:
            center = len(samples) - 1
    if center is None:
        raise DataError("the [t0, t1] window itself lies outside the trajectory")
    smoothed = smooth_velocities(samples, half_width)[center]
    return VelocitySample(t0, smoothed.v, smoothed.omega)


def _interaction(x, y, z, v, omega, convention):
    """Normalized-coordinate velocity of the 2x6 interaction matrix.

    `standard` uses +x/Z in the first row's third entry (consistent with the
    second row); `paper_literal` keeps the printed -x/Z.
    """
    vx, vy, vz = v
    wx, wy, wz = omega
    sx = 1.0 if convention == "standard" else -1.0
    xdot = (-vx + sx * x * vz) / z + x * y * wx - (1.0 + x * x) * wy + y * wz
    ydot = (-vy + y * vz) / z + (1.0 + y * y) * wx - x * y * wy - x * wz
    return xdot, ydot


def motion_field(vel: VelocitySample, depth: DepthMap, cam: CameraModel,
                 convention: str = "standard") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel (xdot, ydot) in normalized coordinates/second on the depth
    grid, plus the valid-depth mask. Invalid pixels are zeroed."""
    if convention not in CONVENTIONS:
        raise DataError(f"convention must be one of {CONVENTIONS}")
    cols = np.arange(depth.width, dtype=np.float64)
    rows = np.arange(depth.height, dtype=np.float64)
    x = (cols[None, :] - cam.cx) / cam.fx
    y = (rows[:, None] - cam.cy) / cam.fy
    z = depth.depths.astype(np.float64)
    valid = np.isfinite(z) & (z > 0.0)
    zsafe = np.where(valid, z, 1.0)
    xdot, ydot = _interaction(x, y, zsafe, vel.v, vel.omega, convention)
    return np.where(valid, xdot, 0.0), np.where(valid, ydot, 0.0), valid


def generate_gt_flow(request: GtFlowRequest,
                     options: GtFlowOptions = GtFlowOptions()) -> FlowField:
    """Ground-truth displacement on the distorted pixel grid.

    Every distorted source pixel is undistorted, displaced by the motion
    field scaled with the time window, and re-distorted; the flow is the
    distorted destination minus the source. Pixels are invalid where depth is
    missing, the undistortion did not converge, or the depth lookup left the
    grid.
    """
    depth = request.depth
    cam = request.camera
    if abs(depth.timestamp - request.t0) > options.depth_tolerance:
        raise DataError(
            f"depth timestamp {depth.timestamp} farther than {options.depth_tolerance} "
            f"microseconds from t0 = {request.t0}")
    vel = windowed_pair_velocity(request.trajectory, request.t0, request.t1,
                                 options.smooth_half_width)
    r0, _ = interpolate_pose(request.trajectory, request.t0)
    v_cam = r0.T @ vel.v
    omega = vel.omega
    dt = (request.t1 - request.t0) * MICROS

    rows, cols = np.mgrid[0:depth.height, 0:depth.width].astype(np.float64)
    xd = (cols - cam.cx) / cam.fx
    yd = (rows - cam.cy) / cam.fy
    xu, yu, converged = cam.undistort(
        xd, yd, options.undistort_max_iterations, options.undistort_tol)

    # Depth lookup at the nearest undistorted grid pixel.
    up_col = np.rint(xu * cam.fx + cam.cx).astype(np.int64)
    up_row = np.rint(yu * cam.fy + cam.cy).astype(np.int64)
    in_grid = (up_col >= 0) & (up_col < depth.width) & (up_row >= 0) & (up_row < depth.height)
    up_col = np.clip(up_col, 0, depth.width - 1)
    up_row = np.clip(up_row, 0, depth.height - 1)
    z = depth.depths.astype(np.float64)[up_row, up_col]
    depth_ok = np.isfinite(z) & (z > 0.0)
    valid = converged & in_grid & depth_ok

    zsafe = np.where(valid, z, 1.0)
    xdot, ydot = _interaction(xu, yu, zsafe, v_cam, omega, options.convention)
    dest_xd, dest_yd = cam.distort(xu + xdot * dt, yu + ydot * dt)
    u = (dest_xd * cam.fx + cam.cx) - cols
    v = (dest_yd * cam.fy + cam.cy) - rows
    valid &= np.isfinite(u) & np.isfinite(v)
    return FlowField(np.where(valid, u, 0.0), np.where(valid, v, 0.0), valid)
