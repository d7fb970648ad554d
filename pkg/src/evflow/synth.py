"""Deterministic synthetic fixtures for self-contained evaluation.

Three cases:

* shift       a band-limited random texture pair related by a known global
              shift, with the constant ground-truth flow
* edge-sweep  events of a vertical edge crossing the sensor at constant
              speed, with the analytic per-event flow
* orbit       a constant-rate circular camera trajectory over a
              fronto-parallel plane, with the analytic ground-truth flow

The orbit flow oracle undistorts with a Newton iteration on the closed-form
distortion Jacobian, a different algorithm than the fixed-point scheme used
by the estimation pipeline, so the two paths check each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraModel
from .core import DepthMap, EventStream, FlowField, Frame, PoseSample, Trajectory
from .errors import DataError

MICROS = 1e-6


# ---------------------------------------------------------------------------
# shift case


def _texture(rng: np.random.Generator, components: int = 8,
             min_wavelength: float = 18.0, max_wavelength: float = 44.0):
    """Analytic band-limited texture: a sum of oriented sinusoids mapped into
    (0, 1). Returns f(x, y) accepting arrays."""
    angles = rng.uniform(0.0, 2.0 * np.pi, size=components)
    wavelengths = rng.uniform(min_wavelength, max_wavelength, size=components)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=components)
    amplitudes = rng.uniform(0.5, 1.0, size=components)
    scale = 0.47 / amplitudes.sum()

    def f(x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        acc = np.zeros(np.broadcast(x, y).shape)
        for ang, lam, phi, amp in zip(angles, wavelengths, phases, amplitudes):
            acc = acc + amp * np.sin(
                2.0 * np.pi * (x * np.cos(ang) + y * np.sin(ang)) / lam + phi)
        return 0.5 + scale * acc

    return f


def make_shift_pair(size: int = 64, dx: float = 3.0, dy: float = 2.0,
                    seed: int = 0) -> tuple[Frame, Frame, FlowField]:
    """Texture pair where frame1 content at (x, y) appears at (x+dx, y+dy) in
    frame2, plus the constant ground-truth flow (dx, dy).

    Both frames are quantized to the 8-bit lattice so PGM serialization is
    lossless.
    """
    if size < 2:
        raise DataError("shift fixture needs size >= 2")
    rng = np.random.default_rng(seed)
    f = _texture(rng)
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    quantize = lambda a: np.rint(a * 255.0) / 255.0
    frame0 = Frame(quantize(f(cols, rows)), timestamp=0)
    frame1 = Frame(quantize(f(cols - dx, rows - dy)), timestamp=1_000_000)
    return frame0, frame1, FlowField.constant(size, size, dx, dy)


# ---------------------------------------------------------------------------
# edge-sweep case


def make_edge_sweep(width: int = 64, height: int = 32, speed: float = 20.0
                    ) -> tuple[EventStream, list[tuple[int, int, int, float, float]]]:
    """A vertical edge crossing the sensor left to right at `speed` px/s,
    firing one positive event per pixel crossing.

    Returns the stream and the analytic truth rows (t, x, y, u, v) with
    u = speed and v = 0.
    """
    if speed <= 0:
        raise DataError("edge speed must be positive")
    xs, ys, ts = [], [], []
    truth = []
    for col in range(width):
        t = int(round(col / speed / MICROS))
        for row in range(height):
            xs.append(col)
            ys.append(row)
            ts.append(t)
            truth.append((t, col, row, float(speed), 0.0))
    stream = EventStream(width, height,
                         np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64),
                         np.array(ts, dtype=np.int64), np.ones(len(xs), dtype=np.int64))
    return stream, truth


# ---------------------------------------------------------------------------
# orbit case


@dataclass(frozen=True)
class OrbitParams:
    size: int = 64
    focal: float = 128.0
    z0: float = 2.0              # plane depth, meters
    omega: float = 0.5           # yaw rate, radians/second
    radius: float = 0.5          # orbit radius, meters
    vz: float = 0.2              # linear drift along z, meters/second
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0
    t0: int = 400_000
    t1: int = 500_000
    pose_interval: int = 10_000  # trajectory sampling step, microseconds
    span: int = 1_000_000        # trajectory length, microseconds

    def __post_init__(self):
        if self.size < 2 or self.focal <= 0 or self.z0 <= 0:
            raise DataError("orbit fixture needs size >= 2, positive focal and depth")
        if not (0 <= self.t0 < self.t1 <= self.span):
            raise DataError("orbit fixture needs 0 <= t0 < t1 <= span")
        if self.pose_interval < 1 or self.t0 % self.pose_interval or self.t1 % self.pose_interval:
            raise DataError("t0 and t1 must fall on the pose sampling grid")


def _orbit_camera(params: OrbitParams) -> CameraModel:
    center = (params.size - 1) / 2.0
    return CameraModel(params.focal, params.focal, center, center,
                       params.k1, params.k2, params.p1, params.p2, params.k3)


def _newton_undistort(cam: CameraModel, xd, yd, iterations: int = 30, tol: float = 1e-12):
    """Oracle undistortion: vectorized Newton steps on the closed-form
    distortion Jacobian."""
    x = np.array(xd, dtype=np.float64, copy=True)
    y = np.array(yd, dtype=np.float64, copy=True)
    k1, k2, k3, p1, p2 = cam.k1, cam.k2, cam.k3, cam.p1, cam.p2
    for _ in range(iterations):
        r2 = x * x + y * y
        s = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        sp = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2)
        fu = x * s + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x) - xd
        fv = y * s + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y - yd
        jxx = s + 2.0 * x * x * sp + 2.0 * p1 * y + 6.0 * p2 * x
        jyy = s + 2.0 * y * y * sp + 6.0 * p1 * y + 2.0 * p2 * x
        jxy = 2.0 * x * y * sp + 2.0 * p1 * x + 2.0 * p2 * y
        det = jxx * jyy - jxy * jxy
        step_x = (jyy * fu - jxy * fv) / det
        step_y = (jxx * fv - jxy * fu) / det
        x -= step_x
        y -= step_y
        if max(np.max(np.abs(step_x)), np.max(np.abs(step_y))) <= tol:
            break
    return x, y


def _orbit_pose(params: OrbitParams, t: int) -> tuple[np.ndarray, np.ndarray]:
    ts = t * MICROS
    phi = params.omega * ts
    p = np.array([params.radius * np.cos(phi), params.radius * np.sin(phi), params.vz * ts])
    q = np.array([0.0, 0.0, np.sin(phi / 2.0), np.cos(phi / 2.0)])
    return p, q


def _orbit_analytic_flow(params: OrbitParams, cam: CameraModel) -> FlowField:
    dt = (params.t1 - params.t0) * MICROS
    phi0 = params.omega * params.t0 * MICROS
    p0, _ = _orbit_pose(params, params.t0)
    p1, _ = _orbit_pose(params, params.t1)
    v_world = (p1 - p0) / dt
    rz0 = np.array([[np.cos(phi0), -np.sin(phi0), 0.0],
                    [np.sin(phi0), np.cos(phi0), 0.0],
                    [0.0, 0.0, 1.0]])
    vx, vy, vz = rz0.T @ v_world
    w = params.omega

    rows, cols = np.mgrid[0:params.size, 0:params.size].astype(np.float64)
    xd = (cols - cam.cx) / cam.fx
    yd = (rows - cam.cy) / cam.fy
    xu, yu = _newton_undistort(cam, xd, yd)
    xdot = (-vx + xu * vz) / params.z0 + yu * w
    ydot = (-vy + yu * vz) / params.z0 - xu * w
    dest_x, dest_y = cam.distort(xu + xdot * dt, yu + ydot * dt)
    u = (dest_x * cam.fx + cam.cx) - cols
    v = (dest_y * cam.fy + cam.cy) - rows
    return FlowField(u, v, np.ones_like(u, dtype=bool))


def make_orbit(params: OrbitParams = OrbitParams()
               ) -> tuple[Trajectory, DepthMap, CameraModel, FlowField]:
    """Trajectory, fronto-parallel depth at t0, camera, and the analytic
    ground-truth flow for [t0, t1]."""
    cam = _orbit_camera(params)
    samples = []
    for t in range(0, params.span + 1, params.pose_interval):
        p, q = _orbit_pose(params, t)
        samples.append(PoseSample.from_quaternion(t, p, q))
    trajectory = Trajectory(samples)
    depth = DepthMap(np.full((params.size, params.size), params.z0, dtype=np.float32),
                     timestamp=params.t0)
    return trajectory, depth, cam, _orbit_analytic_flow(params, cam)
