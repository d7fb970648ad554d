"""Pinhole camera with plumb-bob (radial-tangential) distortion.

Normalized coordinates are x = (col - cx) / fx, y = (row - cy) / fy on the
undistorted image plane. Forward distortion is closed form; undistortion uses
fixed-point iteration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError, FormatError

CAMERA_FIELDS = ("fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2", "k3")


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DataError("focal lengths must be positive")

    def pixel_to_normalized(self, px, py):
        return (np.asarray(px, float) - self.cx) / self.fx, \
               (np.asarray(py, float) - self.cy) / self.fy

    def normalized_to_pixel(self, x, y):
        return np.asarray(x, float) * self.fx + self.cx, \
               np.asarray(y, float) * self.fy + self.cy

    def distort(self, x, y):
        """Apply radial-tangential distortion to normalized coordinates."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        r2 = x * x + y * y
        radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
        xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x)
        yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y
        return xd, yd

    def undistort(self, xd, yd, max_iterations: int = 50, tol: float = 1e-10):
        """Invert distort by fixed-point iteration.

        Returns (x, y, converged); non-converged entries keep their last
        iterate and must be treated as invalid by the caller.
        """
        xd = np.asarray(xd, float)
        yd = np.asarray(yd, float)
        x = xd.copy()
        y = yd.copy()
        delta = np.full(np.broadcast(xd, yd).shape, np.inf)
        for _ in range(max_iterations):
            r2 = x * x + y * y
            radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
            tx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x)
            ty = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = (xd - tx) / radial
                yn = (yd - ty) / radial
            delta = np.maximum(np.abs(xn - x), np.abs(yn - y))
            x, y = xn, yn
            if np.all(delta <= tol):
                break
        converged = (delta <= tol) & np.isfinite(x) & np.isfinite(y)
        return x, y, converged


def load_camera_json(source: bytes | str) -> CameraModel:
    """Load a camera from JSON holding exactly the nine calibration scalars."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise FormatError(f"camera JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise FormatError("camera JSON must be an object")
    missing = [k for k in CAMERA_FIELDS if k not in obj]
    if missing:
        raise FormatError(f"camera JSON missing fields: {', '.join(missing)}")
    try:
        values = {k: float(obj[k]) for k in CAMERA_FIELDS}
    except (TypeError, ValueError):
        raise FormatError("camera JSON fields must be numbers") from None
    try:
        return CameraModel(**values)
    except DataError as exc:
        raise FormatError(str(exc)) from None


def dump_camera_json(cam: CameraModel) -> str:
    return json.dumps(asdict(cam), indent=2) + "\n"
