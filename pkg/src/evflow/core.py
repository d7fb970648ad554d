"""Core value types shared by every pipeline stage.

Images are stored row-major as numpy arrays indexed [row, col]; x is the
column coordinate, y the row coordinate. Timestamps are integer microseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import DataError
from .rotation import quaternion_to_rotation, rotation_to_quaternion


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: int


@dataclass
class EventStream:
    """Time-sorted events from a width x height sensor, held as flat arrays."""

    width: int
    height: int
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DataError("sensor resolution must be at least 1x1")
        self.x = np.asarray(self.x, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=np.int64)
        n = self.x.size
        if not (self.y.size == self.t.size == self.p.size == n):
            raise DataError("event component arrays must have equal length")
        if n == 0:
            return
        if self.x.min() < 0 or self.x.max() >= self.width:
            raise DataError("event x coordinate out of bounds")
        if self.y.min() < 0 or self.y.max() >= self.height:
            raise DataError("event y coordinate out of bounds")
        if self.t.min() < 0:
            raise DataError("event timestamps must be non-negative")
        if np.any(np.diff(self.t) < 0):
            raise DataError("event timestamps must be non-decreasing")
        if not np.all(np.abs(self.p) == 1):
            raise DataError("event polarity must be +1 or -1")

    @classmethod
    def from_events(cls, width: int, height: int, events: Iterable[Event]) -> "EventStream":
        ev = list(events)
        return cls(
            width,
            height,
            np.array([e.x for e in ev], dtype=np.int64),
            np.array([e.y for e in ev], dtype=np.int64),
            np.array([e.t for e in ev], dtype=np.int64),
            np.array([e.p for e in ev], dtype=np.int64),
        )

    def __len__(self) -> int:
        return int(self.x.size)

    def event(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self.event(i)


@dataclass
class Frame:
    """Grayscale frame with intensities in [0, 1]."""

    pixels: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise DataError("frame pixels must be a non-empty 2-d array")
        if not np.all(np.isfinite(self.pixels)):
            raise DataError("frame pixels must be finite")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise DataError("frame pixels must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class PoseSample:
    """Rigid camera pose at one timestamp.

    The quaternion is kept exactly as supplied (x, y, z, w) so pose files
    re-serialize byte-identically; the rotation matrix is derived from it.
    """

    timestamp: int
    rotation: np.ndarray
    translation: np.ndarray
    quaternion: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.quaternion = np.asarray(self.quaternion, dtype=np.float64)
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise DataError("pose needs a 3x3 rotation and a 3-vector translation")
        if np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))) > 1e-9:
            raise DataError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-9:
            raise DataError("rotation determinant differs from +1 by more than 1e-9")

    @classmethod
    def from_quaternion(cls, timestamp: int, translation, quaternion,
                        norm_tol: float = 1e-6) -> "PoseSample":
        q = np.asarray(quaternion, dtype=np.float64)
        if q.shape != (4,):
            raise DataError("quaternion must have 4 components (x, y, z, w)")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > norm_tol:
            raise DataError(f"quaternion norm {norm:.9f} deviates from 1 by more than {norm_tol}")
        return cls(timestamp, quaternion_to_rotation(q), np.asarray(translation, float), q)

    @classmethod
    def from_matrix(cls, timestamp: int, rotation, translation) -> "PoseSample":
        r = np.asarray(rotation, dtype=np.float64)
        return cls(timestamp, r, np.asarray(translation, float), rotation_to_quaternion(r))


@dataclass
class Trajectory:
    """Pose samples sorted by strictly increasing timestamp."""

    samples: list[PoseSample] = field(default_factory=list)

    def __post_init__(self):
        ts = [s.timestamp for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DataError("trajectory timestamps must be strictly increasing")

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.samples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class DepthMap:
    """Per-pixel scene depth in meters; NaN marks pixels with no depth."""

    depths: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=np.float32)
        if self.depths.ndim != 2 or self.depths.size == 0:
            raise DataError("depth map must be a non-empty 2-d array")
        finite = self.depths[np.isfinite(self.depths)]
        if finite.size and finite.min() <= 0.0:
            raise DataError("finite depths must be positive")

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]


@dataclass
class FlowField:
    """Dense per-pixel displacement (u, v) in pixels with a validity mask.

    u and v are zeroed wherever valid is false; consumers must not read
    displacement values at invalid pixels.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.u.ndim != 2 or self.u.size == 0:
            raise DataError("flow field must be a non-empty 2-d array")
        if self.u.shape != self.v.shape or self.u.shape != self.valid.shape:
            raise DataError("flow components and mask must share one shape")
        if not (np.all(np.isfinite(self.u[self.valid])) and np.all(np.isfinite(self.v[self.valid]))):
            raise DataError("flow must be finite wherever valid")

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)),
                   np.ones((height, width), dtype=bool))

    @classmethod
    def constant(cls, width: int, height: int, u: float, v: float) -> "FlowField":
        return cls(np.full((height, width), float(u)), np.full((height, width), float(v)),
                   np.ones((height, width), dtype=bool))

    def copy(self) -> "FlowField":
        return FlowField(self.u.copy(), self.v.copy(), self.valid.copy())
