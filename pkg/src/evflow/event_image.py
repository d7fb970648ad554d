"""Event windows and their 4-channel image representation.

A window [t_start, t_end) of events is summarized per pixel as the number of
positive and negative events plus the timestamp of the most recent event of
each polarity, normalized by the window duration so channel maxima reach 1
for a window whose latest event sits at its end. Pixels that saw no event of
a polarity hold 0 in that timestamp channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EventStream
from .errors import DataError

CHANNEL_NAMES = ("count_pos", "count_neg", "ts_pos", "ts_neg")


@dataclass
class EventWindow:
    """Events of one sensor restricted to the half-open interval [t_start, t_end)."""

    width: int
    height: int
    t_start: int
    t_end: int
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if self.t_start >= self.t_end:
            raise DataError("window requires t_start < t_end")
        self.x = np.asarray(self.x, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=np.int64)
        if self.t.size and (self.t.min() < self.t_start or self.t.max() >= self.t_end):
            raise DataError("window events must satisfy t_start <= t < t_end")

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start

    def __len__(self) -> int:
        return int(self.x.size)


@dataclass
class EventImage:
    """Four-channel window summary: per-polarity counts and latest timestamps."""

    count_pos: np.ndarray
    count_neg: np.ndarray
    ts_pos: np.ndarray
    ts_neg: np.ndarray

    @property
    def width(self) -> int:
        return self.count_pos.shape[1]

    @property
    def height(self) -> int:
        return self.count_pos.shape[0]

    def channels(self):
        return (self.count_pos, self.count_neg, self.ts_pos, self.ts_neg)


def slice_window(stream: EventStream, t_start: int, t_end: int) -> EventWindow:
    """Events with t_start <= t < t_end, order preserved."""
    if t_start >= t_end:
        raise DataError("slice_window requires t_start < t_end")
    lo = int(np.searchsorted(stream.t, t_start, side="left"))
    hi = int(np.searchsorted(stream.t, t_end, side="left"))
    return EventWindow(stream.width, stream.height, t_start, t_end,
                       stream.x[lo:hi], stream.y[lo:hi], stream.t[lo:hi], stream.p[lo:hi])


def encode(window: EventWindow) -> EventImage:
    """Accumulate the window into the 4-channel image representation.

    Counts commute and timestamps accumulate through a maximum, so the result
    is independent of event order, bit for bit.
    """
    shape = (window.height, window.width)
    count_pos = np.zeros(shape, dtype=np.int64)
    count_neg = np.zeros(shape, dtype=np.int64)
    ts_pos = np.zeros(shape, dtype=np.float64)
    ts_neg = np.zeros(shape, dtype=np.float64)
    if len(window):
        pos = window.p > 0
        neg = ~pos
        norm = (window.t - window.t_start).astype(np.float64) / float(window.duration)
        np.add.at(count_pos, (window.y[pos], window.x[pos]), 1)
        np.add.at(count_neg, (window.y[neg], window.x[neg]), 1)
        np.maximum.at(ts_pos, (window.y[pos], window.x[pos]), norm[pos])
        np.maximum.at(ts_neg, (window.y[neg], window.x[neg]), norm[neg])
    return EventImage(count_pos, count_neg, ts_pos, ts_neg)


def event_mask(window: EventWindow) -> np.ndarray:
    """Boolean image that is true exactly where the window saw any event."""
    mask = np.zeros((window.height, window.width), dtype=bool)
    mask[window.y, window.x] = True
    return mask


def event_image_to_pgm_channels(image: EventImage) -> dict[str, np.ndarray]:
    """8-bit preview channels: counts clamped to 255, timestamps scaled by 255
    with round-half-to-even."""
    return {
        "count_pos": np.minimum(image.count_pos, 255).astype(np.uint8),
        "count_neg": np.minimum(image.count_neg, 255).astype(np.uint8),
        "ts_pos": np.rint(image.ts_pos * 255.0).astype(np.uint8),
        "ts_neg": np.rint(image.ts_neg * 255.0).astype(np.uint8),
    }


def write_event_image_raw(image: EventImage, t_start: int = 0, t_end: int = 1) -> bytes:
    """Lossless binary in the EVDEPTH style: one ASCII header line
    ``EVIMG <width> <height> <t_start> <t_end>\\n`` followed by the four
    channels row-major and little-endian, counts as int64 and timestamp
    channels as float64.
    """
    header = f"EVIMG {image.width} {image.height} {t_start} {t_end}\n".encode("ascii")
    payload = (image.count_pos.astype("<i8").tobytes()
               + image.count_neg.astype("<i8").tobytes()
               + image.ts_pos.astype("<f8").tobytes()
               + image.ts_neg.astype("<f8").tobytes())
    return header + payload


def read_event_image_raw(source: bytes) -> tuple[EventImage, int, int]:
    """Inverse of write_event_image_raw; returns (image, t_start, t_end)."""
    newline = source.find(b"\n")
    if newline < 0:
        raise DataError("raw event image header missing")
    parts = source[:newline].split(b" ")
    if len(parts) != 5 or parts[0] != b"EVIMG":
        raise DataError("bad raw event image header")
    try:
        width, height, t_start, t_end = (int(p) for p in parts[1:])
    except ValueError:
        raise DataError("non-integer raw event image header field") from None
    if width < 1 or height < 1:
        raise DataError("raw event image dimensions must be positive")
    block = width * height * 8
    payload = source[newline + 1:]
    if len(payload) != 4 * block:
        raise DataError(f"raw event image payload is {len(payload)} bytes, expected {4 * block}")
    shape = (height, width)
    count_pos = np.frombuffer(payload[0:block], dtype="<i8").reshape(shape).copy()
    count_neg = np.frombuffer(payload[block:2 * block], dtype="<i8").reshape(shape).copy()
    ts_pos = np.frombuffer(payload[2 * block:3 * block], dtype="<f8").reshape(shape).copy()
    ts_neg = np.frombuffer(payload[3 * block:], dtype="<f8").reshape(shape).copy()
    return EventImage(count_pos, count_neg, ts_pos, ts_neg), t_start, t_end
