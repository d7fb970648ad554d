"""Bit-exact readers and writers for the five on-disk formats.

* event CSV       one event per line ``t,x,y,p`` with p in {0, 1} (0 encodes -1)
* PGM (P5)        binary grayscale, maxval 255, plus a ``timestamp,filename``
                  index CSV carrying frame timestamps
* pose CSV        ``t,px,py,pz,qx,qy,qz,qw`` with a unit quaternion, w last
* EVDEPTH         ASCII header ``EVDEPTH <width> <height> <timestamp>\\n`` then
                  width*height little-endian float32, row-major, NaN = no depth
* .flo            Middlebury interchange: magic "PIEH", int32 width/height,
                  interleaved (u, v) float32; invalid pixels stored as 1e9

All multi-byte binary fields are little-endian. Floats in text formats are
written with repr so values survive a round-trip bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import DepthMap, EventStream, FlowField, Frame, PoseSample, Trajectory
from .errors import DataError, FormatError

FLO_MAGIC = b"PIEH"
FLO_INVALID_SENTINEL = 1e9
FLO_INVALID_THRESHOLD = 1e8


def _split_lines(source: bytes) -> list[str]:
    try:
        text = source.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not ASCII text: {exc}") from None
    return text.split("\n")


# ---------------------------------------------------------------------------
# event CSV


def read_events(source: bytes, width: int, height: int) -> EventStream:
    """Parse an event CSV. Lines are ``t,x,y,p`` with p in {0, 1}."""
    xs, ys, ts, ps = [], [], [], []
    last_t = -1
    for lineno, line in enumerate(_split_lines(source), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise FormatError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        try:
            t, x, y, p = (int(f) for f in fields)
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer field") from None
        if t < 0:
            raise FormatError(f"line {lineno}: negative timestamp {t}")
        if t < last_t:
            raise FormatError(f"line {lineno}: timestamp {t} decreases below {last_t}")
        if not (0 <= x < width and 0 <= y < height):
            raise FormatError(f"line {lineno}: coordinate ({x}, {y}) outside {width}x{height}")
        if p not in (0, 1):
            raise FormatError(f"line {lineno}: polarity must be 0 or 1, got {p}")
        last_t = t
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(1 if p == 1 else -1)
    return EventStream(width, height,
                       np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64),
                       np.array(ts, dtype=np.int64), np.array(ps, dtype=np.int64))


def write_events(stream: EventStream) -> bytes:
    lines = [f"{t},{x},{y},{1 if p > 0 else 0}"
             for x, y, t, p in zip(stream.x, stream.y, stream.t, stream.p)]
    return ("\n".join(lines) + "\n").encode("ascii") if lines else b""


# ---------------------------------------------------------------------------
# PGM + timestamp index


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First `count` whitespace-delimited header tokens, honoring # comments.

    Returns the tokens and the offset one byte past the final token's
    trailing whitespace byte (where the binary payload starts).
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and (data[i:i + 1].isspace() or data[i] == ord("#")):
            if data[i] == ord("#"):
                while i < n and data[i] != ord("\n"):
                    i += 1
            else:
                i += 1
        start = i
        while i < n and not data[i:i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError("truncated PGM header")
        tokens.append(data[start:i])
        if len(tokens) == count:
            if i >= n:
                raise FormatError("truncated PGM header")
            i += 1  # exactly one whitespace byte separates header from payload
    return tokens, i


def read_frame_pgm(source: bytes, timestamp: int = 0) -> Frame:
    """Parse a binary (P5) PGM with maxval 255 into intensities in [0, 1]."""
    if not source.startswith(b"P5"):
        raise FormatError("not a binary PGM: magic is not P5")
    tokens, offset = _pgm_tokens(source, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-integer PGM header field") from None
    if maxval != 255:
        raise FormatError(f"unsupported PGM maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise FormatError("PGM dimensions must be positive")
    payload = source[offset:]
    if len(payload) < width * height:
        raise FormatError(f"PGM payload truncated: {len(payload)} of {width * height} bytes")
    if len(payload) > width * height:
        raise FormatError("PGM payload has trailing bytes")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Frame(pixels.astype(np.float64) / 255.0, timestamp)


def write_frame_pgm(frame: Frame) -> bytes:
    """Serialize a frame, quantizing intensities with round-half-to-even."""
    data = np.rint(frame.pixels * 255.0).astype(np.uint8)
    return f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii") + data.tobytes()


def read_frame_index(source: bytes) -> list[tuple[int, str]]:
    """Parse the timestamp sidecar CSV: lines ``timestamp,filename``."""
    entries: list[tuple[int, str]] = []
    last_t = None
    for lineno, line in enumerate(_split_lines(source), start=1):
        line = line.strip()
        if not line:
            continue
        t_str, sep, name = line.partition(",")
        if not sep or not name:
            raise FormatError(f"line {lineno}: expected 'timestamp,filename'")
        try:
            t = int(t_str)
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer timestamp") from None
        if last_t is not None and t <= last_t:
            raise FormatError(f"line {lineno}: timestamps must be strictly increasing")
        last_t = t
        entries.append((t, name))
    return entries


def write_frame_index(entries: list[tuple[int, str]]) -> bytes:
    lines = [f"{t},{name}" for t, name in entries]
    return ("\n".join(lines) + "\n").encode("ascii") if lines else b""


# ---------------------------------------------------------------------------
# pose CSV


def read_trajectory(source: bytes) -> Trajectory:
    """Parse ``t,px,py,pz,qx,qy,qz,qw`` pose rows into a trajectory."""
    samples: list[PoseSample] = []
    last_t = None
    for lineno, line in enumerate(_split_lines(source), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 8:
            raise FormatError(f"line {lineno}: expected 8 fields, got {len(fields)}")
        try:
            t = int(fields[0])
            values = [float(f) for f in fields[1:]]
        except ValueError:
            raise FormatError(f"line {lineno}: malformed number") from None
        if not all(np.isfinite(values)):
            raise FormatError(f"line {lineno}: non-finite value")
        if last_t is not None and t <= last_t:
            raise FormatError(f"line {lineno}: timestamps must be strictly increasing")
        last_t = t
        try:
            samples.append(PoseSample.from_quaternion(t, values[0:3], values[3:7]))
        except DataError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return Trajectory(samples)


def write_trajectory(trajectory: Trajectory) -> bytes:
    lines = []
    for s in trajectory.samples:
        px, py, pz = (repr(float(v)) for v in s.translation)
        qx, qy, qz, qw = (repr(float(v)) for v in s.quaternion)
        lines.append(f"{s.timestamp},{px},{py},{pz},{qx},{qy},{qz},{qw}")
    return ("\n".join(lines) + "\n").encode("ascii") if lines else b""


# ---------------------------------------------------------------------------
# EVDEPTH binary


def read_depth(source: bytes) -> DepthMap:
    """Parse an EVDEPTH binary depth map."""
    newline = source.find(b"\n")
    if newline < 0:
        raise FormatError("EVDEPTH header line missing")
    parts = source[:newline].split(b" ")
    if len(parts) != 4 or parts[0] != b"EVDEPTH":
        raise FormatError("bad EVDEPTH magic/header")
    try:
        width, height, timestamp = (int(p) for p in parts[1:])
    except ValueError:
        raise FormatError("non-integer EVDEPTH header field") from None
    if width < 1 or height < 1:
        raise FormatError("EVDEPTH dimensions must be positive")
    payload = source[newline + 1:]
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(f"EVDEPTH payload is {len(payload)} bytes, expected {expected}")
    depths = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    try:
        return DepthMap(depths.copy(), timestamp)
    except DataError as exc:
        raise FormatError(str(exc)) from None


def write_depth(depth: DepthMap) -> bytes:
    header = f"EVDEPTH {depth.width} {depth.height} {depth.timestamp}\n".encode("ascii")
    return header + depth.depths.astype("<f4").tobytes()


# ---------------------------------------------------------------------------
# Middlebury .flo


def read_flo(source: bytes) -> FlowField:
    """Parse a .flo flow field; |u| or |v| beyond 1e8 marks a pixel invalid."""
    if len(source) < 12:
        raise FormatError(".flo header truncated")
    if source[:4] != FLO_MAGIC:
        raise FormatError('bad .flo magic (expected "PIEH")')
    width, height = struct.unpack("<ii", source[4:12])
    if width < 1 or height < 1:
        raise FormatError(".flo dimensions must be positive")
    expected = width * height * 8
    payload = source[12:]
    if len(payload) != expected:
        raise FormatError(f".flo payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2).astype(np.float64)
    u, v = data[:, :, 0], data[:, :, 1]
    invalid = (np.abs(u) > FLO_INVALID_THRESHOLD) | (np.abs(v) > FLO_INVALID_THRESHOLD)
    invalid |= ~(np.isfinite(u) & np.isfinite(v))
    u = np.where(invalid, 0.0, u)
    v = np.where(invalid, 0.0, v)
    return FlowField(u, v, ~invalid)


def write_flo(flow: FlowField) -> bytes:
    data = np.empty((flow.height, flow.width, 2), dtype="<f4")
    data[:, :, 0] = np.where(flow.valid, flow.u, FLO_INVALID_SENTINEL)
    data[:, :, 1] = np.where(flow.valid, flow.v, FLO_INVALID_SENTINEL)
    header = FLO_MAGIC + struct.pack("<ii", flow.width, flow.height)
    return header + data.tobytes()
