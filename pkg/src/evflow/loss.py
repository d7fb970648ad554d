"""Self-supervised flow objective: Charbonnier photometric and smoothness
terms, bilinear warping, the analytic gradient, and pyramid downsampling.

The photometric term warps the second frame by the flow with bilinear
sampling and penalizes the intensity difference against the first frame.
Samples that leave the image are clamped for interpolation but excluded from
the sum through the warp validity mask, so flow that legitimately exits the
frame is not penalized. The smoothness term penalizes flow differences over
horizontal, vertical and both diagonal neighbor pairs, each unordered pair
counted once.

All reductions are plain numpy sums over fixed-shape arrays, so repeated
evaluations are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FlowField, Frame
from .errors import DataError

# Offsets (dx, dy) realizing each unordered neighbor pair exactly once.
NEIGHBOR_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))


@dataclass(frozen=True)
class CharbonnierParams:
    """Robust penalty rho(x) = (x^2 + epsilon^2)^alpha.

    epsilon = 0 is accepted for the degenerate |x| case even though regular
    use keeps it positive.
    """

    alpha: float = 0.45
    epsilon: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DataError("charbonnier alpha must lie in (0, 1]")
        if self.epsilon < 0.0 or not np.isfinite(self.epsilon):
            raise DataError("charbonnier epsilon must be finite and >= 0")


@dataclass(frozen=True)
class LossWeights:
    smoothness: float = 0.5

    def __post_init__(self):
        if self.smoothness < 0.0 or not np.isfinite(self.smoothness):
            raise DataError("smoothness weight must be finite and >= 0")


@dataclass
class LossBreakdown:
    photometric: float
    smoothness: float
    total: float
    valid_pixel_count: int

    def as_dict(self) -> dict:
        return {
            "photometric": self.photometric,
            "smoothness": self.smoothness,
            "total": self.total,
            "valid_pixel_count": self.valid_pixel_count,
        }


def charbonnier(x, params: CharbonnierParams):
    """Evaluate rho(x) = (x^2 + eps^2)^alpha; even and non-decreasing in |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = (x * x + params.epsilon ** 2) ** params.alpha
    return float(out) if out.ndim == 0 else out


def charbonnier_grad(x, params: CharbonnierParams):
    """d rho / dx = 2 alpha x (x^2 + eps^2)^(alpha - 1), with 0 at the
    epsilon = 0 singularity."""
    x = np.asarray(x, dtype=np.float64)
    base = x * x + params.epsilon ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * params.alpha * x * base ** (params.alpha - 1.0)
    out = np.where(base == 0.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def _sample_bilinear(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Bilinear interpolation with border clamping.

    Returns (values, d/dx, d/dy, in_x, in_y) where in_x/in_y flag the
    coordinate lying inside [0, size-1] per axis. The derivative is taken on
    the cell [floor(x), floor(x) + 1), i.e. the right-limit at interior
    lattice points; at the far border the last interior cell is reused.
    """
    h, w = pixels.shape
    in_x = (xs >= 0.0) & (xs <= w - 1.0)
    in_y = (ys >= 0.0) & (ys <= h - 1.0)
    xc = np.clip(xs, 0.0, float(w - 1))
    yc = np.clip(ys, 0.0, float(h - 1))
    x0 = np.clip(np.floor(xc), 0, max(w - 2, 0)).astype(np.int64)
    y0 = np.clip(np.floor(yc), 0, max(h - 2, 0)).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    a = pixels[y0, x0]
    b = pixels[y0, x1]
    c = pixels[y1, x0]
    d = pixels[y1, x1]
    values = (a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy)
              + c * (1.0 - fx) * fy + d * fx * fy)
    ddx = (1.0 - fy) * (b - a) + fy * (d - c)
    ddy = (1.0 - fx) * (c - a) + fx * (d - b)
    return values, ddx, ddy, in_x, in_y


def bilinear_sample(image: Frame, x: float, y: float) -> tuple[float, bool]:
    """Sample one point; out-of-bounds coordinates clamp to the border and
    report in_bounds = False."""
    values, _, _, in_x, in_y = _sample_bilinear(
        image.pixels, np.asarray(float(x)), np.asarray(float(y)))
    return float(values), bool(in_x & in_y)


def warp(image: Frame, flow: FlowField) -> tuple[Frame, np.ndarray]:
    """Warp the image by the flow: warped(x, y) = image(x + u, y + v).

    warp_valid is false where the sample point left the bounds or the flow
    is invalid.
    """
    if (image.height, image.width) != (flow.height, flow.width):
        raise DataError("image and flow resolutions differ")
    ys, xs = np.mgrid[0:image.height, 0:image.width].astype(np.float64)
    values, _, _, in_x, in_y = _sample_bilinear(image.pixels, xs + flow.u, ys + flow.v)
    return Frame(values, image.timestamp), in_x & in_y & flow.valid


def photometric_loss(i0: Frame, i1: Frame, flow: FlowField,
                     params: CharbonnierParams = CharbonnierParams()) -> tuple[float, int]:
    """Sum of rho(I0 - warp(I1)) over pixels with a valid warped sample.

    Returns (sum, number of contributing pixels).
    """
    if (i0.height, i0.width) != (i1.height, i1.width):
        raise DataError("frame resolutions differ")
    warped, warp_valid = warp(i1, flow)
    residual = i0.pixels - warped.pixels
    per_pixel = charbonnier(residual, params)
    total = float(np.where(warp_valid, per_pixel, 0.0).sum())
    return total, int(warp_valid.sum())


def _pair_slices(h: int, w: int, dx: int, dy: int):
    xs0 = slice(0, w - dx)
    xs1 = slice(dx, w)
    if dy >= 0:
        ys0 = slice(0, h - dy)
        ys1 = slice(dy, h)
    else:
        ys0 = slice(-dy, h)
        ys1 = slice(0, h + dy)
    return (ys0, xs0), (ys1, xs1)


def smoothness_loss(flow: FlowField, params: CharbonnierParams = CharbonnierParams()) -> float:
    """Sum of rho over u and v differences of valid neighbor pairs."""
    total = 0.0
    for dx, dy in NEIGHBOR_OFFSETS:
        cur, nb = _pair_slices(flow.height, flow.width, dx, dy)
        pair = flow.valid[cur] & flow.valid[nb]
        du = flow.u[cur] - flow.u[nb]
        dv = flow.v[cur] - flow.v[nb]
        total += float(np.where(pair, charbonnier(du, params) + charbonnier(dv, params), 0.0).sum())
    return total


def smoothness_pair_count(flow: FlowField) -> int:
    """Number of valid neighbor pairs the smoothness loss runs over."""
    count = 0
    for dx, dy in NEIGHBOR_OFFSETS:
        cur, nb = _pair_slices(flow.height, flow.width, dx, dy)
        count += int((flow.valid[cur] & flow.valid[nb]).sum())
    return count


def total_loss(i0: Frame, i1: Frame, flow: FlowField,
               char_params: CharbonnierParams = CharbonnierParams(),
               weights: LossWeights = LossWeights(),
               normalize: bool = False) -> LossBreakdown:
    """Weighted objective: photometric + smoothness_weight * smoothness.

    With normalize=True both terms become means (over contributing pixels and
    neighbor pairs respectively) for resolution-independent comparisons; the
    default is the plain sum.
    """
    photo, count = photometric_loss(i0, i1, flow, char_params)
    smooth = smoothness_loss(flow, char_params)
    if normalize:
        photo = photo / count if count else 0.0
        pairs = smoothness_pair_count(flow)
        smooth = smooth / pairs if pairs else 0.0
    total = photo + weights.smoothness * smooth
    return LossBreakdown(photo, smooth, total, count)


def loss_gradient(i0: Frame, i1: Frame, flow: FlowField,
                  char_params: CharbonnierParams = CharbonnierParams(),
                  weights: LossWeights = LossWeights()) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the (sum-reduction) total loss in u and v.

    Uses the piecewise-bilinear warp derivative; at integer sample
    coordinates the right-limit cell applies. Invalid flow pixels receive a
    zero gradient.
    """
    if (i0.height, i0.width) != (i1.height, i1.width):
        raise DataError("frame resolutions differ")
    if (i0.height, i0.width) != (flow.height, flow.width):
        raise DataError("image and flow resolutions differ")
    ys, xs = np.mgrid[0:i0.height, 0:i0.width].astype(np.float64)
    values, ddx, ddy, in_x, in_y = _sample_bilinear(i1.pixels, xs + flow.u, ys + flow.v)
    mask = in_x & in_y & flow.valid
    residual = i0.pixels - values
    dphi = charbonnier_grad(residual, char_params)
    gu = np.where(mask, -dphi * ddx, 0.0)
    gv = np.where(mask, -dphi * ddy, 0.0)
    _add_smoothness_gradient(flow, char_params, weights.smoothness, gu, gv)
    return gu, gv


def _add_smoothness_gradient(flow: FlowField, char_params: CharbonnierParams,
                             lam: float, gu: np.ndarray, gv: np.ndarray) -> None:
    for dx, dy in NEIGHBOR_OFFSETS:
        cur, nb = _pair_slices(flow.height, flow.width, dx, dy)
        pair = flow.valid[cur] & flow.valid[nb]
        gpu = np.where(pair, lam * charbonnier_grad(flow.u[cur] - flow.u[nb], char_params), 0.0)
        gpv = np.where(pair, lam * charbonnier_grad(flow.v[cur] - flow.v[nb], char_params), 0.0)
        gu[cur] += gpu
        gu[nb] -= gpu
        gv[cur] += gpv
        gv[nb] -= gpv


def _inclusive_loss_and_gradient(i0: Frame, i1: Frame, flow: FlowField,
                                 char_params: CharbonnierParams,
                                 weights: LossWeights):
    """Total loss and gradient with the photometric sum running over ALL
    flow-valid pixels, clamped samples included.

    Unlike the public exclusion loss this objective is continuous across the
    image border, which the variational solver exploits for warm starts. The
    gradient respects the clamp: a coordinate clamped on one axis has zero
    derivative along that axis.
    """
    ys, xs = np.mgrid[0:i0.height, 0:i0.width].astype(np.float64)
    values, ddx, ddy, in_x, in_y = _sample_bilinear(i1.pixels, xs + flow.u, ys + flow.v)
    residual = i0.pixels - values
    total = float(np.where(flow.valid, charbonnier(residual, char_params), 0.0).sum())
    dphi = charbonnier_grad(residual, char_params)
    gu = np.where(flow.valid & in_x, -dphi * ddx, 0.0)
    gv = np.where(flow.valid & in_y, -dphi * ddy, 0.0)
    lam = weights.smoothness
    total += lam * smoothness_loss(flow, char_params)
    _add_smoothness_gradient(flow, char_params, lam, gu, gv)
    return total, gu, gv


def _downsample_once(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    return arr.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _check_factor(width: int, height: int, factor: int) -> int:
    if factor < 1 or (factor & (factor - 1)) != 0:
        raise DataError("downsample factor must be a positive power of two")
    if width % factor or height % factor:
        raise DataError(f"dimensions {width}x{height} not divisible by {factor}")
    return factor.bit_length() - 1


def downsample_frame(frame: Frame, factor: int) -> Frame:
    """2x2 average pooling applied log2(factor) times."""
    levels = _check_factor(frame.width, frame.height, factor)
    pixels = frame.pixels
    for _ in range(levels):
        pixels = _downsample_once(pixels)
    return Frame(pixels, frame.timestamp)


def downsample_flow(flow: FlowField, factor: int) -> FlowField:
    """Average-pool the flow and halve displacements once per level.

    A pooled pixel is valid only when all four children are valid.
    """
    levels = _check_factor(flow.width, flow.height, factor)
    u, v, valid = flow.u, flow.v, flow.valid
    for _ in range(levels):
        h, w = u.shape
        valid_new = valid.reshape(h // 2, 2, w // 2, 2).all(axis=(1, 3))
        u = np.where(valid_new, _downsample_once(u) / 2.0, 0.0)
        v = np.where(valid_new, _downsample_once(v) / 2.0, 0.0)
        valid = valid_new
    return FlowField(u, v, valid)
