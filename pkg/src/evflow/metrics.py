"""Masked flow benchmarking: average endpoint error and outlier percentage.

A pixel counts as an outlier when its endpoint error exceeds both 3 pixels
and 5% of the ground-truth magnitude (the KITTI rule); at zero ground-truth
magnitude the percentage branch is vacuous and the rule reduces to EE > 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FlowField
from .errors import DataError

OUTLIER_PIXELS = 3.0
OUTLIER_FRACTION = 0.05


@dataclass
class EvalReport:
    aee: float
    outlier_pct: float
    evaluated_pixel_count: int
    evaluated_fraction: float

    def as_dict(self) -> dict:
        return {
            "aee": self.aee,
            "outlier_pct": self.outlier_pct,
            "evaluated_pixel_count": self.evaluated_pixel_count,
            "evaluated_fraction": self.evaluated_fraction,
        }


def endpoint_error_map(pred: FlowField, gt: FlowField) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel Euclidean endpoint error and the mask where it is defined
    (both fields valid). Undefined pixels hold 0."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DataError("flow field resolutions differ")
    defined = pred.valid & gt.valid
    ee = np.hypot(pred.u - gt.u, pred.v - gt.v)
    return np.where(defined, ee, 0.0), defined


def evaluate(pred: FlowField, gt: FlowField,
             event_mask: np.ndarray | None = None) -> EvalReport:
    """Masked AEE and outlier percentage over pixels where an event was
    observed and both flows are valid."""
    ee, defined = endpoint_error_map(pred, gt)
    if event_mask is None:
        selected = defined
    else:
        event_mask = np.asarray(event_mask, dtype=bool)
        if event_mask.shape != ee.shape:
            raise DataError("event mask resolution differs from the flow fields")
        selected = defined & event_mask
    count = int(selected.sum())
    if count == 0:
        raise DataError("empty evaluation set: no pixel is masked in and valid in both fields")
    errors = ee[selected]
    gt_mag = np.hypot(gt.u, gt.v)[selected]
    outliers = (errors > OUTLIER_PIXELS) & (errors > OUTLIER_FRACTION * gt_mag)
    return EvalReport(
        aee=float(errors.mean()),
        outlier_pct=100.0 * float(outliers.sum()) / count,
        evaluated_pixel_count=count,
        evaluated_fraction=count / ee.size,
    )
