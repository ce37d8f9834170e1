"""Segmentation overlap scores and distribution summaries.

Metrics for labels absent from both grids are reported as None rather
than 0, so downstream averaging is not silently biased. Outlier fences
use the classic 1.5 * IQR rule with strict inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ShapeMismatchError
from .volume import LabelVolume


@dataclass(frozen=True)
class LabelOverlap:
    label: int
    tp: int
    fp: int
    fn: int
    dice: float | None
    sensitivity: float | None
    precision: float | None


@dataclass(frozen=True)
class OverlapReport:
    entries: tuple[LabelOverlap, ...]

    def __getitem__(self, label: int) -> LabelOverlap:
        for entry in self.entries:
            if entry.label == label:
                return entry
        raise KeyError(label)

    def to_json_dict(self) -> dict:
        return {
            "labels": {
                str(e.label): {
                    "tp": e.tp,
                    "fp": e.fp,
                    "fn": e.fn,
                    "dice": e.dice,
                    "sensitivity": e.sensitivity,
                    "precision": e.precision,
                }
                for e in self.entries
            }
        }

    def to_csv(self) -> str:
        def cell(x):
            return "" if x is None else repr(x)

        lines = ["label,tp,fp,fn,dice,sensitivity,precision"]
        for e in self.entries:
            lines.append(
                f"{e.label},{e.tp},{e.fp},{e.fn},"
                f"{cell(e.dice)},{cell(e.sensitivity)},{cell(e.precision)}"
            )
        return "\n".join(lines) + "\n"


def overlap(pred: LabelVolume, ref: LabelVolume, labels=None) -> OverlapReport:
    """Per-label Dice, sensitivity and precision with raw voxel counts.

    ``labels`` defaults to every nonzero label present in either grid.
    """
    if pred.dims != ref.dims:
        raise ShapeMismatchError(f"pred dims {pred.dims} != ref dims {ref.dims}")
    if labels is None:
        present = np.union1d(np.unique(pred.labels), np.unique(ref.labels))
        labels = [int(v) for v in present if v != 0]
    entries = []
    for label in labels:
        in_pred = pred.labels == label
        in_ref = ref.labels == label
        tp = int(np.count_nonzero(in_pred & in_ref))
        fp = int(np.count_nonzero(in_pred)) - tp
        fn = int(np.count_nonzero(in_ref)) - tp
        dice = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn > 0 else None
        sensitivity = tp / (tp + fn) if tp + fn > 0 else None
        precision = tp / (tp + fp) if tp + fp > 0 else None
        entries.append(LabelOverlap(int(label), tp, fp, fn, dice, sensitivity, precision))
    return OverlapReport(tuple(entries))


def outlier_fraction(values) -> tuple[float, np.ndarray]:
    """Fraction and indices of points beyond 1.5 * IQR from the quartiles.

    A point counts only when strictly outside the fences.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 4:
        raise InsufficientDataError(f"need at least 4 values, got {v.size}")
    q1, q3 = np.percentile(v, [25.0, 75.0])
    iqr = q3 - q1
    indices = np.flatnonzero((v < q1 - 1.5 * iqr) | (v > q3 + 1.5 * iqr))
    return indices.size / v.size, indices


def summarize(values) -> tuple[float, float]:
    """(median, 10th percentile) with linear-interpolation percentiles."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InsufficientDataError("cannot summarize an empty sample")
    p50, p10 = np.percentile(v, [50.0, 10.0])
    return float(p50), float(p10)
