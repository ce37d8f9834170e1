"""Intensity conditioning applied before mixture fitting.

Percentiles everywhere in this package use numpy's default linear
interpolation between order statistics, and are always computed over
the masked voxels only (background zeros would otherwise dominate the
low percentile on skull-stripped images).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateIntensityError, EmptyMaskError, InputError
from .volume import Volume


@dataclass(frozen=True)
class ClipNormReport:
    """Percentile window used by :func:`clip_normalize`."""

    p_low: float
    p_high: float
    applied_range: tuple[float, float]


def _masked_values(vol: Volume, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != vol.n_voxels:
        raise InputError(f"mask length {mask.size} != voxel count {vol.n_voxels}")
    if not mask.any():
        raise EmptyMaskError("mask selects no voxels")
    return vol.data[mask]


def clip_normalize(
    vol: Volume,
    mask: np.ndarray,
    lo_pct: float = 1.0,
    hi_pct: float = 99.0,
) -> tuple[Volume, ClipNormReport]:
    """Clip masked intensities to a percentile window and map it to [0, 1].

    Percentiles are taken over masked voxels; masked values are clipped
    to ``[p_low, p_high]`` then mapped affinely so ``p_low -> 0`` and
    ``p_high -> 1``. Voxels outside the mask are set to 0.

    Raises:
        DegenerateIntensityError: the two percentiles coincide
            (constant image).
    """
    if not 0.0 <= lo_pct < hi_pct <= 100.0:
        raise InputError(f"need 0 <= lo_pct < hi_pct <= 100, got ({lo_pct}, {hi_pct})")
    values = _masked_values(vol, mask)
    p_low, p_high = np.percentile(values, [lo_pct, hi_pct])
    if p_low == p_high:
        raise DegenerateIntensityError(
            f"percentiles {lo_pct} and {hi_pct} coincide at {p_low}"
        )
    out = np.zeros(vol.n_voxels)
    out[np.asarray(mask, dtype=bool).ravel()] = (
        np.clip(values, p_low, p_high) - p_low
    ) / (p_high - p_low)
    report = ClipNormReport(float(p_low), float(p_high), (float(p_low), float(p_high)))
    return Volume(vol.dims, vol.spacing, out), report


def robust_zscore(vol: Volume, mask: np.ndarray) -> Volume:
    """Outlier-robust standardisation of masked intensities.

    Centre is the masked median; scale is the standard deviation of the
    masked values lying within their own 10th-90th percentile window.
    Voxels outside the mask are set to 0.
    """
    values = _masked_values(vol, mask)
    median = np.median(values)
    p10, p90 = np.percentile(values, [10.0, 90.0])
    inner = values[(values >= p10) & (values <= p90)]
    scale = float(np.std(inner))
    if scale == 0.0:
        raise DegenerateIntensityError("inner-percentile spread is zero")
    out = np.zeros(vol.n_voxels)
    out[np.asarray(mask, dtype=bool).ravel()] = (values - median) / scale
    return Volume(vol.dims, vol.spacing, out)
