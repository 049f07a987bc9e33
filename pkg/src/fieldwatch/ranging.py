"""Pixel-to-metric conversion and the error/delay analysis built on it.

The conversion is deliberately simple: one pixel covers ``range * IFOV``
meters at the camera's calibrated detail range, so a pixel distance ``d``
between two detections becomes ``range * IFOV * d`` meters. Applying the
single fixed range to every object regardless of its true depth is the
model's dominant systematic error source; objects closer to the camera
than the calibrated range come out short (negative percent error), which
is exactly the sign pattern the error summary makes visible. No depth
correction is attempted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .optics import CameraIntrinsics, ifov

_MPP_CONSISTENCY_TOL = 1e-12
_PERCENT_CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class RangingModel:
    """Cached per-camera conversion factors between pixels and meters."""

    intrinsics: CameraIntrinsics
    ifov_rad: float
    meters_per_pixel: float

    def __post_init__(self) -> None:
        expected = self.intrinsics.range_m * self.ifov_rad
        if not math.isclose(self.meters_per_pixel, expected, rel_tol=_MPP_CONSISTENCY_TOL):
            raise ValueError(
                "meters_per_pixel is inconsistent with range_m * ifov_rad: "
                f"{self.meters_per_pixel} vs {expected}"
            )

    @classmethod
    def for_camera(cls, intrinsics: CameraIntrinsics) -> "RangingModel":
        rad_per_px = ifov(intrinsics)
        return cls(intrinsics, rad_per_px, intrinsics.range_m * rad_per_px)


def actual_distance(model: RangingModel, d_px: float) -> float:
    """Metric distance for a pixel distance: ``range * IFOV * d_px``."""
    if d_px < 0:
        raise ValueError(f"pixel distance must be >= 0, got {d_px}")
    return model.meters_per_pixel * d_px


def pixel_distance_for(model: RangingModel, ad_m: float) -> float:
    """Exact algebraic inverse of :func:`actual_distance`.

    Used by the simulator to place synthetic detections so that their pixel
    separation maps back to a chosen metric distance.
    """
    return ad_m / model.meters_per_pixel


def percent_error(obtained: float, actual: float) -> float:
    """Signed percent error ``100 * (obtained - actual) / actual``."""
    if actual <= 0:
        raise ValueError(f"actual distance must be > 0, got {actual}")
    return 100.0 * (obtained - actual) / actual


def deterrence_delay(obtained: float, actual: float, animal_speed: float) -> float:
    """Seconds of deterrence lag caused by a distance over-estimate.

    ``(obtained - actual) / animal_speed``: positive when the estimate runs
    long (the speaker fires late), negative when it runs short (early
    trigger). An early trigger is information, not an error, so negative
    values are returned as-is.
    """
    if animal_speed <= 0:
        raise ValueError(f"animal_speed must be > 0, got {animal_speed}")
    return (obtained - actual) / animal_speed


@dataclass(frozen=True)
class ErrorRecord:
    """One labelled (obtained, actual) distance trial and its percent error."""

    label: str
    obtained: float
    actual: float
    percent_error: float

    def __post_init__(self) -> None:
        if self.actual <= 0:
            raise ValueError(f"actual distance must be > 0, got {self.actual}")
        expected = percent_error(self.obtained, self.actual)
        consistent = math.isclose(
            self.percent_error, expected, rel_tol=_PERCENT_CONSISTENCY_TOL, abs_tol=_PERCENT_CONSISTENCY_TOL
        )
        if not consistent:
            raise ValueError(
                f"percent_error {self.percent_error} is inconsistent with "
                f"(obtained={self.obtained}, actual={self.actual}); expected {expected}"
            )

    @classmethod
    def from_measurement(cls, label: str, obtained: float, actual: float) -> "ErrorRecord":
        return cls(label, obtained, actual, percent_error(obtained, actual))


@dataclass(frozen=True)
class ErrorSummary:
    """Signed-error aggregates over a batch of trials.

    The positive and negative means are kept separate because they answer
    different questions (late vs. early triggering); a mean is ``None``,
    not zero, when its subset is empty. Zero-error trials belong to
    neither subset.
    """

    mean_positive: float | None
    mean_negative: float | None
    positive_count: int
    negative_count: int
    zero_count: int


def summarize_errors(records: list[ErrorRecord]) -> ErrorSummary:
    """Mean of strictly positive and strictly negative percent errors."""
    positives = [r.percent_error for r in records if r.percent_error > 0]
    negatives = [r.percent_error for r in records if r.percent_error < 0]
    zeros = len(records) - len(positives) - len(negatives)
    return ErrorSummary(
        mean_positive=sum(positives) / len(positives) if positives else None,
        mean_negative=sum(negatives) / len(negatives) if negatives else None,
        positive_count=len(positives),
        negative_count=len(negatives),
        zero_count=zeros,
    )
