"""Detection data model, IoU, and greedy class-wise non-maximum suppression.

Bounding boxes are center-form (cx, cy, w, h) in pixel coordinates with the
origin at the image's top-left corner, x growing rightward and y downward.
Detectors routinely emit boxes that spill past the image edges, so nothing
here clamps to image bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_CONFIDENCE_THRESHOLD = 0.5
DEFAULT_IOU_THRESHOLD = 0.45


@dataclass(frozen=True)
class BBox:
    """Center-form pixel bounding box."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.cx, self.cy, self.w, self.h)):
            raise ValueError(f"bbox fields must be finite, got {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bbox width/height must be > 0, got w={self.w} h={self.h}")

    @property
    def left(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def right(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def top(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def bottom(self) -> float:
        return self.cy + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Detection:
    """One detected object: box, class label, and detector confidence."""

    bbox: BBox
    class_label: str
    confidence: float

    def __post_init__(self) -> None:
        if not self.class_label:
            raise ValueError("class_label must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class DetectionFrame:
    """One camera frame's worth of detections, the unit of the wire protocol.

    Frame indices must increase strictly per camera; that is enforced by the
    stream parser, not here, since a lone frame has no predecessor.
    """

    camera_id: str
    frame_index: int
    timestamp_ms: int
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        if not self.camera_id:
            raise ValueError("camera_id must be non-empty")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        object.__setattr__(self, "detections", tuple(self.detections))


def center_distance_px(a: BBox, b: BBox) -> float:
    """Euclidean distance between two box centers, in pixels."""
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two axis-aligned boxes; 0 when disjoint."""
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def nms(
    detections: list[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
) -> list[Detection]:
    """Greedy class-wise non-maximum suppression.

    Detections below the confidence floor are dropped, then the
    highest-confidence survivor is kept and same-class detections
    overlapping it with IoU strictly above ``iou_threshold`` are discarded;
    repeat until no candidates remain. Suppression never crosses class
    labels, so an animal box cannot suppress a speaker box. Confidence ties
    resolve in input order (first wins), which keeps replays deterministic.

    Returns the kept detections sorted by descending confidence.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    if not (0.0 <= confidence_threshold <= 1.0):
        raise ValueError(
            f"confidence_threshold must be in [0, 1], got {confidence_threshold}"
        )
    candidates = [d for d in detections if d.confidence >= confidence_threshold]
    # Stable sort: equal confidences stay in input order.
    candidates.sort(key=lambda d: -d.confidence)
    kept: list[Detection] = []
    while candidates:
        best = candidates.pop(0)
        kept.append(best)
        candidates = [
            d
            for d in candidates
            if d.class_label != best.class_label or iou(d.bbox, best.bbox) <= iou_threshold
        ]
    return kept
