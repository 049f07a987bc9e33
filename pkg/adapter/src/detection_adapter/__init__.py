"""Bridges annotation files and external detectors to the detection-stream wire protocol."""

from .coco import AnnotationError, AnnotationSource, frame_document, replay_lines
from .wrap import transcode_detector_line, wrap_detector

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "AnnotationSource",
    "frame_document",
    "replay_lines",
    "transcode_detector_line",
    "wrap_detector",
]
