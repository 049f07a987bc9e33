"""Annotation-file replay: ground-truth boxes as a detection stream.

Reads the standard object-detection annotation layout (an ``images`` array,
an ``annotations`` array with corner-form ``bbox`` entries, and a
``categories`` table) and emits one wire-protocol frame per image, in the
images array's order. Annotation boxes are corner-form ``[x, y, w, h]``;
the wire protocol wants center-form, so ``cx = x + w/2`` and
``cy = y + h/2``. Annotations are ground truth, so every emitted detection
carries confidence 1.0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator


class AnnotationError(ValueError):
    """The annotation document is missing something or inconsistent."""


@dataclass(frozen=True)
class AnnotationSource:
    """Parsed annotation document with the category table resolved."""

    categories: dict[int, str]
    image_ids: tuple[int, ...]  # in file order; one frame per entry
    boxes_by_image: dict[int, tuple[tuple[str, float, float, float, float], ...]]

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationSource":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise AnnotationError(f"cannot read annotation file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_document(doc)

    @classmethod
    def from_document(cls, doc: dict) -> "AnnotationSource":
        for key in ("images", "annotations", "categories"):
            if key not in doc:
                raise AnnotationError(f"annotation document: missing {key!r} array")
        categories = {}
        for entry in doc["categories"]:
            try:
                categories[int(entry["id"])] = str(entry["name"])
            except (KeyError, TypeError, ValueError) as exc:
                raise AnnotationError(f"bad category entry {entry!r}: {exc}") from exc
        image_ids = []
        for entry in doc["images"]:
            try:
                image_ids.append(int(entry["id"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise AnnotationError(f"bad image entry {entry!r}: {exc}") from exc
        known_images = set(image_ids)
        boxes: dict[int, list] = {image_id: [] for image_id in image_ids}
        unresolved = set()
        for ann in doc["annotations"]:
            try:
                image_id = int(ann["image_id"])
                category_id = int(ann["category_id"])
                x, y, w, h = (float(v) for v in ann["bbox"])
            except (KeyError, TypeError, ValueError) as exc:
                raise AnnotationError(f"bad annotation entry {ann!r}: {exc}") from exc
            if category_id not in categories:
                unresolved.add(category_id)
                continue
            if image_id not in known_images:
                raise AnnotationError(
                    f"annotation {ann.get('id', '?')} references unknown image {image_id}"
                )
            boxes[image_id].append((categories[category_id], x, y, w, h))
        if unresolved:
            raise AnnotationError(
                "annotation document references category ids with no name: "
                + ", ".join(str(i) for i in sorted(unresolved))
            )
        return cls(
            categories=categories,
            image_ids=tuple(image_ids),
            boxes_by_image={k: tuple(v) for k, v in boxes.items()},
        )


def frame_document(
    camera_id: str,
    frame_index: int,
    timestamp_ms: int,
    boxes: tuple[tuple[str, float, float, float, float], ...],
) -> dict:
    """One wire-protocol frame object; box corners become centers here."""
    return {
        "camera_id": camera_id,
        "frame_index": frame_index,
        "timestamp_ms": timestamp_ms,
        "detections": [
            {
                "class": name,
                "confidence": 1.0,
                "bbox": {"cx": x + w / 2.0, "cy": y + h / 2.0, "w": w, "h": h},
            }
            for name, x, y, w, h in boxes
        ],
    }


def replay_lines(
    source: AnnotationSource,
    camera_id: str,
    frame_interval_s: float,
    start_ms: int = 0,
) -> Iterator[str]:
    """Wire-protocol lines for every image, timestamps one interval apart."""
    if frame_interval_s <= 0:
        raise AnnotationError(f"frame interval must be > 0, got {frame_interval_s}")
    if not camera_id:
        raise AnnotationError("camera id must be non-empty")
    for index, image_id in enumerate(source.image_ids):
        doc = frame_document(
            camera_id=camera_id,
            frame_index=index,
            timestamp_ms=start_ms + round(index * frame_interval_s * 1000.0),
            boxes=source.boxes_by_image.get(image_id, ()),
        )
        yield json.dumps(doc, separators=(",", ":"))
