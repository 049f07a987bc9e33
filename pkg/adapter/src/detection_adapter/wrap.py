"""Wrap an external detector process and transcode its output.

The wrapped detector must print one JSON array per processed frame on
stdout, each element shaped like::

    {"class": "elephant", "confidence": 0.91, "bbox": [x, y, w, h]}

with the box in corner form. Anything that does not parse to that shape is
logged to stderr and dropped; it is never forwarded downstream. Emitted
frames get consecutive indices and host-clock timestamps (injectable for
tests). The adapter's exit status mirrors the detector's, so a detector
crash mid-stream surfaces as a nonzero exit after whatever valid frames
already went out.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
from typing import IO, Callable, Sequence


def _host_clock_ms() -> int:
    return time.time_ns() // 1_000_000


def transcode_detector_line(line: str) -> list[tuple[str, float, float, float, float, float]]:
    """Parse one detector output line into (class, confidence, x, y, w, h).

    Raises ValueError with a reason when the line does not match the
    contract; the caller decides whether to warn or abort.
    """
    doc = json.loads(line)
    if not isinstance(doc, list):
        raise ValueError(f"expected a JSON array of detections, got {type(doc).__name__}")
    parsed = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise ValueError(f"detection[{i}] is not an object")
        try:
            name = entry["class"]
            confidence = entry["confidence"]
            x, y, w, h = (float(v) for v in entry["bbox"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"detection[{i}]: {exc}") from exc
        if not isinstance(name, str) or not name:
            raise ValueError(f"detection[{i}]: class must be a non-empty string")
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            raise ValueError(f"detection[{i}]: confidence must be a number")
        if not (0.0 <= float(confidence) <= 1.0):
            raise ValueError(f"detection[{i}]: confidence {confidence} outside [0, 1]")
        if w <= 0 or h <= 0:
            raise ValueError(f"detection[{i}]: box sides must be positive")
        parsed.append((name, float(confidence), x, y, w, h))
    return parsed


def wrap_detector(
    command: Sequence[str],
    camera_id: str,
    out: IO[str] = sys.stdout,
    err: IO[str] = sys.stderr,
    clock_ms: Callable[[], int] = _host_clock_ms,
) -> int:
    """Run the detector command and bridge its frames to the wire protocol.

    Malformed frames are warned about on ``err`` and skipped; valid frames
    are numbered consecutively. Returns the exit code the adapter process
    should use: the detector's own status, mapped into the 128+ range when
    the detector died on a signal.
    """
    if not command:
        raise ValueError("detector command must be non-empty")
    process = subprocess.Popen(
        list(command),
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    index = 0
    assert process.stdout is not None
    try:
        for raw in process.stdout:
            line = raw.strip()
            if not line:
                continue
            try:
                parsed = transcode_detector_line(line)
            except ValueError as exc:
                print(f"warning: skipping malformed detector frame: {exc}", file=err)
                continue
            doc = {
                "camera_id": camera_id,
                "frame_index": index,
                "timestamp_ms": clock_ms(),
                "detections": [
                    {
                        "class": name,
                        "confidence": confidence,
                        "bbox": {"cx": x + w / 2.0, "cy": y + h / 2.0, "w": w, "h": h},
                    }
                    for name, confidence, x, y, w, h in parsed
                ],
            }
            print(json.dumps(doc, separators=(",", ":")), file=out, flush=True)
            index += 1
    finally:
        process.stdout.close()
        returncode = process.wait()
    if returncode < 0:
        return 128 - returncode  # killed by signal
    return returncode
