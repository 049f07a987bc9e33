"""Stream ingestion, configuration, scheduling, and the append-only event log.

The wire protocol is one UTF-8 JSON object per line:

    {"camera_id": "c1", "frame_index": 42, "timestamp_ms": 1690000000000,
     "detections": [{"class": "elephant", "confidence": 0.91,
                     "bbox": {"cx": 312.5, "cy": 201.0, "w": 180.0, "h": 140.0}}]}

Unknown fields are ignored so producers can carry extra metadata. Frame
indices must increase strictly per camera; :class:`FrameStream` enforces
that statefully so replays of a recorded stream fail loudly if the
recording was reordered.

Everything the engine decides is appended to a JSON-lines event log, one
flushed line per record, so a crashed run leaves only whole lines. In
replay mode all event timestamps come from the frames themselves, never
from the host clock, which makes a replayed log byte-identical run after
run.
"""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable, Iterable, Iterator, Sequence

from .decision import (
    DEFAULT_MATCH_RADIUS_PX,
    DEFAULT_TTL_FRAMES,
    FrameDecision,
    SpeakerRegistry,
    ThreatPolicy,
    process_frame,
)
from .detections import (
    DEFAULT_CONFIDENCE_THRESHOLD,
    DEFAULT_IOU_THRESHOLD,
    BBox,
    Detection,
    DetectionFrame,
)
from .optics import CameraIntrinsics, CameraPose, Point
from .ranging import RangingModel

MAX_CAMERAS = 32
MAX_FRAME_INTERVAL_S = 1.5


class ConfigError(ValueError):
    """Invalid system configuration; maps to CLI exit code 2."""


class ProtocolError(ValueError):
    """Malformed or invalid input stream data; maps to CLI exit code 3."""


class SequencingError(ProtocolError):
    """Frame indices for one camera did not increase strictly."""


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SpeakerSpec:
    """A configured speaker: world position (simulator) and/or expected pixels."""

    speaker_id: int
    position: Point | None = None
    pixel: Point | None = None

    def __post_init__(self) -> None:
        if self.speaker_id < 0:
            raise ConfigError(f"speaker id must be >= 0, got {self.speaker_id}")
        if self.position is None and self.pixel is None:
            raise ConfigError(
                f"speaker {self.speaker_id}: needs a world position or a pixel position"
            )


@dataclass(frozen=True)
class CameraSetup:
    """One camera's intrinsics plus, when known, its pose on the ground plane."""

    intrinsics: CameraIntrinsics
    pose: CameraPose | None = None


@dataclass(frozen=True)
class SystemConfig:
    cameras: tuple[CameraSetup, ...]
    speakers: tuple[SpeakerSpec, ...] = ()
    policy: ThreatPolicy = ThreatPolicy()
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    frame_interval_s: float = MAX_FRAME_INTERVAL_S
    ttl_frames: int = DEFAULT_TTL_FRAMES
    match_radius_px: float = DEFAULT_MATCH_RADIUS_PX
    log_path: str = "events.jsonl"

    def __post_init__(self) -> None:
        n = len(self.cameras)
        if n < 1 or n > MAX_CAMERAS:
            raise ConfigError(
                f"camera count must be between 1 and {MAX_CAMERAS}, got {n}"
            )
        ids = [c.intrinsics.camera_id for c in self.cameras]
        if len(set(ids)) != n:
            raise ConfigError(f"camera ids must be unique, got {ids}")
        if not (self.frame_interval_s > 0):
            raise ConfigError(
                f"frame_interval_s must be > 0, got {self.frame_interval_s}"
            )
        if self.frame_interval_s > MAX_FRAME_INTERVAL_S:
            raise ConfigError(
                f"frame_interval_s must not exceed {MAX_FRAME_INTERVAL_S} s "
                f"(the per-frame processing budget), got {self.frame_interval_s}"
            )
        for name, value in (
            ("confidence_threshold", self.confidence_threshold),
            ("iou_threshold", self.iou_threshold),
        ):
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.ttl_frames < 1:
            raise ConfigError(f"ttl_frames must be >= 1, got {self.ttl_frames}")
        if self.match_radius_px <= 0:
            raise ConfigError(
                f"match_radius_px must be > 0, got {self.match_radius_px}"
            )
        speaker_ids = [s.speaker_id for s in self.speakers]
        if len(set(speaker_ids)) != len(speaker_ids):
            raise ConfigError(f"speaker ids must be unique, got {speaker_ids}")

    def camera_ids(self) -> list[str]:
        return [c.intrinsics.camera_id for c in self.cameras]

    def validation_warnings(self) -> list[str]:
        """Non-fatal findings, currently the corner-placement view check.

        A corner camera only covers its two adjacent field edges when its
        angle of view stays at or below 90 degrees; wider lenses are
        accepted but flagged.
        """
        warnings = []
        for cam in self.cameras:
            if cam.pose is None:
                continue
            aov_deg = math.degrees(cam.pose.angle_of_view)
            if aov_deg > 90.0 + 1e-9:
                warnings.append(
                    f"camera {cam.intrinsics.camera_id}: angle of view "
                    f"{aov_deg:.1f} deg exceeds 90 deg; corner placement covers "
                    "both adjacent field edges only up to 90 deg"
                )
        return warnings


def default_config() -> SystemConfig:
    """The canonical single-camera configuration with every default explicit."""
    return SystemConfig(
        cameras=(
            CameraSetup(
                intrinsics=CameraIntrinsics(
                    camera_id="c1",
                    focal_length_mm=4.0,
                    pixel_pitch_um=4.0,
                    range_m=120.0,
                    image_width=1920,
                    image_height=1080,
                )
            ),
        )
    )


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"{context}: missing required field {key!r}")
    return mapping[key]


def _as_point(value, context: str) -> Point:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)
    ):
        raise ConfigError(f"{context}: expected a [x, y] pair, got {value!r}")
    return (float(value[0]), float(value[1]))


def _camera_from_dict(entry: dict) -> CameraSetup:
    context = f"camera {entry.get('camera_id', '?')!r}"
    try:
        intrinsics = CameraIntrinsics(
            camera_id=str(_require(entry, "camera_id", context)),
            focal_length_mm=float(_require(entry, "focal_length_mm", context)),
            pixel_pitch_um=float(_require(entry, "pixel_pitch_um", context)),
            range_m=float(_require(entry, "range_m", context)),
            image_width=int(_require(entry, "image_width", context)),
            image_height=int(_require(entry, "image_height", context)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    pose_entry = entry.get("pose")
    pose = None
    if pose_entry is not None:
        position = _as_point(_require(pose_entry, "position", context), context)
        aov = math.radians(float(_require(pose_entry, "angle_of_view_deg", context)))
        try:
            if "target" in pose_entry:
                pose = CameraPose.facing(
                    position, _as_point(pose_entry["target"], context), aov
                )
            else:
                boresight = _as_point(
                    _require(pose_entry, "boresight", context), context
                )
                norm = math.hypot(*boresight)
                if norm == 0:
                    raise ConfigError(f"{context}: boresight must be non-zero")
                pose = CameraPose(position, (boresight[0] / norm, boresight[1] / norm), aov)
        except ValueError as exc:
            raise ConfigError(f"{context}: {exc}") from exc
    return CameraSetup(intrinsics=intrinsics, pose=pose)


def config_from_dict(doc: dict) -> SystemConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(doc).__name__}")
    cameras_entry = _require(doc, "cameras", "config")
    if not isinstance(cameras_entry, list):
        raise ConfigError("config: 'cameras' must be a list")
    cameras = tuple(_camera_from_dict(c) for c in cameras_entry)
    speakers = []
    for entry in doc.get("speakers", []):
        context = f"speaker {entry.get('id', '?')!r}"
        try:
            speakers.append(
                SpeakerSpec(
                    speaker_id=int(_require(entry, "id", context)),
                    position=(
                        _as_point(entry["position"], context)
                        if "position" in entry
                        else None
                    ),
                    pixel=_as_point(entry["pixel"], context) if "pixel" in entry else None,
                )
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{context}: {exc}") from exc
    nms_entry = doc.get("nms", {})
    try:
        policy = ThreatPolicy(
            threat_classes=frozenset(
                doc.get("threat_classes", sorted(ThreatPolicy().threat_classes))
            ),
            speaker_class=doc.get("speaker_class", ThreatPolicy().speaker_class),
        )
    except ValueError as exc:
        raise ConfigError(f"threat policy: {exc}") from exc
    return SystemConfig(
        cameras=cameras,
        speakers=tuple(speakers),
        policy=policy,
        confidence_threshold=float(
            nms_entry.get("confidence_threshold", DEFAULT_CONFIDENCE_THRESHOLD)
        ),
        iou_threshold=float(nms_entry.get("iou_threshold", DEFAULT_IOU_THRESHOLD)),
        frame_interval_s=float(doc.get("frame_interval_s", MAX_FRAME_INTERVAL_S)),
        ttl_frames=int(doc.get("ttl_frames", DEFAULT_TTL_FRAMES)),
        match_radius_px=float(doc.get("match_radius_px", DEFAULT_MATCH_RADIUS_PX)),
        log_path=str(doc.get("log_path", "events.jsonl")),
    )


def config_to_dict(config: SystemConfig) -> dict:
    cameras = []
    for cam in config.cameras:
        entry = {
            "camera_id": cam.intrinsics.camera_id,
            "focal_length_mm": cam.intrinsics.focal_length_mm,
            "pixel_pitch_um": cam.intrinsics.pixel_pitch_um,
            "range_m": cam.intrinsics.range_m,
            "image_width": cam.intrinsics.image_width,
            "image_height": cam.intrinsics.image_height,
        }
        if cam.pose is not None:
            entry["pose"] = {
                "position": list(cam.pose.position),
                "boresight": list(cam.pose.boresight),
                "angle_of_view_deg": math.degrees(cam.pose.angle_of_view),
            }
        cameras.append(entry)
    speakers = []
    for spk in config.speakers:
        entry = {"id": spk.speaker_id}
        if spk.position is not None:
            entry["position"] = list(spk.position)
        if spk.pixel is not None:
            entry["pixel"] = list(spk.pixel)
        speakers.append(entry)
    return {
        "cameras": cameras,
        "speakers": speakers,
        "threat_classes": sorted(config.policy.threat_classes),
        "speaker_class": config.policy.speaker_class,
        "nms": {
            "confidence_threshold": config.confidence_threshold,
            "iou_threshold": config.iou_threshold,
        },
        "frame_interval_s": config.frame_interval_s,
        "ttl_frames": config.ttl_frames,
        "match_radius_px": config.match_radius_px,
        "log_path": config.log_path,
    }


def load_config(path: str | Path) -> SystemConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


# --------------------------------------------------------------------------
# Wire protocol


def _wire_number(entry: dict, key: str, context: str) -> float:
    value = _field(entry, key, context)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"{context}: field {key!r} must be a number, got {value!r}")
    return float(value)


def _field(entry: dict, key: str, context: str):
    if not isinstance(entry, dict) or key not in entry:
        raise ProtocolError(f"{context}: missing required field {key!r}")
    return entry[key]


def parse_frame_line(line: str) -> DetectionFrame:
    """Parse one wire-protocol line into a frame, ignoring unknown fields."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(
            f"malformed frame line: {exc.msg} at byte offset {exc.pos}"
        ) from exc
    if not isinstance(doc, dict):
        raise ProtocolError(f"frame line must be a JSON object, got {type(doc).__name__}")
    camera_id = _field(doc, "camera_id", "frame")
    if not isinstance(camera_id, str) or not camera_id:
        raise ProtocolError(f"frame: camera_id must be a non-empty string, got {camera_id!r}")
    frame_index = _field(doc, "frame_index", "frame")
    if isinstance(frame_index, bool) or not isinstance(frame_index, int):
        raise ProtocolError(f"frame: frame_index must be an integer, got {frame_index!r}")
    timestamp_ms = _field(doc, "timestamp_ms", "frame")
    if isinstance(timestamp_ms, bool) or not isinstance(timestamp_ms, int):
        raise ProtocolError(f"frame: timestamp_ms must be an integer, got {timestamp_ms!r}")
    detections_entry = _field(doc, "detections", "frame")
    if not isinstance(detections_entry, list):
        raise ProtocolError("frame: detections must be a list")
    detections = []
    for i, entry in enumerate(detections_entry):
        context = f"detection[{i}]"
        label = _field(entry, "class", context)
        if not isinstance(label, str) or not label:
            raise ProtocolError(f"{context}: class must be a non-empty string")
        bbox_entry = _field(entry, "bbox", context)
        try:
            detection = Detection(
                bbox=BBox(
                    cx=_wire_number(bbox_entry, "cx", context),
                    cy=_wire_number(bbox_entry, "cy", context),
                    w=_wire_number(bbox_entry, "w", context),
                    h=_wire_number(bbox_entry, "h", context),
                ),
                class_label=label,
                confidence=_wire_number(entry, "confidence", context),
            )
        except ValueError as exc:
            raise ProtocolError(f"{context}: {exc}") from exc
        detections.append(detection)
    try:
        return DetectionFrame(
            camera_id=camera_id,
            frame_index=frame_index,
            timestamp_ms=timestamp_ms,
            detections=tuple(detections),
        )
    except ValueError as exc:
        raise ProtocolError(f"frame: {exc}") from exc


def serialize_frame(frame: DetectionFrame) -> str:
    """Render a frame as one wire-protocol line (no trailing newline)."""
    doc = {
        "camera_id": frame.camera_id,
        "frame_index": frame.frame_index,
        "timestamp_ms": frame.timestamp_ms,
        "detections": [
            {
                "class": d.class_label,
                "confidence": d.confidence,
                "bbox": {"cx": d.bbox.cx, "cy": d.bbox.cy, "w": d.bbox.w, "h": d.bbox.h},
            }
            for d in frame.detections
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


class FrameStream:
    """Stateful line parser enforcing strictly increasing indices per camera."""

    def __init__(self) -> None:
        self._last_index: dict[str, int] = {}

    def parse(self, line: str) -> DetectionFrame:
        frame = parse_frame_line(line)
        last = self._last_index.get(frame.camera_id)
        if last is not None and frame.frame_index <= last:
            raise SequencingError(
                f"camera {frame.camera_id}: frame_index {frame.frame_index} "
                f"arrived after {last}; indices must increase strictly"
            )
        self._last_index[frame.camera_id] = frame.frame_index
        return frame


# --------------------------------------------------------------------------
# Scheduling


def round_robin_schedule(camera_ids: Sequence[str], ticks: int) -> list[str]:
    """Cyclic dispatch order over the configured cameras.

    Over ``N * k`` ticks every camera receives exactly ``k`` slots, and at
    every prefix the slot counts differ by at most one, mirroring an N-to-1
    video multiplexer stepping through its inputs.
    """
    n = len(camera_ids)
    if n < 1 or n > MAX_CAMERAS:
        raise ConfigError(f"camera count must be between 1 and {MAX_CAMERAS}, got {n}")
    if ticks < 0:
        raise ConfigError(f"ticks must be >= 0, got {ticks}")
    return [camera_ids[i % n] for i in range(ticks)]


# --------------------------------------------------------------------------
# Event log


class EventKind(str, enum.Enum):
    FRAME_RECEIVED = "frame_received"
    THREAT_DETECTED = "threat_detected"
    SPEAKER_COMMAND = "speaker_command"
    ALERT = "alert"


@dataclass(frozen=True)
class EventRecord:
    kind: EventKind
    timestamp_ms: int
    camera_id: str
    payload: dict

    def to_json_line(self) -> str:
        doc = {
            "kind": self.kind.value,
            "timestamp_ms": self.timestamp_ms,
            "camera_id": self.camera_id,
            "payload": self.payload,
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "EventRecord":
        try:
            doc = json.loads(line)
            return cls(
                kind=EventKind(doc["kind"]),
                timestamp_ms=doc["timestamp_ms"],
                camera_id=doc["camera_id"],
                payload=doc["payload"],
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ProtocolError(f"malformed event record: {exc}") from exc


class EventLog:
    """Append-only JSON-lines writer; every record is flushed before return.

    ``fresh=True`` truncates the target first, which replay and simulation
    use so that identical runs produce byte-identical files. Within a run
    the log only ever grows, and append order matches timestamp order
    (live timestamps are monotone; replay timestamps follow the ordered
    input stream). I/O failures propagate: the engine halts rather than
    silently dropping a command.
    """

    def __init__(self, path: str | Path, fresh: bool = False) -> None:
        self.path = Path(path)
        self._fh: IO[str] = open(self.path, "w" if fresh else "a", encoding="utf-8")

    def append(self, record: EventRecord) -> None:
        self._fh.write(record.to_json_line() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def iter_event_records(path: str | Path) -> Iterator[EventRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EventRecord.from_json_line(line)


# --------------------------------------------------------------------------
# Engine


def _host_clock_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass
class EngineStats:
    frames: int = 0
    commands: int = 0
    alerts: int = 0


class Engine:
    """Drives decision processing over a parsed frame stream and logs events.

    One engine owns the per-camera speaker registries; frames for a given
    camera must arrive in order (the stream parser enforces the index part
    of that). In replay mode event timestamps are taken from the frames so
    reprocessing a recorded stream reproduces the log byte for byte; in
    live mode they come from the host clock.
    """

    def __init__(
        self,
        config: SystemConfig,
        log: EventLog,
        replay: bool = False,
        clock_ms: Callable[[], int] = _host_clock_ms,
    ) -> None:
        self.config = config
        self.log = log
        self.replay = replay
        self._clock_ms = clock_ms
        self._stream = FrameStream()
        self._models = {
            cam.intrinsics.camera_id: RangingModel.for_camera(cam.intrinsics)
            for cam in config.cameras
        }
        self._registries = {
            camera_id: SpeakerRegistry(
                camera_id=camera_id,
                ttl_frames=config.ttl_frames,
                match_radius_px=config.match_radius_px,
            )
            for camera_id in self._models
        }
        self.stats = EngineStats()

    def registry(self, camera_id: str) -> SpeakerRegistry:
        return self._registries[camera_id]

    def process_line(self, line: str) -> FrameDecision:
        return self.process_frame(self._stream.parse(line))

    def process_frame(self, frame: DetectionFrame) -> FrameDecision:
        if frame.camera_id not in self._models:
            raise ProtocolError(
                f"frame for unknown camera {frame.camera_id!r}; "
                f"configured cameras: {sorted(self._models)}"
            )
        ts = frame.timestamp_ms if self.replay else self._clock_ms()
        self.log.append(
            EventRecord(
                kind=EventKind.FRAME_RECEIVED,
                timestamp_ms=ts,
                camera_id=frame.camera_id,
                payload={
                    "frame_index": frame.frame_index,
                    "detection_count": len(frame.detections),
                },
            )
        )
        decision = process_frame(
            frame,
            self.config.policy,
            self._registries[frame.camera_id],
            self._models[frame.camera_id],
            confidence_threshold=self.config.confidence_threshold,
            iou_threshold=self.config.iou_threshold,
        )
        for threat in decision.threats:
            self.log.append(
                EventRecord(
                    kind=EventKind.THREAT_DETECTED,
                    timestamp_ms=ts,
                    camera_id=frame.camera_id,
                    payload={
                        "frame_index": frame.frame_index,
                        "class": threat.class_label,
                        "confidence": threat.confidence,
                    },
                )
            )
        for command in decision.commands:
            self.log.append(
                EventRecord(
                    kind=EventKind.SPEAKER_COMMAND,
                    timestamp_ms=ts,
                    camera_id=command.camera_id,
                    payload={
                        "speaker_id": command.speaker_id,
                        "frame_index": command.frame_index,
                        "animal_class": command.animal_class,
                        "estimated_distance_m": command.estimated_distance_m,
                        "frame_timestamp_ms": command.timestamp_ms,
                    },
                )
            )
        for alert in decision.alerts:
            self.log.append(
                EventRecord(
                    kind=EventKind.ALERT,
                    timestamp_ms=ts,
                    camera_id=alert.camera_id,
                    payload={
                        "frame_index": alert.frame_index,
                        "animal_class": alert.animal_class,
                        "reason": alert.reason.value,
                    },
                )
            )
        self.stats.frames += 1
        self.stats.commands += len(decision.commands)
        self.stats.alerts += len(decision.alerts)
        return decision

    def run(
        self,
        lines: Iterable[str],
        on_decision: Callable[[DetectionFrame, FrameDecision], None] | None = None,
    ) -> EngineStats:
        for raw in lines:
            line = raw.strip()
            if not line:
                continue
            frame = self._stream.parse(line)
            decision = self.process_frame(frame)
            if on_decision is not None:
                on_decision(frame, decision)
        return self.stats
