"""Threat classification, speaker tracking, and nearest-speaker selection.

A camera stream's speaker registry is the only mutable state in the
engine. Speakers are physically static, so tracking is deliberately dumb:
a detection refreshes the nearest known track within a small pixel radius,
anything unmatched becomes a new track with the next integer ID, and
tracks that have not been seen for a while go stale (the animal may be
occluding them) and are excluded from selection until they reappear.

Frames for one camera must be processed strictly in order by a single
owner; registries of different cameras are independent and can be driven
concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .detections import BBox, Detection, DetectionFrame, center_distance_px, nms
from .ranging import RangingModel, actual_distance

DEFAULT_THREAT_CLASSES = frozenset(
    {"horse", "sheep", "cow", "elephant", "bear", "pig", "boar", "bird"}
)
DEFAULT_SPEAKER_CLASS = "speaker"
DEFAULT_TTL_FRAMES = 20
DEFAULT_MATCH_RADIUS_PX = 50.0


@dataclass(frozen=True)
class ThreatPolicy:
    """Which class labels trigger deterrence and which one marks speakers."""

    threat_classes: frozenset[str] = DEFAULT_THREAT_CLASSES
    speaker_class: str = DEFAULT_SPEAKER_CLASS

    def __post_init__(self) -> None:
        object.__setattr__(self, "threat_classes", frozenset(self.threat_classes))
        if not self.threat_classes:
            raise ValueError("threat_classes must be non-empty")
        if self.speaker_class in self.threat_classes:
            raise ValueError(
                f"speaker class {self.speaker_class!r} cannot also be a threat class"
            )


def is_threat(policy: ThreatPolicy, class_label: str) -> bool:
    """Case-sensitive exact membership in the threat set."""
    return class_label in policy.threat_classes


@dataclass
class SpeakerTrack:
    """Last known pixel position of one integer-ID'd speaker."""

    speaker_id: int
    last_bbox: BBox
    last_seen_frame: int
    camera_id: str


class AlertReason(str, enum.Enum):
    NO_SPEAKER_IN_VIEW = "no_speaker_in_view"
    STALE_SPEAKERS = "stale_speakers"


@dataclass(frozen=True)
class Alert:
    """Raised instead of a command when no speaker is selectable."""

    camera_id: str
    frame_index: int
    animal_class: str
    reason: AlertReason


@dataclass(frozen=True)
class DeterrenceCommand:
    """The engine's output: which speaker fires, for which animal."""

    speaker_id: int
    camera_id: str
    frame_index: int
    animal_class: str
    estimated_distance_m: float
    timestamp_ms: int

    def __post_init__(self) -> None:
        if self.estimated_distance_m < 0:
            raise ValueError(
                f"estimated_distance_m must be >= 0, got {self.estimated_distance_m}"
            )


@dataclass
class SpeakerRegistry:
    """Per-camera registry of speaker tracks. Owned by one stream processor."""

    camera_id: str
    ttl_frames: int = DEFAULT_TTL_FRAMES
    match_radius_px: float = DEFAULT_MATCH_RADIUS_PX
    tracks: dict[int, SpeakerTrack] = field(default_factory=dict)
    next_id: int = 1

    def __post_init__(self) -> None:
        if self.ttl_frames < 1:
            raise ValueError(f"ttl_frames must be >= 1, got {self.ttl_frames}")

    def fresh_tracks(self, frame_index: int) -> list[SpeakerTrack]:
        """Tracks seen recently enough to be selectable, ordered by ID."""
        return [
            t
            for _, t in sorted(self.tracks.items())
            if frame_index - t.last_seen_frame <= self.ttl_frames
        ]


def update_speaker_tracks(
    registry: SpeakerRegistry,
    detections: Iterable[Detection],
    frame_index: int,
    policy: ThreatPolicy,
) -> SpeakerRegistry:
    """Refresh the registry from one frame's speaker detections.

    Matching is greedy by center distance: the globally closest
    (detection, track) pair within the match radius is paired first, then
    the next closest among what remains, and so on. Stale tracks stay
    matchable, so a speaker that reappears where it used to be revives its
    old ID instead of minting a new one. Unmatched detections become new
    tracks numbered with the next unused integer.
    """
    speaker_dets = [
        d for d in detections if d.class_label == policy.speaker_class
    ]
    pairs = [
        (center_distance_px(det.bbox, track.last_bbox), track_id, det_idx)
        for det_idx, det in enumerate(speaker_dets)
        for track_id, track in registry.tracks.items()
    ]
    pairs = [p for p in pairs if p[0] <= registry.match_radius_px]
    pairs.sort()
    matched_tracks: set[int] = set()
    matched_dets: set[int] = set()
    for _, track_id, det_idx in pairs:
        if track_id in matched_tracks or det_idx in matched_dets:
            continue
        matched_tracks.add(track_id)
        matched_dets.add(det_idx)
        track = registry.tracks[track_id]
        track.last_bbox = speaker_dets[det_idx].bbox
        track.last_seen_frame = frame_index
    for det_idx, det in enumerate(speaker_dets):
        if det_idx in matched_dets:
            continue
        track_id = registry.next_id
        registry.next_id += 1
        registry.tracks[track_id] = SpeakerTrack(
            speaker_id=track_id,
            last_bbox=det.bbox,
            last_seen_frame=frame_index,
            camera_id=registry.camera_id,
        )
    return registry


def select_speaker(
    animal: Detection,
    registry: SpeakerRegistry,
    model: RangingModel,
    frame_index: int,
    timestamp_ms: int,
) -> DeterrenceCommand | None:
    """Command for the fresh speaker nearest to the animal, or None.

    Distance ties break toward the smallest speaker ID. Because the
    pixel-to-metric conversion is a fixed positive scale, the argmin is the
    same whether distances are compared in pixels or meters; the metric
    value is computed only for reporting.
    """
    candidates = registry.fresh_tracks(frame_index)
    if not candidates:
        return None
    best = min(
        candidates,
        key=lambda t: (center_distance_px(animal.bbox, t.last_bbox), t.speaker_id),
    )
    distance_m = actual_distance(model, center_distance_px(animal.bbox, best.last_bbox))
    return DeterrenceCommand(
        speaker_id=best.speaker_id,
        camera_id=registry.camera_id,
        frame_index=frame_index,
        animal_class=animal.class_label,
        estimated_distance_m=distance_m,
        timestamp_ms=timestamp_ms,
    )


@dataclass(frozen=True)
class FrameDecision:
    """Everything one frame produced, in emission order."""

    commands: tuple[DeterrenceCommand, ...]
    alerts: tuple[Alert, ...]
    threats: tuple[Detection, ...]


def process_frame(
    frame: DetectionFrame,
    policy: ThreatPolicy,
    registry: SpeakerRegistry,
    model: RangingModel,
    confidence_threshold: float,
    iou_threshold: float,
) -> FrameDecision:
    """Run one frame through the fixed pipeline order.

    NMS first, then the speaker registry is refreshed from the surviving
    detections, then every surviving threat detection gets exactly one
    command naming its nearest fresh speaker. Commands come out ordered by
    descending animal confidence because NMS already emits that order. A
    threat with no selectable speaker yields an alert instead; repeated
    commands for an animal that lingers across frames are intentional (the
    deterrent keeps sounding).

    The registry is mutated in place; the caller owns it between frames.
    """
    kept = nms(
        list(frame.detections),
        iou_threshold=iou_threshold,
        confidence_threshold=confidence_threshold,
    )
    update_speaker_tracks(registry, kept, frame.frame_index, policy)
    threats = tuple(d for d in kept if is_threat(policy, d.class_label))
    commands: list[DeterrenceCommand] = []
    alerts: list[Alert] = []
    for animal in threats:
        command = select_speaker(
            animal, registry, model, frame.frame_index, frame.timestamp_ms
        )
        if command is not None:
            commands.append(command)
            continue
        reason = (
            AlertReason.NO_SPEAKER_IN_VIEW
            if not registry.tracks
            else AlertReason.STALE_SPEAKERS
        )
        alerts.append(
            Alert(
                camera_id=frame.camera_id,
                frame_index=frame.frame_index,
                animal_class=animal.class_label,
                reason=reason,
            )
        )
    return FrameDecision(tuple(commands), tuple(alerts), threats)
