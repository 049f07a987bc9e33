"""Detection-stream surveillance decision engine and field simulator.

Converts object-detection frames into metric distance estimates through a
per-pixel view-angle camera model, selects the speaker nearest to each
detected threat animal, and emits deterrence commands to an append-only
event log. A deterministic 2-D simulator synthesizes detection streams
from world geometry so the whole pipeline is testable without cameras.
"""

from .decision import (
    Alert,
    AlertReason,
    DeterrenceCommand,
    SpeakerRegistry,
    SpeakerTrack,
    ThreatPolicy,
    is_threat,
    process_frame,
    select_speaker,
    update_speaker_tracks,
)
from .detections import (
    BBox,
    Detection,
    DetectionFrame,
    center_distance_px,
    iou,
    nms,
)
from .optics import (
    CameraIntrinsics,
    CameraPose,
    FovGeometry,
    angle_of_view,
    ifov,
    in_field_of_view,
)
from .pipeline import (
    CameraSetup,
    ConfigError,
    Engine,
    EventKind,
    EventLog,
    EventRecord,
    FrameStream,
    ProtocolError,
    SequencingError,
    SpeakerSpec,
    SystemConfig,
    default_config,
    iter_event_records,
    load_config,
    parse_frame_line,
    round_robin_schedule,
    serialize_frame,
)
from .ranging import (
    ErrorRecord,
    ErrorSummary,
    RangingModel,
    actual_distance,
    deterrence_delay,
    percent_error,
    pixel_distance_for,
    summarize_errors,
)
from .simulator import (
    AnimalAgent,
    FieldLayout,
    NoiseModel,
    Scenario,
    ScenarioMetrics,
    generate_rectangular_layout,
    load_scenario,
    run_scenario,
    step,
    synthesize_frame,
)

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AlertReason",
    "AnimalAgent",
    "BBox",
    "CameraIntrinsics",
    "CameraPose",
    "CameraSetup",
    "ConfigError",
    "Detection",
    "DetectionFrame",
    "DeterrenceCommand",
    "Engine",
    "ErrorRecord",
    "ErrorSummary",
    "EventKind",
    "EventLog",
    "EventRecord",
    "FieldLayout",
    "FovGeometry",
    "FrameStream",
    "NoiseModel",
    "ProtocolError",
    "RangingModel",
    "Scenario",
    "ScenarioMetrics",
    "SequencingError",
    "SpeakerRegistry",
    "SpeakerSpec",
    "SpeakerTrack",
    "SystemConfig",
    "ThreatPolicy",
    "actual_distance",
    "angle_of_view",
    "center_distance_px",
    "default_config",
    "deterrence_delay",
    "generate_rectangular_layout",
    "ifov",
    "in_field_of_view",
    "iou",
    "is_threat",
    "iter_event_records",
    "load_config",
    "load_scenario",
    "nms",
    "parse_frame_line",
    "percent_error",
    "pixel_distance_for",
    "process_frame",
    "round_robin_schedule",
    "run_scenario",
    "select_speaker",
    "serialize_frame",
    "step",
    "summarize_errors",
    "synthesize_frame",
    "update_speaker_tracks",
]
