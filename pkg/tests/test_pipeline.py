import json
import math
from pathlib import Path

import pytest

from fieldwatch.decision import AlertReason
from fieldwatch.detections import BBox, Detection, DetectionFrame
from fieldwatch.optics import CameraIntrinsics, CameraPose
from fieldwatch.pipeline import (
    CameraSetup,
    ConfigError,
    Engine,
    EventKind,
    EventLog,
    EventRecord,
    FrameStream,
    ProtocolError,
    SequencingError,
    SystemConfig,
    config_from_dict,
    config_to_dict,
    default_config,
    iter_event_records,
    load_config,
    parse_frame_line,
    round_robin_schedule,
    serialize_frame,
)

FIXTURES = Path(__file__).parent / "fixtures"

VALID_LINE = (
    '{"camera_id":"c1","frame_index":42,"timestamp_ms":1690000000000,'
    '"detections":[{"class":"elephant","confidence":0.91,'
    '"bbox":{"cx":312.5,"cy":201.0,"w":180.0,"h":140.0}}]}'
)


def camera_entry(camera_id="c1", **overrides):
    entry = {
        "camera_id": camera_id,
        "focal_length_mm": 4.0,
        "pixel_pitch_um": 4.0,
        "range_m": 120.0,
        "image_width": 1920,
        "image_height": 1080,
    }
    entry.update(overrides)
    return entry


class TestParseFrameLine:
    def test_valid_line(self):
        frame = parse_frame_line(VALID_LINE)
        assert frame.camera_id == "c1"
        assert frame.frame_index == 42
        assert len(frame.detections) == 1
        assert frame.detections[0].class_label == "elephant"
        assert frame.detections[0].bbox.cx == 312.5

    def test_empty_detections(self):
        frame = parse_frame_line(
            '{"camera_id":"c1","frame_index":0,"timestamp_ms":0,"detections":[]}'
        )
        assert frame.detections == ()

    def test_malformed_json_reports_byte_offset(self):
        with pytest.raises(ProtocolError, match=r"byte offset \d+"):
            parse_frame_line('{"camera_id":"c1", nope}')

    def test_missing_field_named(self):
        with pytest.raises(ProtocolError, match="timestamp_ms"):
            parse_frame_line('{"camera_id":"c1","frame_index":0,"detections":[]}')

    def test_unknown_fields_ignored(self):
        frame = parse_frame_line(
            '{"camera_id":"c1","frame_index":0,"timestamp_ms":0,"detections":[],'
            '"extra":{"model":"v8"},"rssi":-40}'
        )
        assert frame.frame_index == 0

    def test_bad_types_rejected(self):
        with pytest.raises(ProtocolError):
            parse_frame_line('{"camera_id":"c1","frame_index":"0","timestamp_ms":0,"detections":[]}')
        with pytest.raises(ProtocolError):
            parse_frame_line('{"camera_id":"c1","frame_index":0,"timestamp_ms":0,"detections":{}}')
        with pytest.raises(ProtocolError):
            parse_frame_line(
                '{"camera_id":"c1","frame_index":0,"timestamp_ms":0,'
                '"detections":[{"class":"cow","confidence":"high",'
                '"bbox":{"cx":1,"cy":1,"w":1,"h":1}}]}'
            )

    def test_invalid_bbox_rejected(self):
        with pytest.raises(ProtocolError):
            parse_frame_line(
                '{"camera_id":"c1","frame_index":0,"timestamp_ms":0,'
                '"detections":[{"class":"cow","confidence":0.9,'
                '"bbox":{"cx":1,"cy":1,"w":0,"h":1}}]}'
            )

    def test_round_trips_with_serialize(self):
        frame = DetectionFrame(
            "c7",
            3,
            1690000123456,
            (
                Detection(BBox(10.5, 20.25, 30.0, 40.0), "bear", 0.75),
                Detection(BBox(-5.0, 7.0, 1.5, 2.5), "speaker", 1.0),
            ),
        )
        assert parse_frame_line(serialize_frame(frame)) == frame
        assert parse_frame_line(serialize_frame(parse_frame_line(VALID_LINE))) == parse_frame_line(VALID_LINE)


class TestAdapterGoldenLines:
    def test_checked_in_adapter_output_parses(self):
        # contract with the annotation-replay adapter: its frozen golden
        # output must ingest cleanly, in order, with centers intact
        parser = FrameStream()
        lines = (FIXTURES / "adapter_golden_lines.jsonl").read_text().splitlines()
        frames = [parser.parse(line) for line in lines]
        assert [f.frame_index for f in frames] == list(range(10))
        first = frames[0].detections[0]
        assert (first.bbox.cx, first.bbox.cy) == (312.5, 201.0)
        assert all(d.confidence == 1.0 for f in frames for d in f.detections)


class TestFrameStream:
    def test_monotone_indices_accepted(self):
        stream = FrameStream()
        for i in (0, 1, 5):
            stream.parse(
                f'{{"camera_id":"c1","frame_index":{i},"timestamp_ms":0,"detections":[]}}'
            )

    def test_out_of_order_names_camera_and_indices(self):
        stream = FrameStream()
        stream.parse('{"camera_id":"c1","frame_index":7,"timestamp_ms":0,"detections":[]}')
        with pytest.raises(SequencingError, match=r"c1.*5.*7"):
            stream.parse('{"camera_id":"c1","frame_index":5,"timestamp_ms":0,"detections":[]}')

    def test_equal_index_rejected(self):
        stream = FrameStream()
        stream.parse('{"camera_id":"c1","frame_index":3,"timestamp_ms":0,"detections":[]}')
        with pytest.raises(SequencingError):
            stream.parse('{"camera_id":"c1","frame_index":3,"timestamp_ms":0,"detections":[]}')

    def test_cameras_tracked_independently(self):
        stream = FrameStream()
        stream.parse('{"camera_id":"c1","frame_index":9,"timestamp_ms":0,"detections":[]}')
        stream.parse('{"camera_id":"c2","frame_index":0,"timestamp_ms":0,"detections":[]}')


class TestRoundRobin:
    def test_three_cameras_six_ticks(self):
        assert round_robin_schedule(["c1", "c2", "c3"], 6) == [
            "c1", "c2", "c3", "c1", "c2", "c3",
        ]

    def test_single_camera(self):
        assert round_robin_schedule(["c1"], 4) == ["c1"] * 4

    def test_32_cameras_64_ticks(self):
        ids = [f"c{i}" for i in range(32)]
        schedule = round_robin_schedule(ids, 64)
        assert all(schedule.count(c) == 2 for c in ids)

    def test_prefix_fairness(self):
        ids = [f"c{i}" for i in range(5)]
        schedule = round_robin_schedule(ids, 23)
        for prefix in range(1, len(schedule) + 1):
            counts = [schedule[:prefix].count(c) for c in ids]
            assert max(counts) - min(counts) <= 1

    def test_empty_and_oversize_rejected(self):
        with pytest.raises(ConfigError):
            round_robin_schedule([], 3)
        with pytest.raises(ConfigError):
            round_robin_schedule([f"c{i}" for i in range(33)], 3)


class TestSystemConfig:
    def test_load_fixture(self):
        config = load_config(FIXTURES / "replay_config.json")
        assert config.camera_ids() == ["c1", "c2"]
        assert config.frame_interval_s == 1.5
        assert config.speakers[0].pixel == (400.0, 300.0)

    def test_camera_count_limit(self):
        doc = {"cameras": [camera_entry(f"c{i}") for i in range(33)]}
        with pytest.raises(ConfigError, match="32"):
            config_from_dict(doc)

    def test_at_least_one_camera(self):
        with pytest.raises(ConfigError):
            config_from_dict({"cameras": []})

    def test_frame_interval_ceiling(self):
        doc = {"cameras": [camera_entry()], "frame_interval_s": 2.0}
        with pytest.raises(ConfigError, match="1.5"):
            config_from_dict(doc)

    def test_frame_interval_boundary_ok(self):
        doc = {"cameras": [camera_entry()], "frame_interval_s": 1.5}
        assert config_from_dict(doc).frame_interval_s == 1.5

    def test_frame_interval_must_be_positive(self):
        doc = {"cameras": [camera_entry()], "frame_interval_s": 0.0}
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    def test_duplicate_camera_ids_rejected(self):
        doc = {"cameras": [camera_entry("c1"), camera_entry("c1")]}
        with pytest.raises(ConfigError, match="unique"):
            config_from_dict(doc)

    def test_default_config_round_trips(self):
        config = default_config()
        assert config_from_dict(config_to_dict(config)) == config

    def test_wide_lens_warning(self):
        pose = CameraPose(
            position=(0.0, 0.0), boresight=(1.0, 0.0), angle_of_view=math.radians(120.0)
        )
        config = SystemConfig(
            cameras=(
                CameraSetup(CameraIntrinsics("c1", 4.0, 4.0, 120.0, 1920, 1080), pose),
            )
        )
        warnings = config.validation_warnings()
        assert len(warnings) == 1 and "90" in warnings[0]

    def test_ninety_degree_lens_no_warning(self):
        pose = CameraPose(
            position=(0.0, 0.0), boresight=(1.0, 0.0), angle_of_view=math.radians(90.0)
        )
        config = SystemConfig(
            cameras=(
                CameraSetup(CameraIntrinsics("c1", 4.0, 4.0, 120.0, 1920, 1080), pose),
            )
        )
        assert config.validation_warnings() == []

    def test_missing_camera_field_reported(self):
        with pytest.raises(ConfigError, match="focal_length_mm"):
            config_from_dict({"cameras": [{"camera_id": "c1"}]})

    def test_speaker_needs_some_position(self):
        doc = {"cameras": [camera_entry()], "speakers": [{"id": 1}]}
        with pytest.raises(ConfigError):
            config_from_dict(doc)


class TestEventLog:
    def record(self, i=0):
        return EventRecord(
            kind=EventKind.SPEAKER_COMMAND,
            timestamp_ms=1690000000000 + i,
            camera_id="c1",
            payload={"speaker_id": 2, "frame_index": i},
        )

    def test_append_writes_one_flushed_line(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.append(self.record())
            # visible to an independent reader before close
            lines = path.read_text(encoding="utf-8").splitlines()
            assert len(lines) == 1
            assert json.loads(lines[0])["kind"] == "speaker_command"

    def test_round_trip_preserves_records_in_order(self, tmp_path):
        path = tmp_path / "events.jsonl"
        records = [self.record(i) for i in range(5)]
        with EventLog(path) as log:
            for r in records:
                log.append(r)
        assert list(iter_event_records(path)) == records

    def test_append_mode_accumulates_fresh_truncates(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventLog(path) as log:
            log.append(self.record(0))
        with EventLog(path) as log:
            log.append(self.record(1))
        assert len(list(iter_event_records(path))) == 2
        with EventLog(path, fresh=True) as log:
            log.append(self.record(2))
        assert len(list(iter_event_records(path))) == 1


class TestEngine:
    def run_fixture(self, tmp_path, name="events.jsonl"):
        config = load_config(FIXTURES / "replay_config.json")
        lines = (FIXTURES / "replay_stream.jsonl").read_text().splitlines()
        path = tmp_path / name
        with EventLog(path, fresh=True) as log:
            engine = Engine(config, log, replay=True)
            stats = engine.run(lines)
        return path, stats

    def test_fixture_stream_decisions(self, tmp_path):
        path, stats = self.run_fixture(tmp_path)
        assert stats.frames == 8
        records = list(iter_event_records(path))
        kinds = [r.kind for r in records]
        assert kinds.count(EventKind.FRAME_RECEIVED) == 8
        commands = [r for r in records if r.kind == EventKind.SPEAKER_COMMAND]
        alerts = [r for r in records if r.kind == EventKind.ALERT]
        # c2 frame 0: elephant before any speaker was ever seen
        assert len(alerts) == 1
        assert alerts[0].payload["reason"] == AlertReason.NO_SPEAKER_IN_VIEW.value
        # c1 f1 -> speaker 1; c1 f2 bear -> speaker 2; c1 f3 cow -> speaker 1;
        # c2 f3 elephant -> its own track 1
        by_camera = [(r.camera_id, r.payload["speaker_id"]) for r in commands]
        assert by_camera == [("c1", 1), ("c1", 2), ("c1", 1), ("c2", 1)]
        # NMS collapsed the duplicate bear, the off-policy person never appears
        threat_classes = [
            r.payload["class"] for r in records if r.kind == EventKind.THREAT_DETECTED
        ]
        assert threat_classes == ["elephant", "elephant", "bear", "cow", "elephant"]

    def test_replay_timestamps_come_from_frames(self, tmp_path):
        path, _ = self.run_fixture(tmp_path)
        for record in iter_event_records(path):
            assert 1690000000000 <= record.timestamp_ms <= 1690000004500

    def test_replay_is_byte_identical(self, tmp_path):
        path_a, _ = self.run_fixture(tmp_path, "a.jsonl")
        path_b, _ = self.run_fixture(tmp_path, "b.jsonl")
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_unknown_camera_rejected(self, tmp_path):
        config = load_config(FIXTURES / "replay_config.json")
        with EventLog(tmp_path / "log.jsonl") as log:
            engine = Engine(config, log, replay=True)
            with pytest.raises(ProtocolError, match="c9"):
                engine.process_line(
                    '{"camera_id":"c9","frame_index":0,"timestamp_ms":0,"detections":[]}'
                )

    def test_live_mode_uses_injected_clock(self, tmp_path):
        config = load_config(FIXTURES / "replay_config.json")
        ticks = iter(range(100, 200))
        with EventLog(tmp_path / "log.jsonl") as log:
            engine = Engine(config, log, replay=False, clock_ms=lambda: next(ticks))
            engine.process_line(
                '{"camera_id":"c1","frame_index":0,"timestamp_ms":555,"detections":[]}'
            )
        records = list(iter_event_records(tmp_path / "log.jsonl"))
        assert records[0].timestamp_ms == 100

    def test_out_of_order_stream_raises(self, tmp_path):
        config = load_config(FIXTURES / "replay_config.json")
        lines = [
            '{"camera_id":"c1","frame_index":7,"timestamp_ms":0,"detections":[]}',
            '{"camera_id":"c1","frame_index":5,"timestamp_ms":0,"detections":[]}',
        ]
        with EventLog(tmp_path / "log.jsonl") as log:
            engine = Engine(config, log, replay=True)
            with pytest.raises(SequencingError):
                engine.run(lines)
