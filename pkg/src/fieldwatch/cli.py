"""Command-line front end.

Subcommands:

* ``run``       live engine over a detection stream (file, stdin, or TCP)
* ``replay``    deterministic reprocessing of a recorded stream
* ``calibrate`` print IFOV / meters-per-pixel / angle of view for a camera
* ``analyze``   percent-error table and summary from a CSV of distance trials
* ``simulate``  drive a scenario file through the simulator and engine
* ``config``    print the canonical default configuration, or check one

Exit codes: 0 success, 2 configuration error, 3 input or protocol error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import socket
import sys
from pathlib import Path

from . import __version__
from .optics import CameraIntrinsics, angle_of_view, ifov
from .pipeline import (
    ConfigError,
    Engine,
    EventLog,
    ProtocolError,
    SystemConfig,
    config_to_dict,
    default_config,
    load_config,
)
from .ranging import ErrorRecord, RangingModel, summarize_errors
from .simulator import load_scenario, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3


def _print_warnings(config: SystemConfig) -> None:
    for warning in config.validation_warnings():
        print(f"warning: {warning}", file=sys.stderr)


def _open_input(spec: str):
    """Open the frame source: '-', a file path, or tcp:host:port to listen on."""
    if spec == "-":
        return sys.stdin
    if spec.startswith("tcp:"):
        host, _, port_text = spec[len("tcp:") :].rpartition(":")
        try:
            port = int(port_text)
        except ValueError:
            raise ConfigError(f"invalid TCP input spec {spec!r}; expected tcp:host:port")
        server = socket.create_server((host, port))
        conn, _ = server.accept()
        server.close()
        return conn.makefile("r", encoding="utf-8")
    try:
        return open(spec, encoding="utf-8")
    except OSError as exc:
        raise ProtocolError(f"cannot open input {spec}: {exc}") from exc


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    _print_warnings(config)
    log_path = args.log if args.log else config.log_path

    def echo_commands(frame, decision) -> None:
        for command in decision.commands:
            print(
                json.dumps(
                    {
                        "speaker_id": command.speaker_id,
                        "camera_id": command.camera_id,
                        "frame_index": command.frame_index,
                        "animal_class": command.animal_class,
                        "estimated_distance_m": command.estimated_distance_m,
                        "timestamp_ms": command.timestamp_ms,
                    },
                    separators=(",", ":"),
                ),
                flush=True,
            )

    source = _open_input(args.input)
    try:
        with EventLog(log_path) as log:
            engine = Engine(config, log, replay=False)
            stats = engine.run(source, on_decision=echo_commands)
    finally:
        if source is not sys.stdin:
            source.close()
    print(
        f"processed {stats.frames} frames: {stats.commands} commands, "
        f"{stats.alerts} alerts -> {log_path}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    _print_warnings(config)
    log_path = args.log if args.log else config.log_path
    try:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ProtocolError(f"cannot read fixture {args.input}: {exc}") from exc
    with EventLog(log_path, fresh=True) as log:
        engine = Engine(config, log, replay=True)
        stats = engine.run(lines)
    print(
        f"replayed {stats.frames} frames: {stats.commands} commands, "
        f"{stats.alerts} alerts -> {log_path}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    if (args.d_m is None) != (args.p_m is None):
        raise ConfigError("--d-m and --p-m must be given together")
    try:
        intrinsics = CameraIntrinsics(
            camera_id="calibration",
            focal_length_mm=args.focal_mm,
            pixel_pitch_um=args.pitch_um,
            range_m=args.range_m,
            image_width=1,
            image_height=1,
        )
        aov = angle_of_view(args.d_m, args.p_m) if args.d_m is not None else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    model = RangingModel.for_camera(intrinsics)
    print(f"ifov_rad_per_px: {ifov(intrinsics):.9g}")
    print(f"meters_per_pixel: {model.meters_per_pixel:.9g}")
    if aov is not None:
        print(f"angle_of_view_rad: {aov:.9g}")
        print(f"angle_of_view_deg: {math.degrees(aov):.9g}")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    try:
        with open(args.csv, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"label", "obtained", "actual"}.issubset(
                reader.fieldnames
            ):
                raise ProtocolError(
                    f"{args.csv}: expected CSV header with columns label,obtained,actual"
                )
            rows = list(reader)
    except OSError as exc:
        raise ProtocolError(f"cannot read CSV {args.csv}: {exc}") from exc
    records = []
    for i, row in enumerate(rows):
        try:
            records.append(
                ErrorRecord.from_measurement(
                    row["label"], float(row["obtained"]), float(row["actual"])
                )
            )
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"{args.csv} row {i + 2}: {exc}") from exc
    print(f"{'label':<28}{'obtained':>10}{'actual':>10}{'%error':>10}")
    for record in records:
        print(
            f"{record.label:<28}{record.obtained:>10.2f}{record.actual:>10.2f}"
            f"{record.percent_error:>+10.2f}"
        )
    summary = summarize_errors(records)
    if summary.mean_positive is not None:
        print(f"positive errors: n={summary.positive_count} mean={summary.mean_positive:+.2f}%")
    else:
        print(f"positive errors: n={summary.positive_count}")
    if summary.mean_negative is not None:
        print(f"negative errors: n={summary.negative_count} mean={summary.mean_negative:+.2f}%")
    else:
        print(f"negative errors: n={summary.negative_count}")
    if summary.zero_count:
        print(f"zero errors: n={summary.zero_count}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    metrics = run_scenario(scenario, log_path=args.log, stream_path=args.stream)
    print(json.dumps(metrics.to_dict(), indent=2))
    print(f"event log -> {args.log}", file=sys.stderr)
    print(f"detection stream -> {args.stream}", file=sys.stderr)
    return EXIT_OK


def _cmd_config(args: argparse.Namespace) -> int:
    if args.print_default:
        print(json.dumps(config_to_dict(default_config()), indent=2))
        return EXIT_OK
    if args.check:
        config = load_config(args.check)
        _print_warnings(config)
        print(
            f"ok: {len(config.cameras)} cameras, {len(config.speakers)} speakers, "
            f"frame interval {config.frame_interval_s} s"
        )
        return EXIT_OK
    raise ConfigError("config: nothing to do; pass --print-default or --check FILE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldwatch",
        description="Detection-stream surveillance decision engine and field simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the live engine over a detection stream")
    p_run.add_argument("--config", required=True, help="system config JSON file")
    p_run.add_argument(
        "--input",
        default="-",
        help="frame source: path, '-' for stdin, or tcp:host:port to listen on",
    )
    p_run.add_argument("--log", default=None, help="event log path (default: from config)")
    p_run.set_defaults(func=_cmd_run)

    p_replay = sub.add_parser("replay", help="deterministically reprocess a recorded stream")
    p_replay.add_argument("--config", required=True)
    p_replay.add_argument("--input", required=True, help="recorded stream fixture (JSON lines)")
    p_replay.add_argument("--log", default=None, help="event log path (default: from config)")
    p_replay.set_defaults(func=_cmd_replay)

    p_cal = sub.add_parser("calibrate", help="print derived optics constants for a camera")
    p_cal.add_argument("--focal-mm", type=float, required=True, dest="focal_mm")
    p_cal.add_argument("--pitch-um", type=float, required=True, dest="pitch_um")
    p_cal.add_argument("--range-m", type=float, required=True, dest="range_m")
    p_cal.add_argument("--d-m", type=float, default=None, dest="d_m",
                       help="half-width of the viewed plane, for angle of view")
    p_cal.add_argument("--p-m", type=float, default=None, dest="p_m",
                       help="perpendicular distance to the viewed plane")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_an = sub.add_parser("analyze", help="percent-error table from a CSV of distance trials")
    p_an.add_argument("--csv", required=True, help="CSV with columns label,obtained,actual")
    p_an.set_defaults(func=_cmd_analyze)

    p_sim = sub.add_parser("simulate", help="run a scenario file through the simulator")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sim.add_argument("--log", default="sim_events.jsonl", help="event log output path")
    p_sim.add_argument(
        "--stream", default="sim_stream.jsonl", help="synthesized detection stream output path"
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_cfg = sub.add_parser("config", help="print or check configuration")
    p_cfg.add_argument("--print-default", action="store_true", dest="print_default")
    p_cfg.add_argument("--check", default=None, metavar="FILE")
    p_cfg.set_defaults(func=_cmd_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        return EXIT_OK
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
