"""Adapter command line.

Two modes, both writing wire-protocol frame lines to stdout or a TCP peer:

* ``adapter replay --annotations FILE --camera-id c1 --interval 1.5``
  replays a ground-truth annotation file as if a perfect detector had
  produced it (the default, ML-free way to drive the engine end to end);
* ``adapter wrap -- <detector command...>`` runs a real detector process
  and transcodes its per-frame JSON output.

Exit codes: 0 success, 2 bad input or arguments; in wrap mode the
detector's own nonzero exit status is passed through.
"""

from __future__ import annotations

import argparse
import socket
import sys

from .coco import AnnotationError, AnnotationSource, replay_lines
from .wrap import wrap_detector

EXIT_OK = 0
EXIT_INPUT = 2


def _open_sink(tcp: str | None):
    if tcp is None:
        return sys.stdout, None
    host, _, port_text = tcp.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise AnnotationError(f"invalid --tcp value {tcp!r}; expected host:port")
    conn = socket.create_connection((host or "127.0.0.1", port))
    return conn.makefile("w", encoding="utf-8", newline="\n"), conn


def _cmd_replay(args: argparse.Namespace) -> int:
    source = AnnotationSource.load(args.annotations)
    sink, conn = _open_sink(args.tcp)
    try:
        for line in replay_lines(
            source, args.camera_id, args.interval, start_ms=args.start_ms
        ):
            print(line, file=sink, flush=True)
    finally:
        if conn is not None:
            sink.close()
            conn.close()
    return EXIT_OK


def _cmd_wrap(args: argparse.Namespace) -> int:
    command = list(args.command)
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        raise AnnotationError("wrap: give the detector command after --")
    sink, conn = _open_sink(args.tcp)
    try:
        return wrap_detector(command, camera_id=args.camera_id, out=sink)
    finally:
        if conn is not None:
            sink.close()
            conn.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapter",
        description="Bridge annotation files or a detector process to the detection-stream protocol.",
    )
    sub = parser.add_subparsers(dest="command_name", required=True)

    p_replay = sub.add_parser("replay", help="replay an annotation file as a detection stream")
    p_replay.add_argument("--annotations", required=True, help="annotation JSON document")
    p_replay.add_argument("--camera-id", required=True, dest="camera_id")
    p_replay.add_argument("--interval", type=float, default=1.5, help="seconds between frames")
    p_replay.add_argument("--start-ms", type=int, default=0, dest="start_ms",
                          help="timestamp of the first frame")
    p_replay.add_argument("--tcp", default=None, help="send to host:port instead of stdout")
    p_replay.set_defaults(func=_cmd_replay)

    p_wrap = sub.add_parser("wrap", help="wrap an external detector process")
    p_wrap.add_argument("--camera-id", default="c1", dest="camera_id")
    p_wrap.add_argument("--tcp", default=None, help="send to host:port instead of stdout")
    p_wrap.add_argument("command", nargs=argparse.REMAINDER, help="detector command after --")
    p_wrap.set_defaults(func=_cmd_wrap)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AnnotationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        return EXIT_OK
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
