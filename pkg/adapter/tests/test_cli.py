import json
import socket
import subprocess
import sys
import threading
from pathlib import Path

from detection_adapter.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


class TestReplayCommand:
    def test_stdout_matches_golden(self, capsys):
        code = main(
            [
                "replay",
                "--annotations", str(FIXTURES / "coco_golden.json"),
                "--camera-id", "c1",
                "--interval", "1.5",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out == (FIXTURES / "golden_lines.jsonl").read_text().splitlines()

    def test_missing_annotations_file(self, capsys):
        assert main(["replay", "--annotations", "/nope.json", "--camera-id", "c1"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_tcp_output(self):
        with socket.create_server(("127.0.0.1", 0)) as server:
            port = server.getsockname()[1]
            received = []

            def accept():
                conn, _ = server.accept()
                with conn, conn.makefile("r", encoding="utf-8") as fh:
                    received.extend(fh.read().splitlines())

            thread = threading.Thread(target=accept)
            thread.start()
            code = main(
                [
                    "replay",
                    "--annotations", str(FIXTURES / "coco_golden.json"),
                    "--camera-id", "c1",
                    "--tcp", f"127.0.0.1:{port}",
                ]
            )
            thread.join(timeout=10)
        assert code == 0
        assert len(received) == 10
        assert json.loads(received[0])["camera_id"] == "c1"


class TestWrapCommand:
    def test_wrap_via_cli(self, capsys):
        frame = '[{"class": "bear", "confidence": 0.8, "bbox": [0.0, 0.0, 10.0, 10.0]}]'
        code = main(
            ["wrap", "--camera-id", "c9", "--", sys.executable, "-c", f"print('{frame}')"]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1
        doc = json.loads(lines[0])
        assert doc["camera_id"] == "c9"
        assert doc["detections"][0]["bbox"]["cx"] == 5.0

    def test_wrap_without_command_is_error(self, capsys):
        assert main(["wrap"]) == 2
        assert "detector command" in capsys.readouterr().err

    def test_wrap_propagates_detector_exit(self):
        code = main(["wrap", "--", sys.executable, "-c", "import sys; sys.exit(7)"])
        assert code == 7


class TestConsoleEntryPoint:
    def test_module_invocation(self):
        result = subprocess.run(
            [
                sys.executable, "-m", "detection_adapter", "replay",
                "--annotations", str(FIXTURES / "coco_golden.json"),
                "--camera-id", "c1",
            ],
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert result.returncode == 0
        assert len(result.stdout.splitlines()) == 10
