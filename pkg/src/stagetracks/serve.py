"""Local HTTP service exposing pipeline runs and stream playback to the viewer.

Single-analyst tool for the interactive refinement loop: the viewer reads
the current config, edits it, triggers a re-run, polls status, and then
streams the refreshed outputs.  One run at a time; config changes are
rejected while a run is in flight.  All endpoints answer JSON except the
stream payload routes, and every response carries a version header.

Endpoints:
    GET  /config            current pipeline config
    PUT  /config            replace config (409 while running, 422 invalid)
    POST /run               start a run (202 + status URL, 409 if running)
    GET  /status            idle | running(stage, progress) | failed(message)
    GET  /tracks            tracks.json of the last run
    GET  /stream/meta       stream header as JSON
    GET  /stream/frames/{k} binary payload of frame k (via the seek index)
    GET  /stream            whole binary, supports single byte ranges
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, io
from .errors import StageTracksError
from .model import PipelineConfig
from .pipeline import PipelineInputs, run_pipeline

log = logging.getLogger(__name__)

VERSION_HEADER = "X-StageTracks-Version"

_FRAME_ROUTE = re.compile(r"^/stream/frames/(\d+)$")
_RANGE = re.compile(r"^bytes=(\d*)-(\d*)$")

_INPUT_FILES = {
    "detections": "detections.json",
    "masks": "masks.json",
    "cloud": "pointcloud.json",
    "features": "features.json",
    "extrinsics": "extrinsics.json",
}


class SessionState:
    """Mutable server-side state guarded by one lock."""

    def __init__(self, project_dir: Path):
        self.project_dir = Path(project_dir)
        self.out_dir = self.project_dir / "out"
        self.lock = threading.Lock()
        self.config = self._initial_config()
        self.status: dict = {"state": "idle"}
        self.manifest: Optional[dict] = None
        self._index_cache: Optional[tuple[tuple, io.StreamHeader, np.ndarray, int]] = None

    def _initial_config(self) -> PipelineConfig:
        path = self.project_dir / "config.json"
        if path.exists():
            return PipelineConfig.from_dict(json.loads(path.read_text()))
        return PipelineConfig()

    @property
    def running(self) -> bool:
        return self.status.get("state") == "running"

    def stream_path(self) -> Path:
        return self.out_dir / "stream.bin"

    def tracks_path(self) -> Path:
        return self.out_dir / "tracks.json"

    def stream_index(self):
        """(header, offsets, size) for the current stream file, cached by stat."""
        path = self.stream_path()
        stat = path.stat()
        key = (stat.st_mtime_ns, stat.st_size)
        with self.lock:
            if self._index_cache and self._index_cache[0] == key:
                return self._index_cache[1:]
        with open(path, "rb") as f:
            header, offsets, size = io.read_stream_index(f)
        with self.lock:
            self._index_cache = (key, header, offsets, size)
        return header, offsets, size

    def inputs(self) -> PipelineInputs:
        paths = {}
        for name, filename in _INPUT_FILES.items():
            p = self.project_dir / filename
            paths[name] = p if (name == "detections" or p.exists()) else None
        return PipelineInputs(**paths)

    def start_run(self) -> bool:
        """Flip to running if idle; False when a run is already in flight."""
        with self.lock:
            if self.running:
                return False
            self.status = {"state": "running", "stage": "start", "progress": 0.0}
            config = self.config
        thread = threading.Thread(target=self._run, args=(config,), daemon=True)
        thread.start()
        return True

    def _run(self, config: PipelineConfig):
        def on_stage(stage: str, progress: float):
            with self.lock:
                if self.status.get("state") == "running":
                    self.status = {"state": "running", "stage": stage, "progress": progress}

        try:
            manifest = run_pipeline(config, self.inputs(), self.out_dir, on_stage=on_stage)
        except (StageTracksError, OSError) as e:
            with self.lock:
                self.status = {"state": "failed", "message": str(e)}
            return
        with self.lock:
            self.manifest = manifest.to_dict()
            self.status = {"state": "idle"}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def state(self) -> SessionState:
        return self.server.state  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    # -- helpers -----------------------------------------------------------
    def _send(self, code: int, body: bytes, content_type: str, extra: Optional[dict] = None):
        self.send_response(code)
        self.send_header(VERSION_HEADER, __version__)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        # the viewer is served from another local port; this is a
        # local-network analyst tool with no credentials to protect
        self.send_header("Access-Control-Allow-Origin", "*")
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header(VERSION_HEADER, __version__)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Range")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _json(self, code: int, doc: dict, extra: Optional[dict] = None):
        self._send(code, json.dumps(doc).encode(), "application/json", extra)

    def _error(self, code: int, message: str, **fields):
        self._json(code, {"error": message, **fields})

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    # -- routes ------------------------------------------------------------
    def do_GET(self):
        state = self.state
        path = self.path.split("?", 1)[0]
        if path == "/config":
            with state.lock:
                doc = state.config.to_dict()
            self._json(200, doc)
        elif path == "/status":
            with state.lock:
                doc = dict(state.status)
                if doc.get("state") == "idle":
                    doc["manifest"] = state.manifest
            self._json(200, doc)
        elif path == "/tracks":
            self._file(state.tracks_path(), "application/json")
        elif path == "/stream/meta":
            self._stream_meta()
        elif path == "/stream":
            self._stream_full()
        else:
            m = _FRAME_ROUTE.match(path)
            if m:
                self._stream_frame(int(m.group(1)))
            else:
                self._error(404, f"unknown path {path}")

    def do_PUT(self):
        body = self._body()  # always drain the body, or keep-alive desyncs
        if self.path.split("?", 1)[0] != "/config":
            self._error(404, f"unknown path {self.path}")
            return
        state = self.state
        if state.running:
            self._error(409, "a run is in flight; config is locked")
            return
        try:
            doc = json.loads(body.decode("utf-8"))
            config = PipelineConfig.from_dict(doc)
        except (ValueError, TypeError) as e:
            self._json(422, {"errors": [{"field": _guess_field(str(e)), "message": str(e)}]})
            return
        problems = config.violations()
        if problems:
            errors = [
                {"field": p.split(":", 1)[0], "message": p.split(":", 1)[1].strip()}
                for p in problems
            ]
            self._json(422, {"errors": errors})
            return
        with state.lock:
            if state.running:
                self._error(409, "a run is in flight; config is locked")
                return
            state.config = config
        self._json(200, config.to_dict())

    def do_POST(self):
        self._body()  # drain any body to keep the connection in sync
        if self.path.split("?", 1)[0] != "/run":
            self._error(404, f"unknown path {self.path}")
            return
        if self.state.start_run():
            self._json(202, {"status_url": "/status"})
        else:
            self._error(409, "a run is already in flight")

    # -- stream serving ----------------------------------------------------
    def _file(self, path: Path, content_type: str):
        if not path.exists():
            self._error(404, f"{path.name} not available yet; run the pipeline first")
            return
        self._send(200, path.read_bytes(), content_type)

    def _stream_meta(self):
        state = self.state
        if not state.stream_path().exists():
            self._error(404, "stream not available yet; run the pipeline first")
            return
        header, _, _ = state.stream_index()
        self._json(200, header.to_dict())

    def _stream_frame(self, k: int):
        state = self.state
        if not state.stream_path().exists():
            self._error(404, "stream not available yet; run the pipeline first")
            return
        header, offsets, size = state.stream_index()
        if not 0 <= k < header.frame_count:
            self._error(404, f"frame {k} out of range [0, {header.frame_count})")
            return
        with open(state.stream_path(), "rb") as f:
            payload = io.read_stream_frame_at(f, offsets, size, k)
        self._send(200, payload, "application/octet-stream")

    def _stream_full(self):
        state = self.state
        path = state.stream_path()
        if not path.exists():
            self._error(404, "stream not available yet; run the pipeline first")
            return
        size = path.stat().st_size
        range_header = self.headers.get("Range")
        if not range_header:
            self._send(
                200, path.read_bytes(), "application/octet-stream", {"Accept-Ranges": "bytes"}
            )
            return
        m = _RANGE.match(range_header.strip())
        if not m or (not m.group(1) and not m.group(2)):
            self._send(416, b"", "application/octet-stream", {"Content-Range": f"bytes */{size}"})
            return
        if m.group(1):
            start = int(m.group(1))
            end = int(m.group(2)) if m.group(2) else size - 1
        else:  # suffix range: last N bytes
            start = max(0, size - int(m.group(2)))
            end = size - 1
        end = min(end, size - 1)
        if start > end or start >= size:
            self._send(416, b"", "application/octet-stream", {"Content-Range": f"bytes */{size}"})
            return
        with open(path, "rb") as f:
            f.seek(start)
            chunk = f.read(end - start + 1)
        self._send(
            206,
            chunk,
            "application/octet-stream",
            {"Content-Range": f"bytes {start}-{end}/{size}", "Accept-Ranges": "bytes"},
        )


def _guess_field(message: str) -> str:
    m = re.search(r"unknown config field: (\w+)", message)
    if m:
        return m.group(1)
    m = re.search(r"'(\w+)'", message)
    return m.group(1) if m else "config"


class StageTracksServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, state: SessionState):
        super().__init__(address, _Handler)
        self.state = state


def create_server(project_dir: Path, host: str = "127.0.0.1", port: int = 8008) -> StageTracksServer:
    """Build the server bound to host:port (port 0 picks a free one)."""
    return StageTracksServer((host, port), SessionState(Path(project_dir)))
