"""HTTP annotation service backing the human labeling workflow.

Endpoints (all JSON unless noted):

    GET  /sessions
    GET  /sessions/{id}/manifest
    GET  /sessions/{id}/timeline?bucket=N
    GET  /sessions/{id}/skeleton?from=F&to=G
    GET  /sessions/{id}/audio            (WAV bytes, Range supported)
    GET  /sessions/{id}/annotations
    POST /sessions/{id}/annotations      (X-Annotator-Id header required)
    GET  /sessions/{id}/fused

Annotation persistence is an append-only JSONL event log per session,
fsynced before the request is acknowledged. A live record is never mutated:
re-rating appends the new record plus supersede events for every overlapped
older record by the same annotator, so replaying the log reconstructs the
exact live state. Errors come back as ``{"code": ..., "message": ...}``.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .core import SessionManifest
from .errors import ServiceError
from .ingest import AnnotationSpan, load_annotations
from .label_fusion import fuse_frames, spans_to_frames
from .pipeline import LoadedSession, load_session

LOG_FILENAME = "annotation_log.jsonl"


@dataclass
class AnnotationRecord:
    record_id: str
    annotator_id: str
    session_id: str
    start: int
    end: int
    level: int
    created_at: str
    superseded_by: str | None = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "annotator_id": self.annotator_id,
            "session_id": self.session_id,
            "start": self.start,
            "end": self.end,
            "level": self.level,
            "created_at": self.created_at,
            "superseded_by": self.superseded_by,
        }


class AnnotationLog:
    """Append-only event log; the in-memory view is rebuilt by replay."""

    def __init__(self, path: Path, session_id: str):
        self.path = path
        self.session_id = session_id
        self.records: dict[str, AnnotationRecord] = {}
        self._counter = 0
        if path.exists():
            self._replay()

    def _replay(self) -> None:
        self.records.clear()
        self._counter = 0
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event.get("type")
        if kind == "annotate":
            record = AnnotationRecord(
                record_id=event["record_id"],
                annotator_id=event["annotator_id"],
                session_id=event.get("session_id", self.session_id),
                start=int(event["start"]),
                end=int(event["end"]),
                level=int(event["level"]),
                created_at=event.get("created_at", ""),
            )
            self.records[record.record_id] = record
            number = int(record.record_id.split("-")[-1])
            self._counter = max(self._counter, number)
        elif kind == "supersede":
            target = self.records.get(event["record_id"])
            if target is not None:
                target.superseded_by = event["superseded_by"]
        else:
            raise ServiceError(f"unknown event type {kind!r} in {self.path}",
                               status=500, code="corrupt_log")

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        self._apply(event)

    def next_record_id(self) -> str:
        self._counter += 1
        return f"rec-{self._counter}"

    def append_annotate(self, record: AnnotationRecord) -> None:
        self._append({"type": "annotate", **record.to_dict()})

    def append_supersede(self, record_id: str, superseded_by: str,
                         created_at: str) -> None:
        self._append({"type": "supersede", "record_id": record_id,
                      "superseded_by": superseded_by, "created_at": created_at})

    def live_records(self) -> list[AnnotationRecord]:
        return [r for r in self.records.values() if r.superseded_by is None]

    def all_records(self) -> list[AnnotationRecord]:
        return sorted(self.records.values(), key=lambda r: int(r.record_id.split("-")[-1]))


def replay_log_spans(path: str | Path) -> list[AnnotationSpan]:
    """Live spans from a persisted event log (for the offline fuse-labels path)."""
    log = AnnotationLog(Path(path), session_id="")
    return [AnnotationSpan(annotator_id=r.annotator_id, start=r.start,
                           end=r.end, level=r.level)
            for r in log.live_records()]


@dataclass
class SessionState:
    directory: Path
    session: LoadedSession
    audio_energy: np.ndarray
    log: AnnotationLog
    lock: threading.Lock


def _frame_audio_energy(session: LoadedSession) -> np.ndarray:
    aligned = session.aligned
    clock = aligned.clock
    samples = aligned.audio.samples
    rate = aligned.audio.sample_rate
    energy = np.zeros(clock.frame_count)
    t0 = clock.start_time_ms
    for i in range(clock.frame_count):
        a = round((clock.boundary_ms(i) - t0) * rate / 1000)
        b = round((clock.boundary_ms(i + 1) - t0) * rate / 1000)
        b = max(a + 1, min(b, len(samples)))
        a = min(a, len(samples) - 1)
        chunk = samples[a:b]
        energy[i] = float(np.sqrt(np.mean(chunk ** 2))) if len(chunk) else 0.0
    return energy


class AnnotationService:
    """Loads every session under ``root`` and answers the API methods."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions: dict[str, SessionState] = {}
        for manifest_path in sorted(self.root.glob("*/manifest.json")):
            directory = manifest_path.parent
            session = load_session(directory)
            log_path = directory / LOG_FILENAME
            log = AnnotationLog(log_path, session.manifest.session_id)
            if not log_path.exists():
                self._seed_log(log, session)
            self.sessions[session.manifest.session_id] = SessionState(
                directory=directory,
                session=session,
                audio_energy=_frame_audio_energy(session),
                log=log,
                lock=threading.Lock(),
            )

    @staticmethod
    def _seed_log(log: AnnotationLog, session: LoadedSession) -> None:
        """Import the raw annotation spans as the log's initial events."""
        try:
            spans = load_annotations(
                session.manifest.resolve(log.path.parent, session.manifest.annotations_path))
        except OSError:
            spans = []
        for span in spans:
            record = AnnotationRecord(
                record_id=log.next_record_id(),
                annotator_id=span.annotator_id,
                session_id=session.manifest.session_id,
                start=span.start, end=span.end, level=span.level,
                created_at="imported",
            )
            log.append_annotate(record)

    def _state(self, session_id: str) -> SessionState:
        state = self.sessions.get(session_id)
        if state is None:
            raise ServiceError(f"unknown session {session_id!r}", status=404,
                               code="not_found")
        return state

    def list_sessions(self) -> list[dict]:
        out = []
        for sid in sorted(self.sessions):
            state = self.sessions[sid]
            clock = state.session.aligned.clock
            out.append({
                "session_id": sid,
                "game_id": state.session.manifest.game_id,
                "frame_count": clock.frame_count,
                "frame_rate": clock.frame_rate,
                "duration_ms": clock.duration_ms,
                "annotators": sorted({r.annotator_id for r in state.log.live_records()}),
            })
        return out

    def get_manifest(self, session_id: str) -> dict:
        state = self._state(session_id)
        doc = state.session.manifest.to_dict()
        clock = state.session.aligned.clock
        doc["aligned_clock"] = {
            "start_time_ms": clock.start_time_ms,
            "frame_rate": clock.frame_rate,
            "frame_count": clock.frame_count,
        }
        return doc

    def get_timeline(self, session_id: str, bucket: int = 1) -> dict:
        state = self._state(session_id)
        if bucket < 1:
            raise ServiceError(f"bucket must be >= 1, got {bucket}")
        clock = state.session.aligned.clock
        physio = state.session.aligned.physio
        energy = state.audio_energy
        points = []
        for start in range(0, clock.frame_count, bucket):
            stop = min(start + bucket, clock.frame_count)
            points.append({
                "frame": start,
                "time_ms": clock.boundary_ms(start),
                "heart_rate": float(physio[start:stop, 0].max()),
                "breath_rate": float(physio[start:stop, 1].max()),
                "audio_energy": float(energy[start:stop].max()),
            })
        return {
            "session_id": session_id,
            "bucket": bucket,
            "frame_rate": clock.frame_rate,
            "frame_count": clock.frame_count,
            "start_time_ms": clock.start_time_ms,
            "points": points,
        }

    def get_skeleton(self, session_id: str, start: int, stop: int) -> dict:
        state = self._state(session_id)
        clock = state.session.aligned.clock
        if not (0 <= start < stop <= clock.frame_count):
            raise ServiceError(
                f"frame range [{start}, {stop}) outside [0, {clock.frame_count})",
                code="bad_range")
        frames = state.session.aligned.keypoints[start:stop]
        return {"session_id": session_id, "from": start, "to": stop,
                "frames": [[[float(v) for v in joint] for joint in frame]
                           for frame in frames]}

    def audio_path(self, session_id: str) -> Path:
        state = self._state(session_id)
        return state.directory / state.session.manifest.audio_path

    def list_annotations(self, session_id: str) -> dict:
        state = self._state(session_id)
        with state.lock:
            records = [r.to_dict() for r in state.log.all_records()]
        return {"session_id": session_id, "records": records}

    def post_annotation(self, session_id: str, annotator_id: str,
                        start: int, end: int, level: int) -> dict:
        state = self._state(session_id)
        if not annotator_id:
            raise ServiceError("missing annotator id", code="missing_annotator")
        try:
            span = AnnotationSpan(annotator_id=annotator_id, start=int(start),
                                  end=int(end), level=int(level))
        except (TypeError, ValueError) as exc:
            raise ServiceError(f"invalid span: {exc}", code="invalid_span") from exc
        clock = state.session.aligned.clock
        if span.end <= clock.start_time_ms or span.start >= clock.end_time_ms():
            raise ServiceError("span lies entirely outside the session clock",
                               code="invalid_span")
        with state.lock:
            created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
            overlapped = [r for r in state.log.live_records()
                          if r.annotator_id == annotator_id
                          and r.start < span.end and span.start < r.end]
            record = AnnotationRecord(
                record_id=state.log.next_record_id(),
                annotator_id=annotator_id,
                session_id=session_id,
                start=span.start, end=span.end, level=span.level,
                created_at=created,
            )
            state.log.append_annotate(record)
            for old in overlapped:
                state.log.append_supersede(old.record_id, record.record_id, created)
        return {"record_id": record.record_id,
                "superseded": [r.record_id for r in overlapped]}

    def get_fused(self, session_id: str) -> dict:
        state = self._state(session_id)
        clock = state.session.aligned.clock
        with state.lock:
            live = state.log.live_records()
        annotators = sorted({r.annotator_id for r in live})
        if len(annotators) < 2:
            return {"session_id": session_id, "sufficient": False,
                    "annotators": annotators,
                    "levels": [0] * clock.frame_count}
        spans = [AnnotationSpan(annotator_id=r.annotator_id, start=r.start,
                                end=r.end, level=r.level) for r in live]
        matrix = spans_to_frames(spans, clock, annotators)
        fused = fuse_frames(matrix)
        return {"session_id": session_id, "sufficient": True,
                "annotators": annotators,
                "levels": [int(v) for v in fused]}


_ROUTES = [
    ("GET", re.compile(r"^/sessions$"), "route_sessions"),
    ("GET", re.compile(r"^/sessions/([^/]+)/manifest$"), "route_manifest"),
    ("GET", re.compile(r"^/sessions/([^/]+)/timeline$"), "route_timeline"),
    ("GET", re.compile(r"^/sessions/([^/]+)/skeleton$"), "route_skeleton"),
    ("GET", re.compile(r"^/sessions/([^/]+)/audio$"), "route_audio"),
    ("GET", re.compile(r"^/sessions/([^/]+)/annotations$"), "route_annotations"),
    ("POST", re.compile(r"^/sessions/([^/]+)/annotations$"), "route_post_annotation"),
    ("GET", re.compile(r"^/sessions/([^/]+)/fused$"), "route_fused"),
]

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService
    ui_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # silence default stderr chatter
        pass

    # -- plumbing --------------------------------------------------------

    def _send_json(self, payload, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, exc: ServiceError) -> None:
        self._send_json({"code": exc.code, "message": str(exc)}, status=exc.status)

    def _query(self) -> dict:
        from urllib.parse import parse_qs, urlparse
        parsed = urlparse(self.path)
        return {k: v[-1] for k, v in parse_qs(parsed.query).items()}

    def _route(self, method: str) -> None:
        from urllib.parse import urlparse
        path = urlparse(self.path).path
        try:
            for verb, pattern, name in _ROUTES:
                if verb != method:
                    continue
                match = pattern.match(path)
                if match:
                    getattr(self, name)(*match.groups())
                    return
            if method == "GET" and (path == "/" or path.startswith("/ui")):
                self.route_ui(path)
                return
            raise ServiceError(f"no route for {method} {path}", status=404,
                               code="not_found")
        except ServiceError as exc:
            self._send_error_json(exc)
        except Exception as exc:  # noqa: BLE001 - surface as JSON, not a stack dump
            self._send_error_json(ServiceError(str(exc), status=500, code="internal"))

    def do_GET(self):  # noqa: N802
        self._route("GET")

    def do_POST(self):  # noqa: N802
        self._route("POST")

    # -- routes ----------------------------------------------------------

    def route_sessions(self):
        self._send_json({"sessions": self.service.list_sessions()})

    def route_manifest(self, session_id):
        self._send_json(self.service.get_manifest(session_id))

    def route_timeline(self, session_id):
        query = self._query()
        try:
            bucket = int(query.get("bucket", "1"))
        except ValueError:
            raise ServiceError("bucket must be an integer", code="bad_query") from None
        self._send_json(self.service.get_timeline(session_id, bucket=bucket))

    def route_skeleton(self, session_id):
        query = self._query()
        try:
            start = int(query.get("from", "0"))
            stop = int(query["to"]) if "to" in query else start + 1
        except (ValueError, KeyError):
            raise ServiceError("from/to must be integers", code="bad_query") from None
        self._send_json(self.service.get_skeleton(session_id, start, stop))

    def route_annotations(self, session_id):
        self._send_json(self.service.list_annotations(session_id))

    def route_post_annotation(self, session_id):
        annotator = self.headers.get("X-Annotator-Id", "").strip()
        length = int(self.headers.get("Content-Length", "0"))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            raise ServiceError("request body is not valid JSON",
                               code="bad_body") from None
        for key in ("start", "end", "level"):
            if key not in body:
                raise ServiceError(f"body missing {key!r}", code="bad_body")
        result = self.service.post_annotation(
            session_id, annotator, body["start"], body["end"], body["level"])
        self._send_json(result, status=201)

    def route_fused(self, session_id):
        self._send_json(self.service.get_fused(session_id))

    def route_audio(self, session_id):
        path = self.service.audio_path(session_id)
        data = path.read_bytes()
        range_header = self.headers.get("Range")
        start, stop = 0, len(data)
        status = 200
        if range_header:
            match = re.match(r"bytes=(\d*)-(\d*)$", range_header.strip())
            if not match:
                raise ServiceError("malformed Range header", status=416,
                                   code="bad_range")
            a, b = match.groups()
            if a:
                start = int(a)
                stop = int(b) + 1 if b else len(data)
            elif b:
                start = max(0, len(data) - int(b))
            if start >= len(data):
                raise ServiceError("range start beyond end of file", status=416,
                                   code="bad_range")
            stop = min(stop, len(data))
            status = 206
        chunk = data[start:stop]
        self.send_response(status)
        self.send_header("Content-Type", "audio/wav")
        self.send_header("Accept-Ranges", "bytes")
        self.send_header("Content-Length", str(len(chunk)))
        self.send_header("Access-Control-Allow-Origin", "*")
        if status == 206:
            self.send_header("Content-Range", f"bytes {start}-{stop - 1}/{len(data)}")
        self.end_headers()
        self.wfile.write(chunk)

    def route_ui(self, path: str):
        if self.ui_dir is None:
            raise ServiceError("no UI bundle configured (serve with --ui-dir)",
                               status=404, code="no_ui")
        rel = path[len("/ui"):].lstrip("/") if path.startswith("/ui") else ""
        target = (self.ui_dir / (rel or "index.html")).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            raise ServiceError(f"no UI file {rel!r}", status=404, code="not_found")
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         _CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(root: str | Path, port: int = 0,
                ui_dir: str | Path | None = None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    service = AnnotationService(root)
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "ui_dir": Path(ui_dir) if ui_dir else None,
    })
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(root: str | Path, port: int,
                  ui_dir: str | Path | None = None) -> None:
    server = make_server(root, port, ui_dir)
    host, bound_port = server.server_address[:2]
    print(f"serving annotation API on http://{host}:{bound_port} "
          f"({len(server.RequestHandlerClass.service.sessions)} sessions)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
