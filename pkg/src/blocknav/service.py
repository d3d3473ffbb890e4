"""Network face of the navigation engine.

A SessionHost owns registered documents and live sessions. Commands
arrive over HTTP; tag detections arrive by polling a relay on a fixed
cadence and are applied to every session routed to the reporting device.
Each session is serialized by its own lock, so command handlers and the
detection pump can run concurrently without interleaving inside the
engine. Every committed log entry is fanned out to that session's
subscribers, who first receive a one-shot snapshot so late joiners see a
consistent starting point.

All timestamps come from the host's clock object; tests inject a manual
clock and drive ``pump_once`` directly instead of running the poll loop.
"""

from __future__ import annotations

import json
import logging
import queue
import re
import threading
import uuid
from dataclasses import dataclass, field
from http.server import ThreadingHTTPServer
from typing import Optional

from . import engine, sessionlog
from .clock import SystemClock
from .document import DocumentError, InstructionDocument, parse_document, serialize_document
from .engine import NavState, SessionLogEntry, WrongTriggerMode
from .relay import RelayUnreachable, TagDetection
from .webutil import JsonRequestHandler, read_json_body

log = logging.getLogger(__name__)

DEFAULT_POLL_MS = 500
MAX_BACKOFF_FACTOR = 8


class UnknownDocument(Exception):
    pass


class UnknownSession(Exception):
    pass


@dataclass
class _LiveSession:
    state: NavState
    document_id: str
    lock: threading.RLock = field(default_factory=threading.RLock)
    subscribers: list["queue.Queue[Optional[dict]]"] = field(default_factory=list)
    devices: Optional[frozenset[str]] = None  # None routes every device here


def entry_event(entry: SessionLogEntry) -> dict:
    return {
        "seq": entry.seq,
        "at": entry.at,
        "command": entry.command,
        "tag": entry.tag,
        "from_step": entry.from_step,
        "to_step": entry.to_step,
        "classification": entry.classification,
        "note": entry.note,
    }


class SessionHost:
    def __init__(self, clock=None, relay=None, poll_ms: int = DEFAULT_POLL_MS,
                 arm_window_ms: int = engine.DEFAULT_ARM_WINDOW_MS,
                 consumer_id: Optional[str] = None):
        self.clock = clock or SystemClock()
        self.relay = relay  # anything with fetch_new(consumer_id)
        self.poll_ms = poll_ms
        self.arm_window_ms = arm_window_ms
        self.consumer_id = consumer_id or f"player-{uuid.uuid4().hex[:8]}"
        self._registry_lock = threading.Lock()
        self._documents: dict[str, InstructionDocument] = {}
        self._sessions: dict[str, _LiveSession] = {}
        self._doc_counter = 0
        self._backoff = 1
        self._stop = threading.Event()

    # -- documents ---------------------------------------------------------

    def register_document(self, doc: InstructionDocument) -> str:
        with self._registry_lock:
            self._doc_counter += 1
            doc_id = f"doc-{self._doc_counter}"
            self._documents[doc_id] = doc
            return doc_id

    def register_document_text(self, text: str) -> str:
        return self.register_document(parse_document(text))

    def document(self, document_id: str) -> InstructionDocument:
        with self._registry_lock:
            if document_id not in self._documents:
                raise UnknownDocument(f"unknown document {document_id!r}")
            return self._documents[document_id]

    # -- sessions ----------------------------------------------------------

    def create_session(self, document_id: str, trigger_mode: str = "voice_armed",
                       devices: Optional[list[str]] = None,
                       seed: Optional[int] = None,
                       arm_window_ms: Optional[int] = None) -> dict:
        doc = self.document(document_id)
        state = engine.create_session(
            doc,
            trigger_mode=trigger_mode,
            seed=seed,
            arm_window_ms=arm_window_ms if arm_window_ms is not None else self.arm_window_ms,
            at=self.clock.now_ms(),
        )
        live = _LiveSession(
            state=state,
            document_id=document_id,
            devices=frozenset(devices) if devices else None,
        )
        with self._registry_lock:
            self._sessions[state.session_id] = live
        return self.descriptor(state.session_id)

    def _live(self, session_id: str) -> _LiveSession:
        with self._registry_lock:
            if session_id not in self._sessions:
                raise UnknownSession(f"unknown session {session_id!r}")
            return self._sessions[session_id]

    def _descriptor_locked(self, live: _LiveSession) -> dict:
        s = live.state
        return {
            "session_id": s.session_id,
            "title": s.doc.title,
            "trigger_mode": s.trigger_mode,
            "created_at": s.created_at,
            "current_step": s.current_step,
            "total_steps": s.total_steps,
        }

    def descriptor(self, session_id: str) -> dict:
        live = self._live(session_id)
        with live.lock:
            return self._descriptor_locked(live)

    def session_document_id(self, session_id: str) -> str:
        return self._live(session_id).document_id

    def apply_command(self, session_id: str, variant: str):
        """Returns (descriptor, echo entry, overview view or None)."""
        live = self._live(session_id)
        with live.lock:
            before = len(live.state.log)
            at = self.clock.now_ms()
            view = None
            if variant == engine.CMD_OVERVIEW:
                view = engine.overview(live.state, at=at)
            else:
                engine.apply_command(live.state, variant, at=at)
            fresh = live.state.log[before:]
            self._broadcast(live, fresh)
            return self._descriptor_locked(live), fresh[-1], view

    def overview_snapshot(self, session_id: str) -> dict:
        """Read-only view; the logged variant goes through apply_command."""
        live = self._live(session_id)
        with live.lock:
            s = live.state
            return {
                "current_step": s.current_step,
                "total_steps": s.total_steps,
                "subpart_path": list(s.doc.subpart_path(s.current_step)),
                "visited": sorted(s.visited),
            }

    def log_entries(self, session_id: str) -> list[SessionLogEntry]:
        live = self._live(session_id)
        with live.lock:
            return list(live.state.log)

    # -- event stream ------------------------------------------------------

    def subscribe(self, session_id: str) -> tuple[dict, "queue.Queue[Optional[dict]]"]:
        """Snapshot plus a queue of subsequent entry events, atomically."""
        live = self._live(session_id)
        q: "queue.Queue[Optional[dict]]" = queue.Queue()
        with live.lock:
            s = live.state
            snapshot = {
                "session_id": s.session_id,
                "title": s.doc.title,
                "trigger_mode": s.trigger_mode,
                "created_at": s.created_at,
                "current_step": s.current_step,
                "total_steps": s.total_steps,
                "return_anchor": s.return_anchor,
                "armed": s.armed,
                "visited": sorted(s.visited),
                "last_seq": s.log[-1].seq if s.log else 0,
            }
            live.subscribers.append(q)
        return snapshot, q

    def unsubscribe(self, session_id: str, q) -> None:
        try:
            live = self._live(session_id)
        except UnknownSession:
            return
        with live.lock:
            if q in live.subscribers:
                live.subscribers.remove(q)

    def _broadcast(self, live: _LiveSession, entries: list[SessionLogEntry]):
        for entry in entries:
            event = entry_event(entry)
            for q in live.subscribers:
                q.put(event)

    # -- detection pump ----------------------------------------------------

    def pump_once(self) -> int:
        """One poll: fetch new detections, apply each to every routed
        session in seq order. Returns how many applications happened."""
        if self.relay is None:
            return 0
        fetched = self.relay.fetch_new(self.consumer_id)
        if not fetched:
            return 0
        with self._registry_lock:
            sessions = list(self._sessions.values())
        applied = 0
        for det in fetched:
            for live in sessions:
                if live.devices is not None and det.device_id not in live.devices:
                    continue
                with live.lock:
                    before = len(live.state.log)
                    engine.on_detection(live.state, det, at=self.clock.now_ms())
                    self._broadcast(live, live.state.log[before:])
                applied += 1
        return applied

    def run_pump_forever(self):
        """Live poll loop; RelayUnreachable backs off and keeps trying."""
        while not self._stop.is_set():
            try:
                self.pump_once()
                self._backoff = 1
            except RelayUnreachable as exc:
                log.warning("detection pump: %s (backing off x%d)", exc, self._backoff)
                self._backoff = min(self._backoff * 2, MAX_BACKOFF_FACTOR)
            self.clock.sleep_ms(self.poll_ms * self._backoff)

    def start_pump_thread(self) -> threading.Thread:
        t = threading.Thread(target=self.run_pump_forever, name="detection-pump",
                             daemon=True)
        t.start()
        return t

    def stop(self):
        self._stop.set()
        if hasattr(self.clock, "stop"):
            self.clock.stop()


# -- HTTP layer -------------------------------------------------------------

_SESSION_PATH = re.compile(r"^/sessions/([A-Za-z0-9_-]+)(/(?:command|state|overview|log|events|document))?$")
_DOCUMENT_PATH = re.compile(r"^/documents/([A-Za-z0-9_-]+)$")


class _SessionHandler(JsonRequestHandler):
    host: SessionHost  # injected by make_session_server

    def do_POST(self):
        if self.path == "/documents":
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length).decode("utf-8") if length else ""
            try:
                doc_id = self.host.register_document_text(raw)
            except DocumentError as exc:
                self.send_json({"error": str(exc)}, status=400)
                return
            self.send_json({"document_id": doc_id})
            return

        if self.path == "/sessions":
            try:
                body = read_json_body(self)
                descriptor = self.host.create_session(
                    document_id=body.get("document_id", ""),
                    trigger_mode=body.get("trigger_mode", "voice_armed"),
                    devices=body.get("devices"),
                    seed=body.get("seed"),
                    arm_window_ms=body.get("arm_window_ms"),
                )
            except UnknownDocument as exc:
                self.send_json({"error": str(exc)}, status=404)
                return
            except (WrongTriggerMode, ValueError) as exc:
                self.send_json({"error": str(exc)}, status=400)
                return
            self.send_json(descriptor)
            return

        m = _SESSION_PATH.match(self.path)
        if m and m.group(2) == "/command":
            try:
                body = read_json_body(self)
                variant = body.get("variant", "")
                descriptor, echo, view = self.host.apply_command(m.group(1), variant)
            except UnknownSession as exc:
                self.send_json({"error": str(exc)}, status=404)
                return
            except WrongTriggerMode as exc:
                self.send_json({"error": str(exc)}, status=409)
                return
            except ValueError as exc:
                self.send_json({"error": str(exc)}, status=400)
                return
            payload = {"descriptor": descriptor, "echo": entry_event(echo)}
            if view is not None:
                payload["overview"] = {
                    "current_step": view.current_step,
                    "total_steps": view.total_steps,
                    "subpart_path": list(view.subpart_path),
                    "visited": sorted(view.visited),
                }
            self.send_json(payload)
            return

        self.send_json({"error": "not found"}, status=404)

    def do_GET(self):
        if self.path == "/healthz":
            self.send_json({"ok": True})
            return

        m = _DOCUMENT_PATH.match(self.path)
        if m:
            try:
                doc = self.host.document(m.group(1))
            except UnknownDocument as exc:
                self.send_json({"error": str(exc)}, status=404)
                return
            self.send_text(serialize_document(doc), content_type="application/json")
            return

        m = _SESSION_PATH.match(self.path)
        if not m:
            self.send_json({"error": "not found"}, status=404)
            return
        session_id, tail = m.group(1), m.group(2) or "/state"
        try:
            if tail == "/state":
                self.send_json(self.host.descriptor(session_id))
            elif tail == "/overview":
                self.send_json(self.host.overview_snapshot(session_id))
            elif tail == "/log":
                text = sessionlog.dumps(self.host.log_entries(session_id))
                self.send_text(text, content_type="text/tab-separated-values")
            elif tail == "/document":
                doc = self.host.document(self.host.session_document_id(session_id))
                self.send_text(serialize_document(doc), content_type="application/json")
            elif tail == "/events":
                self._stream_events(session_id)
            else:
                self.send_json({"error": "not found"}, status=404)
        except UnknownSession as exc:
            self.send_json({"error": str(exc)}, status=404)

    def _stream_events(self, session_id: str):
        snapshot, q = self.host.subscribe(session_id)
        try:
            self.send_response(200)
            self.send_cors_headers()
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            self._write_event("snapshot", snapshot)
            while True:
                try:
                    event = q.get(timeout=15.0)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                if event is None:
                    break
                self._write_event("entry", event)
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.host.unsubscribe(session_id, q)

    def _write_event(self, name: str, payload: dict):
        data = json.dumps(payload)
        self.wfile.write(f"event: {name}\ndata: {data}\n\n".encode("utf-8"))
        self.wfile.flush()


def make_session_server(listen: tuple[str, int], host: SessionHost) -> ThreadingHTTPServer:
    """Bind the session HTTP surface; caller runs serve_forever()."""
    handler = type("SessionHandler", (_SessionHandler,), {"host": host})
    server = ThreadingHTTPServer(listen, handler)
    server.daemon_threads = True
    return server
