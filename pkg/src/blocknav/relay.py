"""Detection relay: accepts tag sightings from recognizer devices and hands
each one to polling consumers at most once, in per-device arrival order.

The store keeps a short queue with a per-consumer cursor instead of a
single overwritten "latest detection" slot, so nothing submitted between
two polls is silently lost. Identical (device, tag) reports arriving in a
burst are collapsed: only the first within the dedupe window is stored.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from http.server import ThreadingHTTPServer
from typing import Optional

from .clock import SystemClock
from .webutil import JsonRequestHandler, read_json_body

DEFAULT_DEDUPE_MS = 750
DEFAULT_RETENTION_MS = 60_000


class MalformedReport(Exception):
    pass


class RelayUnreachable(Exception):
    pass


@dataclass(frozen=True)
class TagDetection:
    """One sensed block tag, recorded verbatim plus a server-assigned seq."""

    device_id: str
    tag_id: str
    detected_at: int
    seq: int = 0

    def to_json(self) -> dict:
        return {
            "device_id": self.device_id,
            "tag_id": self.tag_id,
            "detected_at": self.detected_at,
            "seq": self.seq,
        }


@dataclass(frozen=True)
class SubmitResult:
    seq: Optional[int]  # None when deduplicated

    @property
    def deduplicated(self) -> bool:
        return self.seq is None


class RelayStore:
    """Thread-safe detection queue with per-consumer cursors.

    submit and fetch are each atomic with respect to the store; an unknown
    consumer starts at cursor 0 and therefore receives everything retained.
    """

    def __init__(self, clock=None, dedupe_ms: int = DEFAULT_DEDUPE_MS):
        self._clock = clock or SystemClock()
        self._dedupe_ms = dedupe_ms
        self._lock = threading.Lock()
        self._detections: list[TagDetection] = []
        self._next_seq = 1
        self._cursors: dict[str, int] = {}
        # (device, tag) -> arrival time of the last *stored* report
        self._last_stored: dict[tuple[str, str], int] = {}

    @property
    def dedupe_ms(self) -> int:
        return self._dedupe_ms

    def submit(self, device_id: str, tag_id: str, detected_at: int) -> SubmitResult:
        if not device_id or not isinstance(device_id, str):
            raise MalformedReport("device_id must be a non-empty string")
        if not tag_id or not isinstance(tag_id, str):
            raise MalformedReport("tag_id must be a non-empty string")
        if not isinstance(detected_at, int):
            raise MalformedReport("detected_at must be an integer timestamp")
        with self._lock:
            arrived = self._clock.now_ms()
            key = (device_id, tag_id)
            last = self._last_stored.get(key)
            if last is not None and arrived - last < self._dedupe_ms:
                return SubmitResult(seq=None)
            det = TagDetection(device_id=device_id, tag_id=tag_id,
                               detected_at=detected_at, seq=self._next_seq)
            self._next_seq += 1
            self._detections.append(det)
            self._last_stored[key] = arrived
            return SubmitResult(seq=det.seq)

    def fetch_new(self, consumer_id: str) -> list[TagDetection]:
        if not consumer_id:
            raise MalformedReport("consumer id must be non-empty")
        with self._lock:
            cursor = self._cursors.get(consumer_id, 0)
            fresh = [d for d in self._detections if d.seq > cursor]
            if fresh:
                self._cursors[consumer_id] = fresh[-1].seq
            elif consumer_id not in self._cursors:
                self._cursors[consumer_id] = 0
            return fresh

    def purge_older_than(self, age_ms: int) -> int:
        """Drop detections older than now-age that every known consumer has
        seen. With no known consumers nothing counts as delivered, so
        nothing is removed."""
        if age_ms < 0:
            raise MalformedReport("age must be >= 0")
        with self._lock:
            horizon = self._clock.now_ms() - age_ms
            delivered_to_all = min(self._cursors.values()) if self._cursors else 0
            keep = [
                d for d in self._detections
                if d.detected_at >= horizon or d.seq > delivered_to_all
            ]
            removed = len(self._detections) - len(keep)
            self._detections = keep
            return removed

    def stats(self) -> dict:
        with self._lock:
            return {
                "stored": len(self._detections),
                "next_seq": self._next_seq,
                "consumers": dict(self._cursors),
            }


class _RelayHandler(JsonRequestHandler):
    store: RelayStore  # set by make_relay_server
    retention_ms: int = DEFAULT_RETENTION_MS

    def do_POST(self):
        path = urllib.parse.urlparse(self.path)
        if path.path == "/detections":
            try:
                body = read_json_body(self)
                result = self.store.submit(
                    device_id=body.get("device_id"),
                    tag_id=body.get("tag_id"),
                    detected_at=body.get("detected_at"),
                )
            except (MalformedReport, ValueError) as exc:
                # JSONDecodeError is a ValueError: unparseable bodies are 400s
                self.send_json({"error": str(exc)}, status=400)
                return
            if result.deduplicated:
                self.send_json({"deduplicated": True})
            else:
                self.send_json({"seq": result.seq})
        elif path.path == "/admin/purge":
            params = urllib.parse.parse_qs(path.query)
            try:
                age = int(params["age"][0]) if "age" in params else self.retention_ms
                removed = self.store.purge_older_than(age)
            except (ValueError, MalformedReport) as exc:
                self.send_json({"error": str(exc)}, status=400)
                return
            self.send_json({"removed": removed})
        else:
            self.send_json({"error": "not found"}, status=404)

    def do_GET(self):
        path = urllib.parse.urlparse(self.path)
        if path.path == "/detections":
            params = urllib.parse.parse_qs(path.query)
            consumer = params.get("consumer", [""])[0]
            if not consumer:
                self.send_json({"error": "consumer query parameter required"}, status=400)
                return
            fresh = self.store.fetch_new(consumer)
            self.send_json({"detections": [d.to_json() for d in fresh]})
        elif path.path == "/healthz":
            self.send_json({"ok": True})
        else:
            self.send_json({"error": "not found"}, status=404)


def make_relay_server(listen: tuple[str, int], store: RelayStore,
                      retention_ms: int = DEFAULT_RETENTION_MS) -> ThreadingHTTPServer:
    """Bind the relay's HTTP surface; caller runs serve_forever()."""
    handler = type("RelayHandler", (_RelayHandler,),
                   {"store": store, "retention_ms": retention_ms})
    server = ThreadingHTTPServer(listen, handler)
    server.daemon_threads = True
    return server


class RelayClient:
    """Small HTTP client for the relay, used by recognizers and the
    session service's detection pump."""

    def __init__(self, base_url: str, timeout_s: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def _request(self, method: str, path: str, body: Optional[dict] = None) -> dict:
        data = json.dumps(body).encode("utf-8") if body is not None else None
        req = urllib.request.Request(
            self.base_url + path, data=data, method=method,
            headers={"Content-Type": "application/json"} if data else {},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", errors="replace")
            raise MalformedReport(f"relay rejected request ({exc.code}): {detail}") from exc
        except (urllib.error.URLError, ConnectionError, TimeoutError, OSError) as exc:
            raise RelayUnreachable(f"relay at {self.base_url} unreachable: {exc}") from exc

    def submit(self, device_id: str, tag_id: str, detected_at: int) -> SubmitResult:
        out = self._request("POST", "/detections", {
            "device_id": device_id, "tag_id": tag_id, "detected_at": detected_at,
        })
        if out.get("deduplicated"):
            return SubmitResult(seq=None)
        return SubmitResult(seq=int(out["seq"]))

    def fetch_new(self, consumer_id: str) -> list[TagDetection]:
        out = self._request("GET", f"/detections?consumer={urllib.parse.quote(consumer_id)}")
        return [
            TagDetection(device_id=d["device_id"], tag_id=d["tag_id"],
                         detected_at=d["detected_at"], seq=d["seq"])
            for d in out.get("detections", [])
        ]

    def purge(self, age_ms: Optional[int] = None) -> int:
        path = "/admin/purge" if age_ms is None else f"/admin/purge?age={age_ms}"
        return int(self._request("POST", path)["removed"])
