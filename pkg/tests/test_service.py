import json
import socket
import threading
import urllib.error
import urllib.request

import pytest

from blocknav.clock import ManualClock
from blocknav.document import serialize_document
from blocknav.relay import RelayStore
from blocknav.service import (
    SessionHost,
    UnknownDocument,
    UnknownSession,
    make_session_server,
)
from blocknav.engine import WrongTriggerMode
from blocknav.sessionlog import loads as parse_log


def make_host(with_relay=False, **kwargs):
    clock = ManualClock(0)
    relay = RelayStore(clock=clock) if with_relay else None
    host = SessionHost(clock=clock, relay=relay, consumer_id="player-test", **kwargs)
    return host, clock, relay


class TestDocumentsAndSessions:
    def test_document_ids_are_sequential(self, model28, truck):
        host, _, _ = make_host()
        assert host.register_document(model28) == "doc-1"
        assert host.register_document(truck) == "doc-2"
        assert host.document("doc-2").title == truck.title

    def test_unknown_document(self):
        host, _, _ = make_host()
        with pytest.raises(UnknownDocument):
            host.document("doc-9")
        with pytest.raises(UnknownDocument):
            host.create_session("doc-9")

    def test_create_session_descriptor(self, model28):
        host, _, _ = make_host()
        doc_id = host.register_document(model28)
        desc = host.create_session(doc_id, seed=5)
        assert desc["title"] == model28.title
        assert desc["current_step"] == 1
        assert desc["total_steps"] == 28
        assert desc["trigger_mode"] == "voice_armed"
        assert host.descriptor(desc["session_id"]) == desc

    def test_unknown_session(self):
        host, _, _ = make_host()
        with pytest.raises(UnknownSession):
            host.descriptor("nope")
        with pytest.raises(UnknownSession):
            host.apply_command("nope", "next")

    def test_bad_trigger_mode(self, truck):
        host, _, _ = make_host()
        doc_id = host.register_document(truck)
        with pytest.raises(WrongTriggerMode):
            host.create_session(doc_id, trigger_mode="telepathy")


class TestCommands:
    def test_next_moves_and_echoes(self, truck):
        host, clock, _ = make_host()
        sid = host.create_session(host.register_document(truck))["session_id"]
        clock.advance(1000)
        desc, echo, view = host.apply_command(sid, "next")
        assert desc["current_step"] == 2
        assert echo.command == "next" and echo.at == 1000
        assert view is None

    def test_overview_returns_view_and_logs(self, model28):
        host, _, _ = make_host()
        sid = host.create_session(host.register_document(model28))["session_id"]
        host.apply_command(sid, "next")
        _, echo, view = host.apply_command(sid, "overview")
        assert echo.command == "overview"
        assert view.current_step == 2
        assert view.subpart_path == ("Base plate",)
        assert len(host.log_entries(sid)) == 3  # start, next, overview

    def test_overview_snapshot_is_pure(self, model28):
        host, _, _ = make_host()
        sid = host.create_session(host.register_document(model28))["session_id"]
        before = len(host.log_entries(sid))
        snap = host.overview_snapshot(sid)
        assert snap == {"current_step": 1, "total_steps": 28,
                        "subpart_path": [], "visited": [1]}
        assert len(host.log_entries(sid)) == before

    def test_bad_variant(self, truck):
        host, _, _ = make_host()
        sid = host.create_session(host.register_document(truck))["session_id"]
        with pytest.raises(ValueError):
            host.apply_command(sid, "teleport")

    def test_arming_needs_voice_mode(self, truck):
        host, _, _ = make_host()
        doc_id = host.register_document(truck)
        sid = host.create_session(doc_id, trigger_mode="detection_triggered")["session_id"]
        with pytest.raises(WrongTriggerMode):
            host.apply_command(sid, "this_one")


class TestSubscriptions:
    def test_snapshot_then_entries(self, truck):
        host, _, _ = make_host()
        sid = host.create_session(host.register_document(truck))["session_id"]
        host.apply_command(sid, "next")
        snapshot, q = host.subscribe(sid)
        assert snapshot["current_step"] == 2
        assert snapshot["last_seq"] == 2
        assert snapshot["visited"] == [1, 2]
        host.apply_command(sid, "next")
        event = q.get(timeout=1)
        assert event["seq"] == 3 and event["command"] == "next" and event["to_step"] == 3

    def test_two_subscribers_see_identical_streams(self, truck):
        host, _, _ = make_host()
        sid = host.create_session(host.register_document(truck))["session_id"]
        _, qa = host.subscribe(sid)
        _, qb = host.subscribe(sid)
        for _ in range(3):
            host.apply_command(sid, "next")
        a = [qa.get(timeout=1) for _ in range(3)]
        b = [qb.get(timeout=1) for _ in range(3)]
        assert a == b
        assert [e["seq"] for e in a] == [2, 3, 4]

    def test_unsubscribe_stops_delivery(self, truck):
        host, _, _ = make_host()
        sid = host.create_session(host.register_document(truck))["session_id"]
        _, q = host.subscribe(sid)
        host.unsubscribe(sid, q)
        host.apply_command(sid, "next")
        assert q.empty()


class TestDetectionPump:
    def test_armed_session_jumps_with_relay_seq_note(self, truck):
        host, clock, relay = make_host(with_relay=True)
        sid = host.create_session(host.register_document(truck))["session_id"]
        host.apply_command(sid, "this_one")
        clock.advance(100)
        relay.submit("cam", "window", detected_at=100)
        assert host.pump_once() == 1
        entry = host.log_entries(sid)[-1]
        assert entry.command == "tag_detected"
        assert entry.classification == "nonlinear"
        assert entry.to_step == 6
        assert "relay_seq=1" in entry.note

    def test_exactly_once(self, truck):
        host, clock, relay = make_host(with_relay=True)
        sid = host.create_session(host.register_document(truck))["session_id"]
        host.apply_command(sid, "this_one")
        relay.submit("cam", "window", detected_at=0)
        assert host.pump_once() == 1
        assert host.pump_once() == 0
        seen = [e for e in host.log_entries(sid) if e.command == "tag_detected"]
        assert len(seen) == 1

    def test_unarmed_detection_is_noop(self, truck):
        host, clock, relay = make_host(with_relay=True)
        sid = host.create_session(host.register_document(truck))["session_id"]
        relay.submit("cam", "window", detected_at=0)
        host.pump_once()
        entry = host.log_entries(sid)[-1]
        assert entry.classification == "noop"
        assert "unsolicited_detection" in entry.note
        assert host.descriptor(sid)["current_step"] == 1

    def test_device_routing(self, truck):
        host, clock, relay = make_host(with_relay=True)
        doc_id = host.register_document(truck)
        routed = host.create_session(doc_id, devices=["camA"])["session_id"]
        open_sid = host.create_session(doc_id)["session_id"]
        relay.submit("camB", "window", detected_at=0)
        assert host.pump_once() == 1  # only the unrestricted session
        assert len(host.log_entries(routed)) == 1  # still just session_start
        assert len(host.log_entries(open_sid)) == 2

    def test_multiple_detections_in_seq_order(self, truck):
        host, clock, relay = make_host(with_relay=True)
        sid = host.create_session(host.register_document(truck))["session_id"]
        relay.submit("cam", "window", detected_at=0)
        clock.advance(1000)
        relay.submit("cam", "slope", detected_at=1000)
        assert host.pump_once() == 2
        tags = [e.tag for e in host.log_entries(sid) if e.command == "tag_detected"]
        assert tags == ["window", "slope"]

    def test_no_relay_is_quiet(self, truck):
        host, _, _ = make_host(with_relay=False)
        host.create_session(host.register_document(truck))
        assert host.pump_once() == 0

    def test_detection_triggered_mode_needs_no_arming(self, truck):
        host, clock, relay = make_host(with_relay=True)
        doc_id = host.register_document(truck)
        sid = host.create_session(doc_id, trigger_mode="detection_triggered")["session_id"]
        relay.submit("cam", "window", detected_at=0)
        host.pump_once()
        assert host.descriptor(sid)["current_step"] == 6


# -- HTTP layer ---------------------------------------------------------------


@pytest.fixture()
def live(model28):
    host, clock, relay = make_host(with_relay=True)
    server = make_session_server(("127.0.0.1", 0), host)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, host, clock, relay
    server.shutdown()
    server.server_close()


def http(base, method, path, body=None, raw_body=None):
    if raw_body is not None:
        data = raw_body.encode()
    elif body is not None:
        data = json.dumps(body).encode()
    else:
        data = None
    req = urllib.request.Request(base + path, data=data, method=method)
    with urllib.request.urlopen(req, timeout=5) as resp:
        payload = resp.read().decode()
        ctype = resp.headers.get("Content-Type", "")
        return resp.status, json.loads(payload) if "json" in ctype else payload


def expect_status(code, fn):
    with pytest.raises(urllib.error.HTTPError) as err:
        fn()
    assert err.value.code == code


class TestHttpSurface:
    def test_full_lifecycle(self, live, model28):
        base, _, _, _ = live
        _, out = http(base, "POST", "/documents", raw_body=serialize_document(model28))
        doc_id = out["document_id"]

        _, desc = http(base, "POST", "/sessions", body={"document_id": doc_id, "seed": 1})
        sid = desc["session_id"]
        assert desc["current_step"] == 1

        _, out = http(base, "POST", f"/sessions/{sid}/command", body={"variant": "next"})
        assert out["descriptor"]["current_step"] == 2
        assert out["echo"]["command"] == "next" and out["echo"]["seq"] == 2
        assert "overview" not in out

        _, out = http(base, "POST", f"/sessions/{sid}/command", body={"variant": "overview"})
        assert out["overview"]["subpart_path"] == ["Base plate"]

        _, state = http(base, "GET", f"/sessions/{sid}/state")
        assert state["current_step"] == 2

        _, snap = http(base, "GET", f"/sessions/{sid}/overview")
        assert snap["visited"] == [1, 2]

        _, text = http(base, "GET", f"/sessions/{sid}/log")
        entries = parse_log(text)
        assert [e.command for e in entries] == ["session_start", "next", "overview"]

        _, doc_json = http(base, "GET", f"/sessions/{sid}/document")
        assert doc_json == json.loads(serialize_document(model28))

        _, doc_json2 = http(base, "GET", f"/documents/{doc_id}")
        assert doc_json2 == doc_json

        _, ok = http(base, "GET", "/healthz")
        assert ok == {"ok": True}

    def test_error_statuses(self, live, model28):
        base, _, _, _ = live
        expect_status(400, lambda: http(base, "POST", "/documents", raw_body="{bad json"))
        expect_status(404, lambda: http(base, "POST", "/sessions",
                                        body={"document_id": "doc-99"}))
        expect_status(404, lambda: http(base, "GET", "/sessions/ghost/state"))
        expect_status(404, lambda: http(base, "POST", "/sessions/ghost/command",
                                        body={"variant": "next"}))
        expect_status(404, lambda: http(base, "GET", "/documents/doc-99"))
        expect_status(404, lambda: http(base, "GET", "/elsewhere"))

        _, out = http(base, "POST", "/documents", raw_body=serialize_document(model28))
        doc_id = out["document_id"]
        expect_status(400, lambda: http(base, "POST", "/sessions",
                                        body={"document_id": doc_id, "trigger_mode": "psychic"}))
        _, desc = http(base, "POST", "/sessions", body={"document_id": doc_id})
        sid = desc["session_id"]
        expect_status(400, lambda: http(base, "POST", f"/sessions/{sid}/command",
                                        body={"variant": "teleport"}))
        _, desc2 = http(base, "POST", "/sessions",
                        body={"document_id": doc_id, "trigger_mode": "detection_triggered"})
        expect_status(409, lambda: http(
            base, "POST", f"/sessions/{desc2['session_id']}/command",
            body={"variant": "this_one"}))

    def test_detections_flow_to_http_session(self, live, model28):
        base, host, clock, relay = live
        _, out = http(base, "POST", "/documents", raw_body=serialize_document(model28))
        _, desc = http(base, "POST", "/sessions", body={"document_id": out["document_id"]})
        sid = desc["session_id"]
        http(base, "POST", f"/sessions/{sid}/command", body={"variant": "this_one"})
        relay.submit("cam", "H22", detected_at=0)
        host.pump_once()
        _, state = http(base, "GET", f"/sessions/{sid}/state")
        assert state["current_step"] == 27


def read_sse_events(sock_file, count):
    """Read SSE frames until `count` events have arrived."""
    events = []
    name, data_lines = None, []
    while len(events) < count:
        line = sock_file.readline()
        if not line:
            break
        line = line.decode().rstrip("\n")
        if line.startswith(":"):
            continue
        if line.startswith("event:"):
            name = line.split(":", 1)[1].strip()
        elif line.startswith("data:"):
            data_lines.append(line.split(":", 1)[1].strip())
        elif line == "" and name is not None:
            events.append((name, json.loads("\n".join(data_lines))))
            name, data_lines = None, []
    return events


class TestEventStream:
    def test_snapshot_then_live_entries(self, live, model28):
        base, host, _, _ = live
        _, out = http(base, "POST", "/documents", raw_body=serialize_document(model28))
        _, desc = http(base, "POST", "/sessions", body={"document_id": out["document_id"]})
        sid = desc["session_id"]
        http(base, "POST", f"/sessions/{sid}/command", body={"variant": "next"})

        host_port = base.split("//")[1]
        hostname, port = host_port.split(":")
        with socket.create_connection((hostname, int(port)), timeout=5) as sock:
            sock.sendall(
                f"GET /sessions/{sid}/events HTTP/1.1\r\n"
                f"Host: {host_port}\r\nAccept: text/event-stream\r\n\r\n".encode())
            fh = sock.makefile("rb")
            status = fh.readline().decode()
            assert " 200 " in status
            while fh.readline().strip():
                pass  # headers

            got = read_sse_events(fh, 1)
            assert got[0][0] == "snapshot"
            snap = got[0][1]
            assert snap["current_step"] == 2 and snap["last_seq"] == 2

            http(base, "POST", f"/sessions/{sid}/command", body={"variant": "next"})
            http(base, "POST", f"/sessions/{sid}/command", body={"variant": "previous"})
            entries = read_sse_events(fh, 2)
            assert [name for name, _ in entries] == ["entry", "entry"]
            assert [e["seq"] for _, e in entries] == [3, 4]
            assert [e["command"] for _, e in entries] == ["next", "previous"]
            # no gap or overlap between snapshot and stream
            assert entries[0][1]["seq"] == snap["last_seq"] + 1
