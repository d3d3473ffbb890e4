"""Wire-protocol tests: a live relay server on an ephemeral port."""

import json
import threading
import urllib.error
import urllib.request

import pytest

from blocknav.clock import ManualClock
from blocknav.relay import MalformedReport, RelayClient, RelayStore, RelayUnreachable, make_relay_server


@pytest.fixture()
def relay():
    clock = ManualClock(0)
    store = RelayStore(clock=clock)
    server = make_relay_server(("127.0.0.1", 0), store)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, clock, store
    server.shutdown()
    server.server_close()


def raw_post(base, path, body):
    data = json.dumps(body).encode() if body is not None else b""
    req = urllib.request.Request(base + path, data=data, method="POST",
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=5) as resp:
        return resp.status, json.loads(resp.read())


def raw_get(base, path):
    with urllib.request.urlopen(base + path, timeout=5) as resp:
        return resp.status, json.loads(resp.read())


class TestEndpoints:
    def test_healthz(self, relay):
        base, _, _ = relay
        status, body = raw_get(base, "/healthz")
        assert status == 200 and body == {"ok": True}

    def test_submit_then_fetch(self, relay):
        base, _, _ = relay
        status, body = raw_post(base, "/detections",
                                {"device_id": "cam", "tag_id": "T1", "detected_at": 42})
        assert status == 200 and body == {"seq": 1}
        status, body = raw_get(base, "/detections?consumer=p1")
        assert status == 200
        assert body["detections"] == [
            {"seq": 1, "device_id": "cam", "tag_id": "T1", "detected_at": 42}
        ]
        _, body = raw_get(base, "/detections?consumer=p1")
        assert body["detections"] == []

    def test_dedupe_over_the_wire(self, relay):
        base, clock, _ = relay
        raw_post(base, "/detections", {"device_id": "cam", "tag_id": "T1", "detected_at": 0})
        _, body = raw_post(base, "/detections", {"device_id": "cam", "tag_id": "T1", "detected_at": 5})
        assert body == {"deduplicated": True}
        clock.advance(750)
        _, body = raw_post(base, "/detections", {"device_id": "cam", "tag_id": "T1", "detected_at": 800})
        assert body == {"seq": 2}

    def test_purge_endpoint(self, relay):
        base, clock, _ = relay
        raw_post(base, "/detections", {"device_id": "cam", "tag_id": "T1", "detected_at": 0})
        raw_get(base, "/detections?consumer=p1")
        clock.advance(10_000)
        status, body = raw_post(base, "/admin/purge?age=1000", None)
        assert status == 200 and body == {"removed": 1}


class TestErrorStatus:
    def assert_400(self, fn):
        with pytest.raises(urllib.error.HTTPError) as err:
            fn()
        assert err.value.code == 400

    def test_missing_fields(self, relay):
        base, _, _ = relay
        self.assert_400(lambda: raw_post(base, "/detections", {"tag_id": "T1", "detected_at": 0}))
        self.assert_400(lambda: raw_post(base, "/detections", {"device_id": "cam", "detected_at": 0}))
        self.assert_400(lambda: raw_post(
            base, "/detections", {"device_id": "cam", "tag_id": "T1", "detected_at": "later"}))

    def test_bad_json_body(self, relay):
        base, _, _ = relay
        req = urllib.request.Request(base + "/detections", data=b"not json", method="POST")
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req, timeout=5)
        assert err.value.code == 400

    def test_fetch_without_consumer(self, relay):
        base, _, _ = relay
        self.assert_400(lambda: raw_get(base, "/detections"))

    def test_purge_bad_age(self, relay):
        base, _, _ = relay
        self.assert_400(lambda: raw_post(base, "/admin/purge?age=-5", None))
        self.assert_400(lambda: raw_post(base, "/admin/purge?age=soon", None))

    def test_unknown_path_404(self, relay):
        base, _, _ = relay
        for fn in (lambda: raw_get(base, "/nope"),
                   lambda: raw_post(base, "/nope", {})):
            with pytest.raises(urllib.error.HTTPError) as err:
                fn()
            assert err.value.code == 404


class TestClient:
    def test_round_trip(self, relay):
        base, clock, _ = relay
        client = RelayClient(base)
        assert client.submit("cam", "T1", 0).seq == 1
        assert client.submit("cam", "T1", 1).deduplicated
        got = client.fetch_new("p1")
        assert len(got) == 1 and got[0].tag_id == "T1" and got[0].seq == 1
        clock.advance(10_000)
        assert client.purge(1000) == 1

    def test_rejection_surfaces_as_malformed(self, relay):
        base, _, _ = relay
        client = RelayClient(base)
        with pytest.raises(MalformedReport):
            client.submit("", "T1", 0)

    def test_unreachable(self):
        client = RelayClient("http://127.0.0.1:1", timeout_s=0.5)
        with pytest.raises(RelayUnreachable):
            client.fetch_new("p1")
