"""End-to-end relay round trip over real HTTP on localhost: a relay
server, a session service polling it, and a scripted recognizer feeding
it detections.

Run from the repository root:  python3 demos/03_relay_roundtrip.py
"""

import threading
import time

from blocknav.document import serialize_document
from blocknav.fixtures import lego_multi
from blocknav.recognizer import RecognizerConfig, ShowEvent, run_script
from blocknav.relay import RelayClient, RelayStore, make_relay_server
from blocknav.service import SessionHost, make_session_server


def main():
    # 1. Relay on an ephemeral port.
    store = RelayStore()
    relay_srv = make_relay_server(("127.0.0.1", 0), store)
    threading.Thread(target=relay_srv.serve_forever, daemon=True).start()
    relay_url = f"http://127.0.0.1:{relay_srv.server_address[1]}"
    print(f"relay up at {relay_url}")

    # 2. Session service polling that relay every 100 ms (snappy for a demo).
    host = SessionHost(relay=RelayClient(relay_url), poll_ms=100)
    session_srv = make_session_server(("127.0.0.1", 0), host)
    threading.Thread(target=session_srv.serve_forever, daemon=True).start()
    host.start_pump_thread()
    print(f"session service up at http://127.0.0.1:{session_srv.server_address[1]}")

    doc = lego_multi()
    doc_id = host.register_document(doc)
    sid = host.create_session(doc_id)["session_id"]
    print(f"registered {doc.title!r} as {doc_id}, opened session {sid}")
    print()

    # 3. Arm the session, then play a recognizer script against the relay.
    host.apply_command(sid, "this_one")
    print('player said "this one"; the jump window is open')

    # Show events are stamped in the same epoch-ms time base the session
    # host uses for the arm window.
    now = host.clock.now_ms()
    script = [
        ShowEvent(at=now, tag_id="window", distance_cm=9.0),        # lands
        ShowEvent(at=now + 900, tag_id="window", distance_cm=9.0),  # burst, deduped
        ShowEvent(at=now + 1800, tag_id="wheel", distance_cm=40.0), # out of range
    ]
    accepted, report = run_script(script, RecognizerConfig(seed=1), RelayClient(relay_url))
    print(f"recognizer: {report.shows} shows, {report.submissions} submissions, "
          f"{len(accepted)} accepted, {report.deduplicated} deduplicated, "
          f"{report.out_of_range} out of range")

    # 4. Wait for the pump to pick the detection up.
    deadline = time.time() + 3.0
    while time.time() < deadline:
        if host.descriptor(sid)["current_step"] != 1:
            break
        time.sleep(0.05)

    desc = host.descriptor(sid)
    print(f"session now at step {desc['current_step']} "
          f"(the window piece belongs to step 6)")
    entry = host.log_entries(sid)[-1]
    print(f"log tail: seq={entry.seq} command={entry.command} tag={entry.tag} "
          f"note={entry.note!r}")
    print()

    # 5. The relay keeps nothing a consumer still needs; here everything
    #    was delivered, so an aggressive purge clears it all.
    removed = store.purge_older_than(0)
    print(f"purged {removed} delivered detection(s) from the relay")

    host.stop()
    relay_srv.shutdown(); relay_srv.server_close()
    session_srv.shutdown(); session_srv.server_close()


if __name__ == "__main__":
    main()
