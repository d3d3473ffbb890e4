"""Logical time sources. The engine never reads wall-clock time itself;
callers stamp every event, so tests can replace the clock wholesale."""

from __future__ import annotations

import threading
import time


class SystemClock:
    """Wall-clock milliseconds (Unix epoch).

    Epoch rather than monotonic-since-start: recognizers, the relay, and
    the session host run as separate processes, and the armed-jump check
    compares a device-stamped detection time against a host-stamped
    window, so every process must stamp from the same time base."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def sleep_ms(self, ms: int):
        time.sleep(ms / 1000.0)


class ManualClock:
    """Test clock advanced explicitly; sleepers wake when time reaches them."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms
        self._cond = threading.Condition()
        self._stopped = False

    def now_ms(self) -> int:
        with self._cond:
            return self._now

    def advance(self, ms: int):
        with self._cond:
            self._now += ms
            self._cond.notify_all()

    def sleep_ms(self, ms: int):
        with self._cond:
            deadline = self._now + ms
            while self._now < deadline and not self._stopped:
                self._cond.wait(timeout=1.0)

    def stop(self):
        # Releases any blocked sleeper; used on shutdown.
        with self._cond:
            self._stopped = True
            self._cond.notify_all()
