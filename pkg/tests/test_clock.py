import time

from blocknav.clock import ManualClock, SystemClock


def test_system_clock_is_epoch_based():
    # Separate processes (recognizer, relay, session host) must stamp
    # events from one shared time base for the arm-window comparison.
    now = SystemClock().now_ms()
    wall = time.time() * 1000
    assert abs(now - wall) < 2000


def test_system_clock_instances_agree():
    a, b = SystemClock(), SystemClock()
    time.sleep(0.01)
    assert abs(a.now_ms() - b.now_ms()) < 1000


def test_manual_clock_advances_only_by_hand():
    clock = ManualClock(100)
    assert clock.now_ms() == 100
    clock.advance(250)
    assert clock.now_ms() == 350


def test_manual_clock_sleep_wakes_on_advance():
    import threading

    clock = ManualClock(0)
    woke = threading.Event()

    def sleeper():
        clock.sleep_ms(500)
        woke.set()

    t = threading.Thread(target=sleeper, daemon=True)
    t.start()
    time.sleep(0.05)
    assert not woke.is_set()
    clock.advance(500)
    t.join(timeout=2)
    assert woke.is_set()


def test_manual_clock_stop_releases_sleepers():
    import threading

    clock = ManualClock(0)
    released = threading.Event()

    def sleeper():
        clock.sleep_ms(60_000)
        released.set()

    t = threading.Thread(target=sleeper, daemon=True)
    t.start()
    time.sleep(0.05)
    clock.stop()
    t.join(timeout=2)
    assert released.is_set()
