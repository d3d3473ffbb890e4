"""Walkthrough of a navigation session: linear steps, the two-beat jump
gesture (arm, then show a block), the return anchor, and replaying the
log into an identical session.

Run from the repository root:  python3 demos/02_navigation_walkthrough.py
"""

from blocknav.engine import (
    apply_linear,
    arm_this_one,
    create_session,
    going_back,
    on_detection,
    overview,
    replay,
)
from blocknav.fixtures import lego_multi
from blocknav.relay import TagDetection
from blocknav.sessionlog import dumps


def show(state, tag, at):
    """One sensed block, as the detection pump would deliver it."""
    return on_detection(
        state, TagDetection(device_id="demo-cam", tag_id=tag, detected_at=at), at=at)


def narrate(state, said):
    entry = state.log[-1]
    note = f" [{entry.note}]" if entry.note else ""
    print(f"  {said:<34} -> step {state.current_step} "
          f"({entry.classification}{note})")


def main():
    doc = lego_multi()
    state = create_session(doc, session_id="walkthrough", at=0)
    print(f"session on {doc.title!r}, starting at step {state.current_step} of {state.total_steps}")
    print()

    print("linear navigation:")
    apply_linear(state, "forward", at=1_000); narrate(state, 'said "next"')
    apply_linear(state, "forward", at=2_000); narrate(state, 'said "next"')
    apply_linear(state, "backward", at=3_000); narrate(state, 'said "previous"')
    print()

    print("jumping by showing a block (arm first, then hold it up):")
    arm_this_one(state, at=10_000); narrate(state, 'said "this one"')
    show(state, "window", at=10_800); narrate(state, "showed the window piece")
    print()

    print("the wheel appears on steps 3 and 8; resolution picks the nearest:")
    arm_this_one(state, at=20_000); narrate(state, 'said "this one"')
    show(state, "wheel", at=20_700); narrate(state, "showed a wheel")
    print()

    print("returning to where the jump left off:")
    going_back(state, at=30_000); narrate(state, 'said "going back"')
    going_back(state, at=31_000); narrate(state, 'said it again (anchor spent)')
    print()

    print("detections outside an arm window never move the session:")
    show(state, "slope", at=40_000); narrate(state, "camera glimpsed a slope")
    print()

    print("an expired window behaves the same:")
    arm_this_one(state, at=50_000); narrate(state, 'said "this one"')
    show(state, "slope", at=56_000); narrate(state, "showed the slope too late")
    print()

    view = overview(state, at=60_000)
    print(f"overview: step {view.current_step}/{view.total_steps}, "
          f"within {' > '.join(view.subpart_path) or '(no sub-part)'}, "
          f"visited {sorted(view.visited)}")
    print()

    ghost = replay(doc, state.log)
    same = (ghost.current_step == state.current_step
            and ghost.return_anchor == state.return_anchor
            and ghost.visited == state.visited)
    print(f"replaying the {len(state.log)}-entry log rebuilds the session: "
          f"{'exact match' if same else 'MISMATCH'}")
    print()
    print("the log itself (tab-separated, append-only):")
    for line in dumps(state.log).splitlines():
        print(f"  {line}")


if __name__ == "__main__":
    main()
