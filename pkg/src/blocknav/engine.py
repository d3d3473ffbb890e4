"""Session state machine: linear moves, tag-triggered jumps, overview,
and going-back, with an append-only log that fully determines the state.

A session walks one instruction document. ``next``/``previous`` move one
step and clamp at the ends. A jump is a two-beat gesture: the ``this_one``
command arms the session for a short window, then a tag detection resolves
to the step introducing that block and transitions there, remembering the
pre-jump step so ``going_back`` can restore it. In ``detection_triggered``
mode detections jump without arming (the behavior of a player polling a
relay directly). When a tag maps to several steps, resolution picks the
step nearest the current one, breaking ties toward the later step to bias
forward progress.

Every operation appends exactly one log entry stamped with a caller-
supplied logical timestamp. Replaying a log against the same document
reproduces the session's step, return anchor, and visited set -- the log
is the single source of truth for metrics and for the wire event stream.
"""

from __future__ import annotations

import uuid
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .document import (
    BlockIndex,
    InstructionDocument,
    UnknownTagReference,
    build_block_index,
)
from .relay import TagDetection

UnknownTag = UnknownTagReference

TRIGGER_MODES = ("voice_armed", "detection_triggered")
DEFAULT_ARM_WINDOW_MS = 5000

# Command tokens as they appear in the log's command column.
CMD_SESSION_START = "session_start"
CMD_NEXT = "next"
CMD_PREVIOUS = "previous"
CMD_THIS_ONE = "this_one"
CMD_OVERVIEW = "overview"
CMD_GOING_BACK = "going_back"
CMD_TAG_DETECTED = "tag_detected"

USER_COMMANDS = (CMD_NEXT, CMD_PREVIOUS, CMD_THIS_ONE, CMD_OVERVIEW, CMD_GOING_BACK)

# Classifications.
LINEAR = "linear"
NONLINEAR = "nonlinear"
META = "meta"
NOOP = "noop"


class InvalidDocument(Exception):
    pass


class WrongTriggerMode(Exception):
    pass


class LogDocMismatch(Exception):
    """A log entry's transition is impossible on the given document."""

    def __init__(self, seq: int, message: str):
        super().__init__(f"log entry {seq}: {message}")
        self.seq = seq


@dataclass(frozen=True)
class SessionLogEntry:
    seq: int
    at: int
    command: str
    from_step: int
    to_step: int
    classification: str
    note: Optional[str] = None
    tag: Optional[str] = None  # only for tag_detected entries

    def command_column(self) -> str:
        """The command as rendered in the log export's command field."""
        if self.command == CMD_TAG_DETECTED:
            return f"{CMD_TAG_DETECTED}({self.tag})"
        return self.command

    def note_has(self, token: str) -> bool:
        return self.note is not None and token in self.note.split(",")


@dataclass(frozen=True)
class Arm:
    armed_at: int
    expires_at: int


@dataclass(frozen=True)
class OverviewView:
    current_step: int
    total_steps: int
    subpart_path: tuple[str, ...]
    visited: frozenset[int]


@dataclass
class NavState:
    """One live session. Single-writer: apply commands from one thread at
    a time; the document and index are shared immutable structures."""

    session_id: str
    doc: InstructionDocument
    index: BlockIndex
    trigger_mode: str
    current_step: int
    created_at: int
    arm_window_ms: int = DEFAULT_ARM_WINDOW_MS
    return_anchor: Optional[int] = None
    arm: Optional[Arm] = None
    rng_seed: Optional[int] = None
    log: list[SessionLogEntry] = field(default_factory=list)
    visited: set[int] = field(default_factory=set)

    @property
    def total_steps(self) -> int:
        return self.doc.step_count

    @property
    def armed(self) -> bool:
        return self.arm is not None

    def _append(self, at: int, command: str, from_step: int, to_step: int,
                classification: str, note: Optional[str] = None,
                tag: Optional[str] = None) -> SessionLogEntry:
        entry = SessionLogEntry(
            seq=len(self.log) + 1,
            at=at,
            command=command,
            from_step=from_step,
            to_step=to_step,
            classification=classification,
            note=note,
            tag=tag,
        )
        self.log.append(entry)
        self.visited.add(to_step)
        return entry


def _join_note(primary: Optional[str], detection: Optional[TagDetection]) -> Optional[str]:
    parts = [primary] if primary else []
    if detection is not None and detection.seq:
        parts.append(f"relay_seq={detection.seq}")
    return ",".join(parts) if parts else None


def create_session(doc: InstructionDocument, trigger_mode: str = "voice_armed",
                   seed: Optional[int] = None, arm_window_ms: int = DEFAULT_ARM_WINDOW_MS,
                   session_id: Optional[str] = None, at: int = 0) -> NavState:
    """Open a session at step 1 with a single session_start log entry."""
    if trigger_mode not in TRIGGER_MODES:
        raise WrongTriggerMode(f"trigger_mode must be one of {TRIGGER_MODES}")
    n = doc.step_count
    if n < 1:
        raise InvalidDocument("document has no steps")
    indices = sorted(s.index for s in doc.steps)
    if indices != list(range(1, n + 1)):
        raise InvalidDocument("step indices are not exactly 1..N")
    state = NavState(
        session_id=session_id or uuid.uuid4().hex[:12],
        doc=doc,
        index=build_block_index(doc),
        trigger_mode=trigger_mode,
        current_step=1,
        created_at=at,
        arm_window_ms=arm_window_ms,
        rng_seed=seed,
    )
    state.visited.add(1)
    state._append(at, CMD_SESSION_START, 1, 1, META, note="session_start")
    return state


def apply_linear(state: NavState, direction: str, at: int = 0) -> NavState:
    """Move one step forward or backward; boundary moves stay put and log
    a noop so the attempt still shows up in metrics."""
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    command = CMD_NEXT if direction == "forward" else CMD_PREVIOUS
    frm = state.current_step
    to = frm + 1 if direction == "forward" else frm - 1
    if 1 <= to <= state.total_steps:
        state.current_step = to
        state._append(at, command, frm, to, LINEAR)
    else:
        state._append(at, command, frm, frm, NOOP, note="boundary")
    return state


def arm_this_one(state: NavState, at: int = 0) -> NavState:
    """Arm the jump window; re-arming while armed restarts the window."""
    if state.trigger_mode != "voice_armed":
        raise WrongTriggerMode("this_one arming requires voice_armed trigger mode")
    state.arm = Arm(armed_at=at, expires_at=at + state.arm_window_ms)
    state._append(at, CMD_THIS_ONE, state.current_step, state.current_step,
                  META, note="armed")
    return state


def resolve_jump(current_step: int, tag: str, index: BlockIndex) -> int:
    """Step a shown tag resolves to: the unique step when the mapping is
    one-to-one, otherwise the candidate nearest current_step with ties
    broken toward the larger index. Pure function of its arguments."""
    candidates = index.steps_for(tag)
    if len(candidates) == 1:
        return candidates[0]
    pos = bisect_left(candidates, current_step)
    best = None
    for cand in candidates[max(pos - 1, 0):pos + 1]:
        if best is None:
            best = cand
            continue
        da, db = abs(best - current_step), abs(cand - current_step)
        if db < da or (db == da and cand > best):
            best = cand
    return best


def on_detection(state: NavState, detection: TagDetection, at: int = 0) -> NavState:
    """Apply one sensed tag. In voice_armed mode the detection only fires
    while the arm window is open (stamped by the detection's own time);
    in detection_triggered mode every detection fires. All outcomes are
    logged states, never errors."""
    frm = state.current_step
    if state.trigger_mode == "voice_armed":
        if state.arm is None:
            state._append(at, CMD_TAG_DETECTED, frm, frm, NOOP,
                          note=_join_note("unsolicited_detection", detection),
                          tag=detection.tag_id)
            return state
        if detection.detected_at > state.arm.expires_at:
            state.arm = None  # stale window
            state._append(at, CMD_TAG_DETECTED, frm, frm, NOOP,
                          note=_join_note("unsolicited_detection", detection),
                          tag=detection.tag_id)
            return state

    try:
        target = resolve_jump(frm, detection.tag_id, state.index)
    except UnknownTag:
        # Arm kept: the user can re-present a readable block in-window.
        state._append(at, CMD_TAG_DETECTED, frm, frm, NOOP,
                      note=_join_note("unknown_tag", detection),
                      tag=detection.tag_id)
        return state

    ambiguous = len(state.index.steps_for(detection.tag_id)) > 1
    state.arm = None
    if target == frm:
        state._append(at, CMD_TAG_DETECTED, frm, frm, NOOP,
                      note=_join_note("same_step", detection), tag=detection.tag_id)
        return state
    state.current_step = target
    state.return_anchor = frm
    state._append(at, CMD_TAG_DETECTED, frm, target, NONLINEAR,
                  note=_join_note("ambiguous_resolved" if ambiguous else None, detection),
                  tag=detection.tag_id)
    return state


def going_back(state: NavState, at: int = 0) -> NavState:
    """Return to the remembered pre-jump step, consuming the anchor."""
    frm = state.current_step
    if state.return_anchor is None:
        state._append(at, CMD_GOING_BACK, frm, frm, NOOP, note="no_anchor")
        return state
    target = state.return_anchor
    state.return_anchor = None
    state.current_step = target
    state._append(at, CMD_GOING_BACK, frm, target, NONLINEAR)
    return state


def overview(state: NavState, at: int = 0) -> OverviewView:
    """Where-am-I view over the linearly connected steps; logs a meta
    entry and never moves the session."""
    cur = state.current_step
    state._append(at, CMD_OVERVIEW, cur, cur, META)
    return OverviewView(
        current_step=cur,
        total_steps=state.total_steps,
        subpart_path=tuple(state.doc.subpart_path(cur)),
        visited=frozenset(state.visited),
    )


def apply_command(state: NavState, variant: str, at: int = 0) -> NavState:
    """Dispatch one of the five user command variants."""
    if variant == CMD_NEXT:
        return apply_linear(state, "forward", at=at)
    if variant == CMD_PREVIOUS:
        return apply_linear(state, "backward", at=at)
    if variant == CMD_THIS_ONE:
        return arm_this_one(state, at=at)
    if variant == CMD_OVERVIEW:
        overview(state, at=at)
        return state
    if variant == CMD_GOING_BACK:
        return going_back(state, at=at)
    raise ValueError(f"unknown command variant {variant!r}")


def replay(doc: InstructionDocument, entries: Iterable[SessionLogEntry],
           session_id: str = "replay") -> NavState:
    """Rebuild a session's state purely from its log.

    Each entry is checked against the document: a transition the engine
    could not have produced raises LogDocMismatch naming the entry. The
    result's (current_step, return_anchor, visited) equal the live
    session's at the same point.
    """
    index = build_block_index(doc)
    n = doc.step_count
    if n < 1:
        raise InvalidDocument("document has no steps")

    state = NavState(
        session_id=session_id,
        doc=doc,
        index=index,
        trigger_mode="voice_armed",
        current_step=1,
        created_at=0,
    )
    state.visited.add(1)

    expected_seq = 1
    for entry in entries:
        if entry.seq != expected_seq:
            raise LogDocMismatch(entry.seq, f"expected seq {expected_seq}")
        expected_seq += 1
        cur = state.current_step

        if entry.command == CMD_SESSION_START:
            if entry.seq != 1 or entry.from_step != 1 or entry.to_step != 1:
                raise LogDocMismatch(entry.seq, "malformed session_start")
            state.created_at = entry.at
        elif entry.command in (CMD_NEXT, CMD_PREVIOUS):
            delta = 1 if entry.command == CMD_NEXT else -1
            target = cur + delta
            if entry.from_step != cur:
                raise LogDocMismatch(entry.seq, f"from_step {entry.from_step} but session at {cur}")
            if 1 <= target <= n:
                if entry.to_step != target or entry.classification != LINEAR:
                    raise LogDocMismatch(entry.seq, f"{entry.command} from {cur} must reach {target}")
                state.current_step = target
            else:
                if entry.to_step != cur or entry.classification != NOOP:
                    raise LogDocMismatch(entry.seq, f"{entry.command} at boundary must stay at {cur}")
        elif entry.command in (CMD_THIS_ONE, CMD_OVERVIEW):
            if entry.to_step != cur or entry.from_step != cur or entry.classification != META:
                raise LogDocMismatch(entry.seq, f"{entry.command} must not move the session")
        elif entry.command == CMD_TAG_DETECTED:
            if entry.from_step != cur:
                raise LogDocMismatch(entry.seq, f"from_step {entry.from_step} but session at {cur}")
            if entry.classification == NONLINEAR:
                if entry.tag is None or entry.tag not in index:
                    raise LogDocMismatch(entry.seq, f"jump on tag {entry.tag!r} unknown to document")
                target = resolve_jump(cur, entry.tag, index)
                if entry.to_step != target or target == cur:
                    raise LogDocMismatch(
                        entry.seq, f"tag {entry.tag!r} from {cur} resolves to {target}, log says {entry.to_step}")
                state.current_step = target
                state.return_anchor = cur
            elif entry.classification == NOOP:
                if entry.to_step != cur:
                    raise LogDocMismatch(entry.seq, "noop detection must not move the session")
            else:
                raise LogDocMismatch(entry.seq, f"bad detection classification {entry.classification!r}")
        elif entry.command == CMD_GOING_BACK:
            if entry.from_step != cur:
                raise LogDocMismatch(entry.seq, f"from_step {entry.from_step} but session at {cur}")
            if entry.classification == NONLINEAR:
                if state.return_anchor is None or entry.to_step != state.return_anchor:
                    raise LogDocMismatch(entry.seq, "going_back without a matching anchor")
                state.current_step = state.return_anchor
                state.return_anchor = None
            elif entry.classification == NOOP:
                if state.return_anchor is not None or entry.to_step != cur:
                    raise LogDocMismatch(entry.seq, "noop going_back inconsistent with anchor")
            else:
                raise LogDocMismatch(entry.seq, f"bad going_back classification {entry.classification!r}")
        else:
            raise LogDocMismatch(entry.seq, f"unknown command {entry.command!r}")

        if not (1 <= entry.to_step <= n):
            raise LogDocMismatch(entry.seq, f"to_step {entry.to_step} outside 1..{n}")
        state.log.append(entry)
        state.visited.add(entry.to_step)

    return state
