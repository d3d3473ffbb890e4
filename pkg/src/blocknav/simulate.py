"""Seeded assembler simulations, session-log metrics, and the per-jump
strategy classifier.

A simulation drives a private voice_armed session with a logical clock
that advances one second per issued action. "Done" means every assembly
step has been visited; a command budget (default 10 per document step)
bounds the stochastic profiles. Detections are fed straight into the
engine, so no relay is involved and runs are pure functions of
(document, profile).

Strategy sketches:

* LinearBaseline pages forward and nothing else.
* SelectiveSkipping reads a preview page, then (with skip_probability)
  jumps from it straight to the next unbuilt assembly step, skipping the
  remaining preview material.
* Debugging builds linearly but occasionally commits an error at an
  assembly step; a few steps later suspicion strikes, it jumps back to
  the suspect step (already visited) and immediately uses going_back to
  resume. Unresolved suspicions are flushed before finishing.
* BlockScanning picks an unbuilt block off the table (weighted toward
  the front of the catalog), jumps to its step, and builds linearly
  within that sub-part until the run of unvisited steps ends.
* Mixed draws one of the three jump styles per decision point and
  records ground truth so classifier output can be scored.

Each simulated jump is the two-beat arm + detection gesture, so logs
look exactly like live sessions', and the classifier below never sees
simulator internals: it works from the log and document alone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .document import InstructionDocument
from .engine import (
    CMD_GOING_BACK,
    CMD_NEXT,
    CMD_OVERVIEW,
    CMD_PREVIOUS,
    CMD_SESSION_START,
    CMD_TAG_DETECTED,
    CMD_THIS_ONE,
    LINEAR,
    META,
    NONLINEAR,
    NOOP,
    LogDocMismatch,
    NavState,
    SessionLogEntry,
    apply_linear,
    arm_this_one,
    create_session,
    going_back,
    on_detection,
    resolve_jump,
)
from .relay import TagDetection

PROFILE_KINDS = (
    "LinearBaseline",
    "SelectiveSkipping",
    "Debugging",
    "BlockScanning",
    "Mixed",
)

# Jump labels as emitted by classify_jumps.
SELECTIVE_SKIPPING = "selective_skipping"
DEBUGGING = "debugging"
BLOCK_SCANNING = "block_scanning"
UNCLASSIFIED = "unclassified"

JUMP_LABELS = (SELECTIVE_SKIPPING, DEBUGGING, BLOCK_SCANNING, UNCLASSIFIED)

DEBUG_LOOKBACK_K = 5  # entries after a jump in which going_back marks it as debugging
DEFAULT_BUDGET_FACTOR = 10

DEFAULT_MIXED_WEIGHTS = {
    SELECTIVE_SKIPPING: 0.25,
    DEBUGGING: 0.25,
    BLOCK_SCANNING: 0.5,
}

_PAGE_KINDS = ("preview", "overview_page")


class MalformedLog(Exception):
    pass


@dataclass(frozen=True)
class StrategyProfile:
    kind: str
    skip_probability: float = 0.6
    error_rate: float = 0.15
    weights: Optional[dict[str, float]] = None  # Mixed only
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"kind must be one of {PROFILE_KINDS}")
        if not 0.0 <= self.skip_probability <= 1.0:
            raise ValueError("skip_probability must be within [0, 1]")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must be within [0, 1]")
        if self.weights is not None:
            if set(self.weights) - {SELECTIVE_SKIPPING, DEBUGGING, BLOCK_SCANNING}:
                raise ValueError("weights keyed by jump strategy labels")
            total = sum(self.weights.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError("Mixed weights must sum to 1")

    def mixed_weights(self) -> dict[str, float]:
        return dict(self.weights) if self.weights else dict(DEFAULT_MIXED_WEIGHTS)


@dataclass(frozen=True)
class Metrics:
    next_count: int = 0
    previous_count: int = 0
    this_one_count: int = 0
    going_back_count: int = 0
    overview_count: int = 0
    noop_count: int = 0
    total_linear: int = 0
    total_nonlinear: int = 0
    steps_visited: int = 0
    completed: bool = False

FIELD_ORDER = (
    "next_count", "previous_count", "this_one_count", "going_back_count",
    "overview_count", "noop_count", "total_linear", "total_nonlinear",
    "steps_visited", "completed",
)


@dataclass(frozen=True)
class JumpTruth:
    """Simulator-side record of why a particular jump was made."""

    seq: int
    label: str


@dataclass
class SimulationResult:
    profile: StrategyProfile
    state: NavState
    log: list[SessionLogEntry]
    metrics: Metrics
    ground_truth: list[JumpTruth]
    budget_exhausted: bool = False


@dataclass(frozen=True)
class JumpLabel:
    seq: int
    from_step: int
    to_step: int
    label: str


def compute_metrics(log: list[SessionLogEntry],
                    doc: Optional[InstructionDocument] = None) -> Metrics:
    """Single pass over a log. Completion needs the document (it is the
    set of assembly steps, which the log alone cannot know); without one,
    completed is reported False."""
    known = {CMD_SESSION_START, CMD_NEXT, CMD_PREVIOUS, CMD_THIS_ONE,
             CMD_OVERVIEW, CMD_GOING_BACK, CMD_TAG_DETECTED}
    counts = {"next": 0, "previous": 0, "this_one": 0, "going_back": 0,
              "overview": 0, "noop": 0}
    visited: set[int] = set()
    expected_seq = 1
    for entry in log:
        if entry.seq != expected_seq:
            raise MalformedLog(f"log seq jumps from {expected_seq - 1} to {entry.seq}")
        expected_seq += 1
        if entry.command not in known:
            raise MalformedLog(f"unknown command {entry.command!r} at seq {entry.seq}")
        if entry.classification not in (LINEAR, NONLINEAR, META, NOOP):
            raise MalformedLog(f"unknown classification at seq {entry.seq}")
        visited.add(entry.to_step)
        if entry.classification == NOOP:
            counts["noop"] += 1
        elif entry.command == CMD_NEXT and entry.classification == LINEAR:
            counts["next"] += 1
        elif entry.command == CMD_PREVIOUS and entry.classification == LINEAR:
            counts["previous"] += 1
        elif entry.command == CMD_TAG_DETECTED and entry.classification == NONLINEAR:
            counts["this_one"] += 1
        elif entry.command == CMD_GOING_BACK and entry.classification == NONLINEAR:
            counts["going_back"] += 1
        elif entry.command == CMD_OVERVIEW:
            counts["overview"] += 1

    completed = False
    if doc is not None and log:
        needed = {s.index for s in doc.assembly_steps()}
        completed = needed <= visited
    return Metrics(
        next_count=counts["next"],
        previous_count=counts["previous"],
        this_one_count=counts["this_one"],
        going_back_count=counts["going_back"],
        overview_count=counts["overview"],
        noop_count=counts["noop"],
        total_linear=counts["next"] + counts["previous"],
        total_nonlinear=counts["this_one"] + counts["going_back"],
        steps_visited=len(visited),
        completed=completed,
    )


def classify_jumps(log: list[SessionLogEntry],
                   doc: InstructionDocument) -> list[JumpLabel]:
    """Label every nonlinear tag jump in a log by the strategy it most
    resembles. Rules, first match wins:

    1. jump made from a preview or overview page -> selective_skipping
    2. jump to an already-visited step with a successful going_back in
       the next few entries -> debugging
    3. jump to a not-yet-visited assembly step -> block_scanning
    4. otherwise unclassified
    """
    n = doc.step_count
    labels: list[JumpLabel] = []
    visited: set[int] = {1}
    for i, entry in enumerate(log):
        if not (1 <= entry.from_step <= n) or not (1 <= entry.to_step <= n):
            raise LogDocMismatch(entry.seq, f"step outside 1..{n}")
        if entry.command == CMD_TAG_DETECTED and entry.classification == NONLINEAR:
            from_kind = doc.step(entry.from_step).kind
            target_seen = entry.to_step in visited
            if from_kind in _PAGE_KINDS:
                label = SELECTIVE_SKIPPING
            elif target_seen and _goes_back_soon(log, i):
                label = DEBUGGING
            elif not target_seen and doc.step(entry.to_step).kind == "assembly":
                label = BLOCK_SCANNING
            else:
                label = UNCLASSIFIED
            labels.append(JumpLabel(entry.seq, entry.from_step, entry.to_step, label))
        visited.add(entry.to_step)
    return labels


def _goes_back_soon(log: list[SessionLogEntry], jump_pos: int,
                    k: int = DEBUG_LOOKBACK_K) -> bool:
    for later in log[jump_pos + 1:jump_pos + 1 + k]:
        if later.command == CMD_GOING_BACK and later.classification == NONLINEAR:
            return True
    return False


def confusion_matrix(truth: list[JumpTruth],
                     predicted: list[JumpLabel]) -> dict[tuple[str, str], int]:
    """(ground truth, classifier label) -> count, joined on log seq."""
    by_seq = {p.seq: p.label for p in predicted}
    matrix: dict[tuple[str, str], int] = {}
    for t in truth:
        pair = (t.label, by_seq.get(t.seq, UNCLASSIFIED))
        matrix[pair] = matrix.get(pair, 0) + 1
    return matrix


# --- the driver -----------------------------------------------------------

class _Driver:
    """Shared mechanics for all profiles: the session, a one-second
    logical clock, the command budget, and the arm+detect jump gesture."""

    def __init__(self, doc: InstructionDocument, profile: StrategyProfile,
                 budget: int):
        self.doc = doc
        self.profile = profile
        self.rng = random.Random(profile.seed)
        self.state = create_session(
            doc,
            trigger_mode="voice_armed",
            seed=profile.seed,
            session_id=f"sim-{profile.kind.lower()}-{profile.seed}",
            at=0,
        )
        self.budget = budget
        self.actions = 0
        self.t = 0
        self.truth: list[JumpTruth] = []
        self.needed = {s.index for s in doc.assembly_steps()}

    def done(self) -> bool:
        return self.needed <= self.state.visited

    def exhausted(self) -> bool:
        return self.actions >= self.budget

    def _tick(self) -> int:
        self.actions += 1
        self.t += 1000
        return self.t

    def next(self):
        apply_linear(self.state, "forward", at=self._tick())

    def previous(self):
        apply_linear(self.state, "backward", at=self._tick())

    def step_toward(self, target: int):
        if target > self.state.current_step:
            self.next()
        elif target < self.state.current_step:
            self.previous()

    def jump(self, tag: str, label: str):
        """Arm, then show the block one logical second later. Callers
        pre-verify resolution, so the detection entry is always a jump."""
        arm_this_one(self.state, at=self._tick())
        at = self._tick()
        on_detection(self.state,
                     TagDetection(device_id="assembler-sim", tag_id=tag, detected_at=at),
                     at=at)
        entry = self.state.log[-1]
        if entry.classification == NONLINEAR:
            self.truth.append(JumpTruth(entry.seq, label))

    def going_back(self):
        going_back(self.state, at=self._tick())

    def tag_reaching(self, target: int) -> Optional[str]:
        """A tag on the target step that actually resolves there from the
        current step, or None (multi-mode resolution can land elsewhere)."""
        cur = self.state.current_step
        if target == cur:
            return None
        options = [
            tag for tag in self.doc.step(target).blocks_introduced
            if tag in self.state.index and resolve_jump(cur, tag, self.state.index) == target
        ]
        if not options:
            return None
        return options[0] if len(options) == 1 else self.rng.choice(options)

    def unvisited_assembly(self) -> list[int]:
        return sorted(self.needed - self.state.visited)

    def next_unvisited_ahead(self) -> Optional[int]:
        cur = self.state.current_step
        ahead = [i for i in self.unvisited_assembly() if i > cur]
        return ahead[0] if ahead else None

    def nearest_unvisited(self) -> Optional[int]:
        cur = self.state.current_step
        pool = self.unvisited_assembly()
        if not pool:
            return None
        return min(pool, key=lambda i: (abs(i - cur), -i))


def simulate(doc: InstructionDocument, profile: StrategyProfile,
             budget: Optional[int] = None) -> SimulationResult:
    """Run one assembler over the document; deterministic per profile."""
    limit = budget if budget is not None else DEFAULT_BUDGET_FACTOR * doc.step_count
    driver = _Driver(doc, profile, limit)
    runner = {
        "LinearBaseline": _run_linear,
        "SelectiveSkipping": _run_selective,
        "Debugging": _run_debugging,
        "BlockScanning": _run_scanning,
        "Mixed": _run_mixed,
    }[profile.kind]
    runner(driver)
    log = list(driver.state.log)
    return SimulationResult(
        profile=profile,
        state=driver.state,
        log=log,
        metrics=compute_metrics(log, doc),
        ground_truth=driver.truth,
        budget_exhausted=driver.exhausted() and not driver.done(),
    )


def _run_linear(d: _Driver):
    while not d.done() and not d.exhausted():
        d.next()


def _run_selective(d: _Driver):
    while not d.done() and not d.exhausted():
        cur = d.state.current_step
        if d.doc.step(cur).kind in _PAGE_KINDS and d.rng.random() < d.profile.skip_probability:
            target = d.next_unvisited_ahead()
            tag = d.tag_reaching(target) if target is not None else None
            if tag is not None:
                d.jump(tag, SELECTIVE_SKIPPING)
                continue
        d.next()


def _run_debugging(d: _Driver):
    # Error steps awaiting suspicion, each with a countdown in linear moves.
    pending: list[list[int]] = []
    injected_any = False

    def arrive_check():
        nonlocal injected_any
        cur = d.state.current_step
        step = d.doc.step(cur)
        if step.kind != "assembly":
            return
        if d.rng.random() < d.profile.error_rate:
            pending.append([cur, d.rng.randint(1, 3)])
            injected_any = True

    def due_detour() -> Optional[int]:
        cur = d.state.current_step
        if d.doc.step(cur).kind != "assembly":
            return None
        for item in pending:
            if item[1] <= 0 and item[0] != cur:
                return item[0]
        return None

    def detour(err_step: int):
        tag = d.tag_reaching(err_step)
        pending[:] = [p for p in pending if p[0] != err_step]
        if tag is None:
            return  # unresolvable from here; drop the suspicion
        d.jump(tag, DEBUGGING)
        d.going_back()

    while not d.exhausted():
        if d.done() and not pending:
            break
        if d.done() and pending:
            # Flush remaining suspicions from wherever the walk ended.
            for err, _countdown in list(pending):
                if d.exhausted():
                    break
                if err == d.state.current_step:
                    pending[:] = [p for p in pending if p[0] != err]
                else:
                    detour(err)
            break

        target = due_detour()
        if target is not None:
            detour(target)
            continue

        # Nudge toward completion and commit errors on newly reached steps.
        before = set(d.state.visited)
        d.next()
        for item in pending:
            item[1] -= 1
        if d.state.current_step not in before:
            arrive_check()

    # The profile promises at least one detour whenever errors are possible.
    if d.profile.error_rate > 0 and not injected_any and not d.exhausted():
        cur = d.state.current_step
        candidates = [
            i for i in sorted(d.state.visited)
            if i != cur and d.doc.step(i).kind == "assembly"
        ]
        if candidates:
            tag = d.tag_reaching(d.rng.choice(candidates))
            if tag is not None:
                d.jump(tag, DEBUGGING)
                d.going_back()


def _run_scanning(d: _Driver):
    goal: Optional[int] = None
    while not d.done() and not d.exhausted():
        cur = d.state.current_step

        if goal is not None:
            if goal == cur or goal in d.state.visited:
                goal = None
            else:
                d.step_toward(goal)
                continue

        if d.doc.step(cur).kind != "assembly":
            d.next()
            continue

        nxt = cur + 1
        sp = d.doc.innermost_subpart(cur)
        if (
            nxt <= d.doc.step_count
            and nxt not in d.state.visited
            and sp is not None
            and sp.step_range[0] <= nxt <= sp.step_range[1]
        ):
            d.next()
            continue

        pick = _scan_pick(d)
        if pick is not None:
            d.jump(pick, BLOCK_SCANNING)
            continue
        goal = d.nearest_unvisited()
        if goal is None:
            break


def _scan_pick(d: _Driver) -> Optional[str]:
    """Weighted draw of an unbuilt block whose jump lands on an unvisited
    assembly step; earlier catalog entries are proportionally likelier,
    like blocks sitting nearer the front of the table."""
    cur = d.state.current_step
    total = len(d.doc.catalog)
    tags: list[str] = []
    weights: list[int] = []
    for pos, block in enumerate(d.doc.catalog):
        if block.tag_id not in d.state.index:
            continue
        target = resolve_jump(cur, block.tag_id, d.state.index)
        if target == cur or target in d.state.visited:
            continue
        if d.doc.step(target).kind != "assembly":
            continue
        tags.append(block.tag_id)
        weights.append(total - pos)
    if not tags:
        return None
    return d.rng.choices(tags, weights=weights, k=1)[0]


def _run_mixed(d: _Driver):
    weights = d.profile.mixed_weights()
    styles = list(weights)
    wvals = [weights[s] for s in styles]

    while not d.done() and not d.exhausted():
        cur = d.state.current_step
        kind = d.doc.step(cur).kind
        style = d.rng.choices(styles, weights=wvals, k=1)[0]

        if style == SELECTIVE_SKIPPING and kind in _PAGE_KINDS:
            target = d.next_unvisited_ahead()
            tag = d.tag_reaching(target) if target is not None else None
            if tag is not None:
                d.jump(tag, SELECTIVE_SKIPPING)
                continue
        elif style == DEBUGGING and kind == "assembly":
            revisits = [
                i for i in sorted(d.state.visited)
                if i != cur and d.doc.step(i).kind == "assembly"
            ]
            if revisits:
                tag = d.tag_reaching(d.rng.choice(revisits))
                if tag is not None:
                    d.jump(tag, DEBUGGING)
                    d.going_back()
                    continue
        elif style == BLOCK_SCANNING and kind == "assembly":
            pick = _scan_pick(d)
            if pick is not None:
                d.jump(pick, BLOCK_SCANNING)
                continue

        # Fallback: linear, steered toward whatever is still unbuilt.
        target = d.nearest_unvisited()
        if target is None:
            break
        d.step_toward(target)
