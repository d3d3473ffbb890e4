"""Scripted stand-in for the desk camera that reads block tags.

A script is an ordered list of "show" events: at some instant a block is
held up at a distance and an angle. The simulator turns each show into
zero or more detection reports and submits them to a relay (either an
in-process store or an HTTP client; both expose ``submit``).

The failure model is deliberately small: a hard range cutoff, a boolean
angle gate, and one Bernoulli draw per show. The draw is consumed for
every show whether or not the range/angle gates pass, so tightening the
range can only remove submissions for a fixed seed, never reshuffle them.

While a block stays shown (until the next script event) the reader keeps
re-emitting at a fixed cadence, which is what gives the relay's
per-device dedupe window something to do.
"""

from __future__ import annotations

import io
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, TextIO

from .relay import SubmitResult, TagDetection

DEFAULT_MAX_RANGE_CM = 15.0
DEFAULT_REPEAT_HZ = 2.0


class DetectionSink(Protocol):
    def submit(self, device_id: str, tag_id: str, detected_at: int) -> SubmitResult: ...


@dataclass(frozen=True)
class ShowEvent:
    at: int
    tag_id: str
    distance_cm: float
    angle_ok: bool = True

    def __post_init__(self):
        if self.distance_cm < 0:
            raise ValueError("distance_cm must be >= 0")
        if not self.tag_id:
            raise ValueError("tag_id must be non-empty")


@dataclass(frozen=True)
class RecognizerConfig:
    device_id: str = "recognizer-1"
    max_range_cm: float = DEFAULT_MAX_RANGE_CM
    miss_probability: float = 0.0
    repeat_hz: float = DEFAULT_REPEAT_HZ
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.device_id:
            raise ValueError("device_id must be non-empty")
        if not 0.0 <= self.miss_probability <= 1.0:
            raise ValueError("miss_probability must be within [0, 1]")
        if self.repeat_hz <= 0:
            raise ValueError("repeat_hz must be positive")
        if self.max_range_cm < 0:
            raise ValueError("max_range_cm must be >= 0")


@dataclass
class SubmissionReport:
    shows: int = 0
    recognized_shows: int = 0
    out_of_range: int = 0
    bad_angle: int = 0
    missed: int = 0
    submissions: int = 0
    deduplicated: int = 0
    accepted_seqs: list[int] = field(default_factory=list)


def run_script(script: Iterable[ShowEvent], config: RecognizerConfig,
               sink: DetectionSink) -> tuple[list[TagDetection], SubmissionReport]:
    """Play a show script against a relay; returns the detections the
    relay accepted (with their assigned seqs) plus a tally of why the
    rest never made it."""
    events = list(script)
    for a, b in zip(events, events[1:]):
        if b.at < a.at:
            raise ValueError("script timestamps must be non-decreasing")

    rng = random.Random(config.seed)
    period_ms = max(1, round(1000.0 / config.repeat_hz))
    report = SubmissionReport()
    accepted: list[TagDetection] = []

    for i, show in enumerate(events):
        report.shows += 1
        draw = rng.random()  # consumed unconditionally, see module docstring
        if show.distance_cm > config.max_range_cm:
            report.out_of_range += 1
            continue
        if not show.angle_ok:
            report.bad_angle += 1
            continue
        if draw < config.miss_probability:
            report.missed += 1
            continue
        report.recognized_shows += 1

        end = events[i + 1].at if i + 1 < len(events) else None
        t = show.at
        while True:
            result = sink.submit(device_id=config.device_id,
                                 tag_id=show.tag_id, detected_at=t)
            report.submissions += 1
            if result.deduplicated:
                report.deduplicated += 1
            else:
                report.accepted_seqs.append(result.seq)
                accepted.append(TagDetection(
                    device_id=config.device_id, tag_id=show.tag_id,
                    detected_at=t, seq=result.seq,
                ))
            t += period_ms
            if end is None or t >= end:
                break

    return accepted, report


def interactive_show(tag_id: str, config: RecognizerConfig, sink: DetectionSink,
                     at: int) -> SubmitResult:
    """Submit one hand-driven detection at point-blank range, skipping the
    stochastic model. Used by the CLI's interactive mode and the player's
    block palette."""
    if not tag_id:
        raise ValueError("tag_id must be non-empty")
    return sink.submit(device_id=config.device_id, tag_id=tag_id, detected_at=at)


# Script files: one show per line, `at_ms<TAB>tag_id<TAB>distance_cm<TAB>angle_ok`.

SCRIPT_COLUMNS = ("at_ms", "tag_id", "distance_cm", "angle_ok")

_TRUE = {"1", "true", "yes", "y"}
_FALSE = {"0", "false", "no", "n"}


class ScriptParseError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def read_script(source: TextIO) -> list[ShowEvent]:
    events: list[ShowEvent] = []
    for line_no, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        cells = line.split("\t")
        if tuple(cells) == SCRIPT_COLUMNS:
            continue  # optional header
        if len(cells) != 4:
            raise ScriptParseError(line_no, f"expected 4 cells, got {len(cells)}")
        raw_at, tag_id, raw_dist, raw_angle = cells
        try:
            at = int(raw_at)
            distance = float(raw_dist)
        except ValueError as exc:
            raise ScriptParseError(line_no, str(exc)) from None
        lowered = raw_angle.strip().lower()
        if lowered in _TRUE:
            angle_ok = True
        elif lowered in _FALSE:
            angle_ok = False
        else:
            raise ScriptParseError(line_no, f"angle_ok must be boolean-like, got {raw_angle!r}")
        try:
            events.append(ShowEvent(at=at, tag_id=tag_id, distance_cm=distance, angle_ok=angle_ok))
        except ValueError as exc:
            raise ScriptParseError(line_no, str(exc)) from None
    return events


def parse_script(text: str) -> list[ShowEvent]:
    return read_script(io.StringIO(text))


def write_script(events: Iterable[ShowEvent], out: TextIO) -> None:
    out.write("\t".join(SCRIPT_COLUMNS) + "\n")
    for ev in events:
        angle = "true" if ev.angle_ok else "false"
        out.write(f"{ev.at}\t{ev.tag_id}\t{ev.distance_cm:g}\t{angle}\n")


def read_script_file(path: str) -> list[ShowEvent]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_script(fh)
