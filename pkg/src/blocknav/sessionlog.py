"""Tab-separated session log files.

One header line, then one line per entry with columns
seq, at, command, from_step, to_step, classification, note.
Detections render the tag inside the command column, e.g.
``tag_detected(B-07)``, so the file round-trips without a tag column.
An empty note cell means no note.
"""

from __future__ import annotations

import io
import re
from typing import Iterable, TextIO

from .engine import CMD_TAG_DETECTED, SessionLogEntry

COLUMNS = ("seq", "at", "command", "from_step", "to_step", "classification", "note")

_DETECTED_RE = re.compile(r"^tag_detected\((.*)\)$")


class LogParseError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def render_entry(entry: SessionLogEntry) -> str:
    note = entry.note if entry.note is not None else ""
    return "\t".join((
        str(entry.seq),
        str(entry.at),
        entry.command_column(),
        str(entry.from_step),
        str(entry.to_step),
        entry.classification,
        note,
    ))


def write_log(entries: Iterable[SessionLogEntry], out: TextIO) -> None:
    out.write("\t".join(COLUMNS) + "\n")
    for entry in entries:
        out.write(render_entry(entry) + "\n")


def dumps(entries: Iterable[SessionLogEntry]) -> str:
    buf = io.StringIO()
    write_log(entries, buf)
    return buf.getvalue()


def _parse_command(raw: str) -> tuple[str, str | None]:
    m = _DETECTED_RE.match(raw)
    if m:
        return CMD_TAG_DETECTED, m.group(1)
    return raw, None


def read_log(source: TextIO) -> list[SessionLogEntry]:
    entries: list[SessionLogEntry] = []
    header_seen = False
    for line_no, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        cells = line.split("\t")
        if not header_seen:
            if tuple(cells) != COLUMNS:
                raise LogParseError(line_no, f"bad header, expected {list(COLUMNS)}")
            header_seen = True
            continue
        if len(cells) != len(COLUMNS):
            raise LogParseError(line_no, f"expected {len(COLUMNS)} cells, got {len(cells)}")
        raw_seq, raw_at, raw_cmd, raw_from, raw_to, classification, note = cells
        try:
            seq, at = int(raw_seq), int(raw_at)
            from_step, to_step = int(raw_from), int(raw_to)
        except ValueError as exc:
            raise LogParseError(line_no, f"non-integer numeric cell: {exc}") from None
        command, tag = _parse_command(raw_cmd)
        if command == CMD_TAG_DETECTED and not tag:
            raise LogParseError(line_no, "tag_detected with empty tag")
        entries.append(SessionLogEntry(
            seq=seq,
            at=at,
            command=command,
            from_step=from_step,
            to_step=to_step,
            classification=classification,
            note=note or None,
            tag=tag,
        ))
    if not header_seen:
        raise LogParseError(1, "empty log file")
    return entries


def loads(text: str) -> list[SessionLogEntry]:
    return read_log(io.StringIO(text))


def write_log_file(entries: Iterable[SessionLogEntry], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_log(entries, fh)


def read_log_file(path: str) -> list[SessionLogEntry]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_log(fh)
