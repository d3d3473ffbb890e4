"""Instruction documents: the navigable material.

A document is an ordered list of steps, a catalog of tagged blocks, and a
hierarchy of sub-parts. Assembly steps introduce blocks layer by layer;
preview steps show a finished sub-part before its steps begin; a single
overview page may open the document. Each block carries a printed tag id,
and the block index maps tag ids back to the steps that introduce them --
in strict tag mode that mapping is one-to-one, in multi mode a tag may
appear in several steps and jump resolution picks among them.

The on-disk format is canonical JSON (UTF-8): top-level fields ``title``,
``format_version``, ``tag_mode``, ``catalog``, ``steps``, ``subparts``,
with steps ordered by index and the catalog by tag_id. Parsing a document,
serializing it, and parsing again yields an equal document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

FORMAT_VERSION = 1

STEP_KINDS = ("assembly", "preview", "overview_page")
TAG_MODES = ("strict", "multi")

# Rule ids reported by validate(), in the order violations are scanned.
R_DUPLICATE_STEP_INDEX = "DUPLICATE_STEP_INDEX"
R_STEP_INDEX_GAP = "STEP_INDEX_GAP"
R_EMPTY_TAG_ID = "EMPTY_TAG_ID"
R_DUPLICATE_CATALOG_TAG = "DUPLICATE_CATALOG_TAG"
R_UNKNOWN_TAG_REFERENCE = "UNKNOWN_TAG_REFERENCE"
R_DUPLICATE_TAG_STRICT = "DUPLICATE_TAG_STRICT"
R_ASSEMBLY_WITHOUT_BLOCKS = "ASSEMBLY_WITHOUT_BLOCKS"
R_BLOCKS_ON_NONASSEMBLY = "BLOCKS_ON_NONASSEMBLY"
R_UNKNOWN_SUBPART_REFERENCE = "UNKNOWN_SUBPART_REFERENCE"
R_BROKEN_SUBPART_RANGE = "BROKEN_SUBPART_RANGE"
R_PREVIEW_WITHOUT_SUBPART = "PREVIEW_WITHOUT_SUBPART"
R_PREVIEW_AFTER_STEPS = "PREVIEW_AFTER_STEPS"


class DocumentError(Exception):
    """A document violates its structural contract.

    ``violations`` holds the full validation report when the error was
    raised by :func:`parse_document`.
    """

    def __init__(self, message: str, violations: Optional[list["Violation"]] = None):
        super().__init__(message)
        self.violations = violations or []


class MalformedSyntax(DocumentError):
    pass


class DuplicateStepIndex(DocumentError):
    pass


class UnknownTagReference(DocumentError):
    pass


class DuplicateTagInStrictMode(DocumentError):
    pass


class BrokenSubpartRange(DocumentError):
    pass


class UnknownSubpart(DocumentError):
    pass


@dataclass(frozen=True)
class BlockSpec:
    """One physical block: its printed tag id, label, color, symmetry."""

    tag_id: str
    label: str = ""
    color: str = ""
    asymmetric: bool = False


@dataclass(frozen=True)
class Step:
    index: int
    kind: str
    blocks_introduced: tuple[str, ...] = ()
    subpart_id: Optional[str] = None
    caption: str = ""
    image_ref: Optional[str] = None


@dataclass(frozen=True)
class SubPart:
    id: str
    name: str
    parent: Optional[str] = None
    step_range: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class InstructionDocument:
    """Immutable after construction; safe to share across threads."""

    title: str
    format_version: int
    tag_mode: str
    catalog: tuple[BlockSpec, ...]
    steps: tuple[Step, ...]
    subparts: tuple[SubPart, ...]

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def step(self, index: int) -> Step:
        """Step by its 1-based index (valid documents are dense 1..N)."""
        s = self.steps[index - 1]
        if s.index != index:
            raise MalformedSyntax(f"step indices are not dense at {index}")
        return s

    def subpart(self, subpart_id: str) -> SubPart:
        for sp in self.subparts:
            if sp.id == subpart_id:
                return sp
        raise UnknownSubpart(f"unknown sub-part {subpart_id!r}")

    def subpart_path(self, step_index: int) -> list[str]:
        """Names of the sub-parts containing a step, outermost first."""
        chain = [
            sp
            for sp in self.subparts
            if sp.step_range[0] <= step_index <= sp.step_range[1]
        ]
        chain.sort(key=lambda sp: sp.step_range[1] - sp.step_range[0], reverse=True)
        return [sp.name for sp in chain]

    def innermost_subpart(self, step_index: int) -> Optional[SubPart]:
        best: Optional[SubPart] = None
        for sp in self.subparts:
            lo, hi = sp.step_range
            if lo <= step_index <= hi:
                if best is None or hi - lo < best.step_range[1] - best.step_range[0]:
                    best = sp
        return best

    def assembly_steps(self) -> list[Step]:
        return [s for s in self.steps if s.kind == "assembly"]


@dataclass(frozen=True)
class Violation:
    rule: str
    severity: str
    location: str
    message: str

    def to_line(self) -> str:
        return f"{self.rule}\t{self.severity}\t{self.location}\t{self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def to_text(self) -> str:
        return "\n".join(v.to_line() for v in self.violations)


@dataclass(frozen=True)
class BlockIndex:
    """tag_id -> ascending step indices that introduce the block."""

    entries: dict[str, tuple[int, ...]]

    def steps_for(self, tag_id: str) -> tuple[int, ...]:
        try:
            return self.entries[tag_id]
        except KeyError:
            raise UnknownTagReference(f"tag {tag_id!r} not in index") from None

    def __contains__(self, tag_id: str) -> bool:
        return tag_id in self.entries


@dataclass(frozen=True)
class ComplexityReport:
    block_count: int
    step_count: int
    asymmetric_count: int


def _require(cond: bool, message: str):
    if not cond:
        raise MalformedSyntax(message)


def _load_str(obj: dict, key: str, where: str, default=None) -> str:
    if key not in obj:
        if default is not None:
            return default
        raise MalformedSyntax(f"{where}: missing field {key!r}")
    val = obj[key]
    _require(isinstance(val, str), f"{where}: field {key!r} must be a string")
    return val


def load_document(text: str) -> InstructionDocument:
    """Structural parse only: shape and types, no semantic invariants.

    Use :func:`parse_document` for the checked path; this loose loader
    exists so :func:`validate` has something to lint.
    """
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedSyntax(f"not valid document text: {exc}") from exc
    _require(isinstance(raw, dict), "top level must be an object")

    known = {"title", "format_version", "tag_mode", "catalog", "steps", "subparts"}
    extras = set(raw) - known
    _require(not extras, f"unknown top-level fields: {sorted(extras)}")
    for key in known:
        _require(key in raw, f"missing top-level field {key!r}")

    _require(isinstance(raw["format_version"], int) and raw["format_version"] >= 1,
             "format_version must be a positive integer")
    _require(raw["tag_mode"] in TAG_MODES, f"tag_mode must be one of {TAG_MODES}")
    _require(isinstance(raw["title"], str), "title must be a string")
    for key in ("catalog", "steps", "subparts"):
        _require(isinstance(raw[key], list), f"{key} must be a list")

    catalog = []
    for i, item in enumerate(raw["catalog"]):
        where = f"catalog[{i}]"
        _require(isinstance(item, dict), f"{where} must be an object")
        asym = item.get("asymmetric", False)
        _require(isinstance(asym, bool), f"{where}: asymmetric must be a boolean")
        catalog.append(BlockSpec(
            tag_id=_load_str(item, "tag_id", where),
            label=_load_str(item, "label", where, default=""),
            color=_load_str(item, "color", where, default=""),
            asymmetric=asym,
        ))

    steps = []
    for i, item in enumerate(raw["steps"]):
        where = f"steps[{i}]"
        _require(isinstance(item, dict), f"{where} must be an object")
        _require(isinstance(item.get("index"), int), f"{where}: index must be an integer")
        kind = _load_str(item, "kind", where)
        _require(kind in STEP_KINDS, f"{where}: kind must be one of {STEP_KINDS}")
        blocks = item.get("blocks_introduced", [])
        _require(isinstance(blocks, list) and all(isinstance(b, str) for b in blocks),
                 f"{where}: blocks_introduced must be a list of tag ids")
        subpart_id = item.get("subpart_id")
        _require(subpart_id is None or isinstance(subpart_id, str),
                 f"{where}: subpart_id must be a string or null")
        image_ref = item.get("image_ref")
        _require(image_ref is None or isinstance(image_ref, str),
                 f"{where}: image_ref must be a string or null")
        steps.append(Step(
            index=item["index"],
            kind=kind,
            blocks_introduced=tuple(blocks),
            subpart_id=subpart_id,
            caption=_load_str(item, "caption", where, default=""),
            image_ref=image_ref,
        ))
    steps.sort(key=lambda s: s.index)

    subparts = []
    for i, item in enumerate(raw["subparts"]):
        where = f"subparts[{i}]"
        _require(isinstance(item, dict), f"{where} must be an object")
        rng = item.get("step_range")
        _require(isinstance(rng, list) and len(rng) == 2
                 and all(isinstance(x, int) for x in rng),
                 f"{where}: step_range must be a pair of integers")
        parent = item.get("parent")
        _require(parent is None or isinstance(parent, str),
                 f"{where}: parent must be a string or null")
        subparts.append(SubPart(
            id=_load_str(item, "id", where),
            name=_load_str(item, "name", where, default=""),
            parent=parent,
            step_range=(rng[0], rng[1]),
        ))

    return InstructionDocument(
        title=raw["title"],
        format_version=raw["format_version"],
        tag_mode=raw["tag_mode"],
        catalog=tuple(catalog),
        steps=tuple(steps),
        subparts=tuple(subparts),
    )


def validate(doc: InstructionDocument) -> ValidationReport:
    """Lint a structurally parsed document against every placement rule.

    Violations are data, not errors: the report lists rule id, severity and
    location for each broken rule, and is empty exactly when the document
    honors all invariants.
    """
    out: list[Violation] = []

    def bad(rule: str, location: str, message: str):
        out.append(Violation(rule, "error", location, message))

    # Step index density: exactly 1..N.
    seen: dict[int, int] = {}
    for s in doc.steps:
        seen[s.index] = seen.get(s.index, 0) + 1
    for idx, count in sorted(seen.items()):
        if count > 1:
            bad(R_DUPLICATE_STEP_INDEX, f"step:{idx}", f"index {idx} appears {count} times")
    n = len(doc.steps)
    expected = set(range(1, n + 1))
    missing = expected - set(seen)
    stray = set(seen) - expected
    for idx in sorted(missing):
        bad(R_STEP_INDEX_GAP, f"step:{idx}", f"index {idx} missing; steps must cover 1..{n}")
    for idx in sorted(stray):
        bad(R_STEP_INDEX_GAP, f"step:{idx}", f"index {idx} out of range 1..{n}")

    # Catalog: non-empty unique tag ids, no whitespace (tags end up in
    # tab-separated logs and wire bodies).
    catalog_tags: set[str] = set()
    for spec in doc.catalog:
        loc = f"catalog:{spec.tag_id or '<empty>'}"
        if not spec.tag_id or spec.tag_id != spec.tag_id.strip() or any(c.isspace() for c in spec.tag_id):
            bad(R_EMPTY_TAG_ID, loc, "tag_id must be non-empty with no whitespace")
            continue
        if spec.tag_id in catalog_tags:
            bad(R_DUPLICATE_CATALOG_TAG, loc, f"tag {spec.tag_id!r} declared twice in catalog")
        catalog_tags.add(spec.tag_id)

    subpart_ids = {sp.id for sp in doc.subparts}

    # Per-step rules.
    tag_steps: dict[str, list[int]] = {}
    for s in doc.steps:
        loc = f"step:{s.index}"
        if s.kind == "assembly" and not s.blocks_introduced:
            bad(R_ASSEMBLY_WITHOUT_BLOCKS, loc, "assembly step introduces no blocks")
        if s.kind != "assembly" and s.blocks_introduced:
            bad(R_BLOCKS_ON_NONASSEMBLY, loc, f"{s.kind} step must not introduce blocks")
        for tag in s.blocks_introduced:
            if tag not in catalog_tags:
                bad(R_UNKNOWN_TAG_REFERENCE, loc, f"tag {tag!r} not in catalog")
            tag_steps.setdefault(tag, []).append(s.index)
        if s.subpart_id is not None and s.subpart_id not in subpart_ids:
            bad(R_UNKNOWN_SUBPART_REFERENCE, loc, f"sub-part {s.subpart_id!r} not declared")
        if s.kind == "preview" and s.subpart_id is None:
            bad(R_PREVIEW_WITHOUT_SUBPART, loc, "preview step names no sub-part")

    if doc.tag_mode == "strict":
        for tag, indices in sorted(tag_steps.items()):
            if len(indices) > 1:
                bad(R_DUPLICATE_TAG_STRICT, f"catalog:{tag}",
                    f"strict mode but tag {tag!r} appears in steps {sorted(indices)}")

    # Sub-part ranges: well-formed, inside the document, children contained,
    # siblings disjoint.
    by_id = {sp.id: sp for sp in doc.subparts}
    for sp in doc.subparts:
        loc = f"subpart:{sp.id}"
        lo, hi = sp.step_range
        if lo > hi or lo < 1 or (n and hi > n):
            bad(R_BROKEN_SUBPART_RANGE, loc, f"range [{lo},{hi}] not inside 1..{n}")
            continue
        if sp.parent is not None:
            parent = by_id.get(sp.parent)
            if parent is None:
                bad(R_UNKNOWN_SUBPART_REFERENCE, loc, f"parent {sp.parent!r} not declared")
            else:
                plo, phi = parent.step_range
                if not (plo <= lo and hi <= phi):
                    bad(R_BROKEN_SUBPART_RANGE, loc,
                        f"range [{lo},{hi}] escapes parent {sp.parent!r} [{plo},{phi}]")
    siblings: dict[Optional[str], list[SubPart]] = {}
    for sp in doc.subparts:
        siblings.setdefault(sp.parent, []).append(sp)
    for group in siblings.values():
        group.sort(key=lambda sp: sp.step_range)
        for a, b in zip(group, group[1:]):
            if a.step_range[1] >= b.step_range[0]:
                bad(R_BROKEN_SUBPART_RANGE, f"subpart:{b.id}",
                    f"range overlaps sibling {a.id!r}")

    # Previews must precede the steps they preview.
    for s in doc.steps:
        if s.kind != "preview" or s.subpart_id not in by_id:
            continue
        sp = by_id[s.subpart_id]
        lo, hi = sp.step_range
        first_assembly = None
        for t in doc.steps:
            if t.kind == "assembly" and lo <= t.index <= hi:
                first_assembly = t.index
                break
        if first_assembly is None:
            bad(R_PREVIEW_AFTER_STEPS, f"step:{s.index}",
                f"sub-part {sp.id!r} has no assembly steps to preview")
        elif s.index >= first_assembly:
            bad(R_PREVIEW_AFTER_STEPS, f"step:{s.index}",
                f"preview at {s.index} not before first assembly step {first_assembly}"
                f" of sub-part {sp.id!r}")

    return ValidationReport(out)


# parse_document raises the most specific error class for the first
# violation found, scanning in this order.
_RULE_ERRORS = (
    (R_DUPLICATE_STEP_INDEX, DuplicateStepIndex),
    (R_STEP_INDEX_GAP, DuplicateStepIndex),
    (R_EMPTY_TAG_ID, MalformedSyntax),
    (R_DUPLICATE_CATALOG_TAG, MalformedSyntax),
    (R_UNKNOWN_TAG_REFERENCE, UnknownTagReference),
    (R_DUPLICATE_TAG_STRICT, DuplicateTagInStrictMode),
    (R_UNKNOWN_SUBPART_REFERENCE, UnknownTagReference),
    (R_BROKEN_SUBPART_RANGE, BrokenSubpartRange),
    (R_PREVIEW_AFTER_STEPS, BrokenSubpartRange),
)


def parse_document(text: str) -> InstructionDocument:
    """Parse and fully check a document; raises on any broken invariant."""
    doc = load_document(text)
    report = validate(doc)
    if report.ok:
        return doc
    for rule, error_cls in _RULE_ERRORS:
        for v in report:
            if v.rule == rule:
                raise error_cls(f"{v.location}: {v.message}", report.violations)
    v = report.violations[0]
    raise DocumentError(f"{v.location}: {v.message}", report.violations)


def serialize_document(doc: InstructionDocument) -> str:
    """Canonical form: steps by index, catalog by tag_id, stable key order."""
    payload = {
        "title": doc.title,
        "format_version": doc.format_version,
        "tag_mode": doc.tag_mode,
        "catalog": [
            {
                "tag_id": b.tag_id,
                "label": b.label,
                "color": b.color,
                "asymmetric": b.asymmetric,
            }
            for b in sorted(doc.catalog, key=lambda b: b.tag_id)
        ],
        "steps": [
            {
                "index": s.index,
                "kind": s.kind,
                "blocks_introduced": list(s.blocks_introduced),
                "subpart_id": s.subpart_id,
                "caption": s.caption,
                "image_ref": s.image_ref,
            }
            for s in sorted(doc.steps, key=lambda s: s.index)
        ],
        "subparts": [
            {
                "id": sp.id,
                "name": sp.name,
                "parent": sp.parent,
                "step_range": list(sp.step_range),
            }
            for sp in sorted(doc.subparts, key=lambda sp: (sp.step_range, sp.id))
        ],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def build_block_index(doc: InstructionDocument) -> BlockIndex:
    """Map every introduced tag to the ascending steps that introduce it."""
    entries: dict[str, list[int]] = {}
    for s in doc.steps:
        if s.kind != "assembly":
            continue
        for tag in s.blocks_introduced:
            bucket = entries.setdefault(tag, [])
            if s.index not in bucket:
                bucket.append(s.index)
    return BlockIndex({tag: tuple(sorted(ix)) for tag, ix in entries.items()})


def complexity_metrics(doc: InstructionDocument, scope: Optional[str] = None) -> ComplexityReport:
    """Step/block/asymmetry counts over a sub-part's range (or the whole doc).

    Only assembly steps count: preview and overview pages are presentation,
    not work, so a sub-part spanning [2,4] with a preview at 2 still reports
    two steps.
    """
    if scope is None:
        lo, hi = 1, len(doc.steps)
    else:
        lo, hi = doc.subpart(scope).step_range

    asym_tags = {b.tag_id for b in doc.catalog if b.asymmetric}
    blocks = 0
    steps = 0
    asym = 0
    for s in doc.steps:
        if s.kind != "assembly" or not (lo <= s.index <= hi):
            continue
        steps += 1
        blocks += len(s.blocks_introduced)
        asym += sum(1 for t in s.blocks_introduced if t in asym_tags)
    return ComplexityReport(block_count=blocks, step_count=steps, asymmetric_count=asym)
