"""Tour of the instruction-document model: load a fixture, inspect its
shape, index its blocks, and compare sub-part complexity.

Run from the repository root:  python3 demos/01_document_tour.py
"""

from blocknav.document import (
    build_block_index,
    complexity_metrics,
    parse_document,
    serialize_document,
    validate,
)
from blocknav.fixtures import lego_multi, model_28


def main():
    doc = model_28()
    print(f"document: {doc.title!r}, {doc.step_count} steps, tag mode {doc.tag_mode}")
    print(f"catalog: {len(doc.catalog)} block kinds")
    print()

    print("step kinds in order:")
    row = "".join(
        {"assembly": "A", "preview": "P", "overview_page": "O"}[s.kind] for s in doc.steps
    )
    print(f"  {row}   (A=assembly, P=preview, O=overview page)")
    print()

    print("sub-part tree:")
    by_parent = {}
    for sp in doc.subparts:
        by_parent.setdefault(sp.parent, []).append(sp)

    def walk(parent, depth):
        for sp in by_parent.get(parent, []):
            lo, hi = sp.step_range
            print(f"  {'  ' * depth}{sp.name} (steps {lo}-{hi})")
            walk(sp.id, depth + 1)

    walk(None, 0)
    print()

    print("complexity by scope (blocks are physical placements, steps are assembly steps):")
    for scope in (None, "low", "medium", "high"):
        rep = complexity_metrics(doc, scope=scope)
        name = scope or "whole document"
        print(f"  {name:>16}: blocks={rep.block_count:2d}  steps={rep.step_count:2d}  "
              f"asymmetric={rep.asymmetric_count}")
    print()

    report = validate(doc)
    print(f"validation: {len(report)} violation(s)")
    print()

    # Round trip: the serialized form is the interchange format the CLI
    # and the session service speak.
    text = serialize_document(doc)
    again = parse_document(text)
    print(f"serialize -> parse round trip: {'stable' if serialize_document(again) == text else 'UNSTABLE'}"
          f" ({len(text)} bytes)")
    print()

    multi = lego_multi()
    index = build_block_index(multi)
    print(f"{multi.title!r} is a multi-mode document; repeated pieces map to several steps:")
    for tag in sorted(index.entries):
        steps = ", ".join(str(s) for s in index.entries[tag])
        print(f"  {tag:>9} -> steps {steps}")


if __name__ == "__main__":
    main()
