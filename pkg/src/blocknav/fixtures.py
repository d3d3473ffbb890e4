"""Sample documents shaped like the study materials.

``model_28`` is the workhorse: 28 steps, three sub-parts of graded
complexity (4 blocks in 2 steps / 10 in 5 with 2 asymmetric / 22 in 13
with 3 asymmetric), preview pages before each part, one overview page up
front, and a final joining step that belongs to no sub-part. Every tag is
unique to one step (strict mode). ``lego_multi`` is a small multi-mode
document where repeated pieces map to several steps, for exercising
nearest-step jump resolution.
"""

from __future__ import annotations

from .document import BlockSpec, InstructionDocument, Step, SubPart

_COLORS = ("red", "blue", "yellow", "green", "white", "gray")


def _blocks(prefix: str, count: int, asymmetric: tuple[int, ...] = ()) -> list[BlockSpec]:
    out = []
    for i in range(1, count + 1):
        out.append(BlockSpec(
            tag_id=f"{prefix}{i}",
            label=f"{prefix} block {i}",
            color=_COLORS[(i - 1) % len(_COLORS)],
            asymmetric=i in asymmetric,
        ))
    return out


def model_28(title: str = "Tri-part tower") -> InstructionDocument:
    """Strict-mode document with 28 steps and 3 sub-parts."""
    catalog = (
        _blocks("L", 4)
        + _blocks("M", 10, asymmetric=(3, 7))
        + _blocks("H", 22, asymmetric=(5, 11, 20))
        + [BlockSpec(tag_id="J1", label="joining pin", color="black")]
    )

    def assembly(index: int, blocks: list[str], subpart: str | None, caption: str) -> Step:
        return Step(index=index, kind="assembly", blocks_introduced=tuple(blocks),
                    subpart_id=subpart, caption=caption)

    def preview(index: int, subpart: str, caption: str) -> Step:
        return Step(index=index, kind="preview", subpart_id=subpart, caption=caption)

    steps = [
        Step(index=1, kind="overview_page", caption="The finished model at a glance"),
        preview(2, "low", "Base plate, fully assembled"),
        assembly(3, ["L1", "L2"], "low", "Lay the first base layer"),
        assembly(4, ["L3", "L4"], "low", "Close the base"),
        preview(5, "medium", "Mid section, fully assembled"),
        preview(6, "m-core", "Core of the mid section"),
        assembly(7, ["M1", "M2"], "m-core", "Start the core"),
        assembly(8, ["M3", "M4"], "m-core", "Cap the core (mind the slanted piece)"),
        assembly(9, ["M5", "M6"], "medium", "First outer ring"),
        assembly(10, ["M7", "M8"], "medium", "Second outer ring (slanted piece faces out)"),
        assembly(11, ["M9", "M10"], "medium", "Top off the mid section"),
        preview(12, "high", "Tower, fully assembled"),
        preview(13, "h-frame", "Tower frame"),
        assembly(14, ["H1", "H2"], "h-frame", "Frame footing"),
        assembly(15, ["H3", "H4"], "h-frame", "First frame layer"),
        assembly(16, ["H5", "H6"], "h-frame", "Second frame layer (angled strut)"),
        assembly(17, ["H7", "H8"], "h-frame", "Third frame layer"),
        assembly(18, ["H9"], "h-frame", "Frame brace"),
        assembly(19, ["H10"], "h-frame", "Close the frame"),
        preview(20, "h-shell", "Tower shell"),
        assembly(21, ["H11", "H12"], "h-shell", "Shell footing (angled panel)"),
        assembly(22, ["H13", "H14"], "h-shell", "First shell course"),
        assembly(23, ["H15", "H16"], "h-shell", "Second shell course"),
        assembly(24, ["H17", "H18"], "h-shell", "Third shell course"),
        assembly(25, ["H19", "H20"], "h-shell", "Fourth shell course (angled panel)"),
        assembly(26, ["H21"], "h-shell", "Shell trim"),
        assembly(27, ["H22"], "h-shell", "Crown the tower"),
        assembly(28, ["J1"], None, "Join the three sub-parts"),
    ]

    subparts = (
        SubPart(id="low", name="Base plate", step_range=(2, 4)),
        SubPart(id="medium", name="Mid section", step_range=(5, 11)),
        SubPart(id="m-core", name="Mid core", parent="medium", step_range=(6, 8)),
        SubPart(id="high", name="Tower", step_range=(12, 27)),
        SubPart(id="h-frame", name="Tower frame", parent="high", step_range=(13, 19)),
        SubPart(id="h-shell", name="Tower shell", parent="high", step_range=(20, 27)),
    )

    return InstructionDocument(
        title=title,
        format_version=1,
        tag_mode="strict",
        catalog=tuple(catalog),
        steps=tuple(steps),
        subparts=subparts,
    )


def lego_multi(title: str = "Little truck") -> InstructionDocument:
    """Multi-mode document: several pieces recur across steps."""
    catalog = (
        BlockSpec(tag_id="plate2x4", label="2x4 plate", color="gray"),
        BlockSpec(tag_id="brick2x2", label="2x2 brick", color="red"),
        BlockSpec(tag_id="wheel", label="wheel", color="black"),
        BlockSpec(tag_id="slope", label="slope", color="red", asymmetric=True),
        BlockSpec(tag_id="window", label="window", color="white"),
    )
    steps = (
        Step(index=1, kind="preview", subpart_id="truck", caption="The finished truck"),
        Step(index=2, kind="assembly", blocks_introduced=("plate2x4",), subpart_id="truck",
             caption="Chassis plate"),
        Step(index=3, kind="assembly", blocks_introduced=("wheel", "wheel"), subpart_id="truck",
             caption="Front axle"),
        Step(index=4, kind="assembly", blocks_introduced=("brick2x2",), subpart_id="truck",
             caption="Engine block"),
        Step(index=5, kind="assembly", blocks_introduced=("slope",), subpart_id="truck",
             caption="Hood"),
        Step(index=6, kind="assembly", blocks_introduced=("window",), subpart_id="truck",
             caption="Cab front"),
        Step(index=7, kind="assembly", blocks_introduced=("brick2x2",), subpart_id="truck",
             caption="Cab back"),
        Step(index=8, kind="assembly", blocks_introduced=("wheel", "wheel"), subpart_id="truck",
             caption="Rear axle"),
        Step(index=9, kind="assembly", blocks_introduced=("plate2x4",), subpart_id="truck",
             caption="Bed floor"),
        Step(index=10, kind="assembly", blocks_introduced=("slope",), subpart_id="truck",
             caption="Tailgate"),
    )
    subparts = (SubPart(id="truck", name="Truck", step_range=(1, 10)),)
    return InstructionDocument(
        title=title,
        format_version=1,
        tag_mode="multi",
        catalog=catalog,
        steps=steps,
        subparts=subparts,
    )
