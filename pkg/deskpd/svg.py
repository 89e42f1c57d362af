"""Deterministic SVG rendering of a design (die, rows, instances, ports, wires)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List
from xml.sax.saxutils import quoteattr

from .db import CellClass, Design, Rect

_CLASS_FILL = {
    CellClass.CORE: "#7aa6d8",
    CellClass.BLOCK: "#c98b54",
    CellClass.PAD: "#9a9a9a",
    CellClass.FILLER: "#d8d8d8",
}
_LAYER_STROKE = ["#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]


@dataclass(frozen=True)
class SvgOptions:
    width_px: int = 800
    show_wires: bool = True
    show_flylines: bool = False
    show_pdn: bool = False
    labels: bool = False


def render_layout_svg(design: Design, options: SvgOptions = SvgOptions()) -> str:
    die = design.die
    width = max(die.width, 1)
    height = max(die.height, 1)
    px_h = max(1, round(options.width_px * height / width))
    flip = die.ll.y + die.ur.y

    def rect(r: Rect, cls: str, extra: str = "") -> str:
        return (
            f'<rect class="{cls}" x="{r.ll.x}" y="{flip - r.ur.y}" '
            f'width="{r.width}" height="{r.height}"{extra}/>'
        )

    def line(x1: int, y1: int, x2: int, y2: int, cls: str, stroke: str, w: int) -> str:
        return (
            f'<line class="{cls}" x1="{x1}" y1="{flip - y1}" x2="{x2}" y2="{flip - y2}" '
            f'stroke="{stroke}" stroke-width="{w}"/>'
        )

    stroke = max(1, width // 2000)
    out: List[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{options.width_px}" '
        f'height="{px_h}" viewBox="{die.ll.x} {die.ll.y} {width} {height}">',
        rect(die, "die", f' fill="white" stroke="black" stroke-width="{stroke}"'),
    ]
    for row in design.rows:
        out.append(rect(row.bbox, "row", f' fill="none" stroke="#e0e0e0" stroke-width="{stroke}"'))
    if options.show_pdn:
        for snet in design.special_nets:
            color = "#cc0000" if snet.name == "VDD" else "#0000cc"
            for w in snet.wires:
                out.append(line(w.start.x, w.start.y, w.end.x, w.end.y, "pdn", color, w.width))
    for inst in design.instances:
        if not inst.is_placed:
            continue
        title = f"<title>{inst.name}</title>" if options.labels else ""
        out.append(
            rect(
                inst.bbox,
                f"inst {inst.master.cls.value.lower()}",
                f' fill="{_CLASS_FILL[inst.master.cls]}" stroke="black" stroke-width="{stroke}"',
            ).replace("/>", f">{title}</rect>" if title else "/>")
        )
    if options.show_wires:
        layer_index = {layer.name: layer.index for layer in design.tech.layers}
        for net in design.nets:
            for w in net.wires:
                color = _LAYER_STROKE[(layer_index.get(w.layer, 1) - 1) % len(_LAYER_STROKE)]
                out.append(
                    line(w.start.x, w.start.y, w.end.x, w.end.y, f"wire {w.layer}", color, stroke)
                )
    if options.show_flylines:
        for net in design.nets:
            driver = design.driver(net)
            src = design.pin_position(driver) if driver is not None else None
            if src is None:
                continue
            for load in design.loads(net):
                dst = design.pin_position(load)
                if dst is not None:
                    out.append(line(src.x, src.y, dst.x, dst.y, "flyline", "#999999", stroke))
    radius = max(1, design.row_height() // 4) if design.rows else stroke * 4
    for port in design.ports:
        if port.location is None:
            continue
        out.append(
            f'<circle class="port" cx="{port.location.x}" cy="{flip - port.location.y}" '
            f'r="{radius}" fill="#2ca02c" data-name={quoteattr(port.name)}/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
