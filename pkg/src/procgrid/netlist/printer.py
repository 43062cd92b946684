"""Canonical source emission; parse(print_design(d)) reproduces d structurally."""

from __future__ import annotations

import json

from ..isa import format_program
from .ast import Design, FlatDesign, ProcessDecl, SignalDecl


def _render_signal(sig: SignalDecl) -> str:
    dests = ", ".join(d.render() for d in sig.dests)
    return (
        f"signal {sig.id} : {sig.value_type.render()} @every {sig.period} "
        f"{sig.mode} from {sig.source.render()} to {dests}"
    )


def _render_process(decl: ProcessDecl) -> list[str]:
    lines = [f"process {decl.name} {{"]
    lines.append(f"  class {decl.ae_class}")
    for port in decl.ports:
        lines.append(f"  {port.direction} {port.name} : {port.value_type.render()}")
    for inst in decl.insts:
        lines.append(f"  inst {inst.name} : {inst.decl}")
    for sig in decl.signals:
        lines.append(f"  {_render_signal(sig)}")
    if decl.program is not None:
        lines.append("  program {")
        lines.extend(format_program(decl.program, indent="  "))
        lines.append("  }")
    lines.append("}")
    return lines


def print_design(design: Design) -> str:
    """Emit the canonical text form of a design."""
    out = [f"design {design.name}", ""]
    for vt in design.types:
        out.append(f"type {vt.name} : {vt.signedness}({vt.width})")
    if design.types:
        out.append("")
    for decl in design.declarations:
        out.extend(_render_process(decl))
        out.append("")
    out.append(f"top {design.top}")
    out.append("")
    return "\n".join(out)


def export_flat_json(flat: FlatDesign) -> str:
    """Flat-design export consumed by the analysis tools and the browser UI."""
    doc = {
        "name": flat.name,
        "instances": [
            {"path": i.path, "decl": i.decl, "ae_class": i.ae_class}
            for i in flat.instances
        ],
        "signals": [
            {
                "id": s.id,
                "type": {
                    "name": s.value_type.name,
                    "width": s.value_type.width,
                    "signedness": s.value_type.signedness,
                },
                "mode": s.mode,
                "period": s.period,
                "source": s.source.render(),
                "dests": [d.render() for d in s.dests],
                "taps": [t.render() for t in s.taps],
            }
            for s in flat.signals
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
