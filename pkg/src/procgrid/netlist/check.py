"""Type checking: strong nominal typing over signals, ports, and programs.

All checks run and accumulate; callers get every violation at once.
"""

from __future__ import annotations

from ..errors import TypeCheckFailure, TypeIssue
from ..isa import check_program
from .ast import (
    MAX_PERIOD,
    MAX_WIDTH,
    Design,
    EndpointRef,
    ProcessDecl,
    SignalDecl,
    TypedDesign,
    ValueType,
    types_compatible,
)
from .library import LIBRARY_DECLS


def _loc_line(obj) -> int | None:
    return obj.loc.line if getattr(obj, "loc", None) else None


def _check_width(vt: ValueType, context: str, line: int | None, errors: list[TypeIssue]):
    if vt.width > MAX_WIDTH:
        errors.append(
            TypeIssue(
                f"{context}: type {vt.render()} is {vt.width} bits wide; "
                f"communicated types are limited to {MAX_WIDTH} bits",
                line=line,
            )
        )
    elif vt.width < 1:
        errors.append(
            TypeIssue(f"{context}: type {vt.render()} has non-positive width", line=line)
        )


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _resolve_endpoint(
    decl: ProcessDecl, ref: EndpointRef, all_decls: dict[str, ProcessDecl]
):
    """Return (port_decl, owner_kind) or None; owner_kind is 'own' or 'child'."""
    if ref.inst is None:
        port = decl.port(ref.port)
        return (port, "own") if port else None
    child = next((i for i in decl.insts if i.name == ref.inst), None)
    if child is None or child.decl not in all_decls:
        return None
    port = all_decls[child.decl].port(ref.port)
    return (port, "child") if port else None


def _check_signal(
    decl: ProcessDecl,
    sig: SignalDecl,
    all_decls: dict[str, ProcessDecl],
    errors: list[TypeIssue],
):
    line = _loc_line(sig)
    if sig.value_type.name in ("unsigned", "signed", "raw"):
        _check_width(sig.value_type, f"signal {sig.id}", line, errors)
    if not _is_pow2(sig.period) or sig.period > MAX_PERIOD:
        errors.append(
            TypeIssue(
                f"signal {sig.id}: period {sig.period} must be a power of two "
                f"in 1..{MAX_PERIOD}",
                signal=sig.id,
                line=line,
            )
        )

    expected_dir = {"source": ("in", "out"), "dest": ("out", "in")}
    for role, refs in (("source", (sig.source,)), ("dest", sig.dests)):
        for ref in refs:
            resolved = _resolve_endpoint(decl, ref, all_decls)
            if resolved is None:
                errors.append(
                    TypeIssue(
                        f"signal {sig.id}: {role} endpoint '{ref.render()}' "
                        f"does not resolve to a port",
                        signal=sig.id,
                        line=line,
                    )
                )
                continue
            port, owner = resolved
            own_dir, child_dir = expected_dir[role]
            want = own_dir if owner == "own" else child_dir
            if port.direction != want:
                errors.append(
                    TypeIssue(
                        f"signal {sig.id}: {role} endpoint '{ref.render()}' must be "
                        f"an '{want}' port here, but '{port.name}' is '{port.direction}'",
                        signal=sig.id,
                        line=line,
                    )
                )
            if not types_compatible(sig.value_type, port.value_type):
                errors.append(
                    TypeIssue(
                        f"signal {sig.id}: type {sig.value_type.render()} does not "
                        f"match {role} port '{ref.render()}' of type "
                        f"{port.value_type.render()}",
                        signal=sig.id,
                        line=line,
                    )
                )


def _check_decl(
    decl: ProcessDecl, all_decls: dict[str, ProcessDecl], errors: list[TypeIssue]
):
    line = _loc_line(decl)
    seen: dict[str, str] = {}
    for kind, names in (
        ("port", [p.name for p in decl.ports]),
        ("instance", [i.name for i in decl.insts]),
        ("signal", [s.id for s in decl.signals]),
    ):
        for name in names:
            if name in seen:
                errors.append(
                    TypeIssue(
                        f"process {decl.name}: {kind} '{name}' collides with "
                        f"{seen[name]} '{name}'",
                        line=line,
                    )
                )
            else:
                seen[name] = kind

    for port in decl.ports:
        if port.value_type.name in ("unsigned", "signed", "raw"):
            _check_width(
                port.value_type,
                f"process {decl.name}, port {port.name}",
                _loc_line(port),
                errors,
            )

    if decl.program is not None and decl.insts:
        errors.append(
            TypeIssue(
                f"process {decl.name} declares both a program and sub-instances; "
                f"only leaves execute",
                line=line,
            )
        )
    if decl.program is None and not decl.insts and decl.native is None:
        errors.append(
            TypeIssue(
                f"process {decl.name} has neither a program nor sub-instances",
                line=line,
            )
        )
    if decl.program is not None and decl.signals:
        errors.append(
            TypeIssue(
                f"process {decl.name}: leaf processes cannot declare signals",
                line=line,
            )
        )

    for inst in decl.insts:
        if inst.decl not in all_decls:
            errors.append(
                TypeIssue(
                    f"process {decl.name}: instance '{inst.name}' references "
                    f"unknown process '{inst.decl}'",
                    line=_loc_line(inst),
                )
            )

    if decl.program is not None:
        in_ports = {p.name for p in decl.ports if p.direction == "in"}
        out_ports = {p.name for p in decl.ports if p.direction == "out"}
        for problem in check_program(decl.program, decl.ae_class, in_ports, out_ports):
            errors.append(TypeIssue(f"process {decl.name}: {problem}", line=line))

    used: set[tuple[str | None, str]] = set()
    for sig in decl.signals:
        _check_signal(decl, sig, all_decls, errors)
        for ref in (sig.source, *sig.dests):
            key = (ref.inst, ref.port)
            if key in used:
                errors.append(
                    TypeIssue(
                        f"process {decl.name}: endpoint '{ref.render()}' is "
                        f"connected to more than one signal",
                        signal=sig.id,
                        line=_loc_line(sig),
                    )
                )
            used.add(key)


def _check_recursion(design: Design, all_decls: dict[str, ProcessDecl], errors: list[TypeIssue]):
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def visit(name: str, trail: list[str]):
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            cycle = " -> ".join(trail[trail.index(name):] + [name])
            errors.append(TypeIssue(f"recursive instantiation: {cycle}"))
            return
        state[name] = 0
        decl = all_decls.get(name)
        if decl is not None:
            for inst in decl.insts:
                if inst.decl in all_decls:
                    visit(inst.decl, trail + [name])
        state[name] = 1

    for decl in design.declarations:
        visit(decl.name, [])


def typecheck(design: Design) -> TypedDesign:
    """Verify the whole design; raises TypeCheckFailure carrying every violation."""
    errors: list[TypeIssue] = []
    all_decls = dict(LIBRARY_DECLS)
    all_decls.update(design.decls_by_name())

    for vt in design.types:
        _check_width(vt, f"type {vt.name}", None, errors)

    for decl in design.declarations:
        _check_decl(decl, all_decls, errors)

    if design.top not in design.decls_by_name():
        errors.append(
            TypeIssue(f"top process '{design.top}' is not declared in this design")
        )

    _check_recursion(design, all_decls, errors)

    if errors:
        raise TypeCheckFailure(errors)
    return TypedDesign(design)
