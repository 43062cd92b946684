"""Elaboration: expand the instance tree and resolve signals end to end.

The result is the immutable flat form every later stage consumes: leaf
instances with fully-qualified paths, and signals whose endpoints are leaf
ports regardless of how many hierarchy levels the declared connections cross.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ElaborationError
from .ast import (
    Design,
    Endpoint,
    FlatDesign,
    FlatInstance,
    FlatSignal,
    HierNode,
    ProcessDecl,
    SignalDecl,
    TypedDesign,
)
from .library import LIBRARY_DECLS

ROOT_PATH = "top"


@dataclass(frozen=True)
class _Segment:
    """One declared signal, with endpoints made concrete for one instantiation."""

    qual_id: str
    decl: SignalDecl
    source: Endpoint
    dests: tuple[Endpoint, ...]


def _walk_tree(
    design: Design,
    decl: ProcessDecl,
    path: str,
    all_decls: dict[str, ProcessDecl],
    leaves: list[FlatInstance],
    nodes: list[HierNode],
    segments: list[_Segment],
):
    if decl.is_leaf():
        leaves.append(
            FlatInstance(path, decl.name, decl.ae_class, decl.ports, decl.program, decl.native)
        )
        nodes.append(HierNode(path, decl.name, "leaf"))
        return
    nodes.append(HierNode(path, decl.name, "composite"))
    for sig in decl.signals:
        def concrete(ref):
            if ref.inst is None:
                return Endpoint(path, ref.port)
            return Endpoint(f"{path}/{ref.inst}", ref.port)

        segments.append(
            _Segment(
                qual_id=f"{path}/{sig.id}",
                decl=sig,
                source=concrete(sig.source),
                dests=tuple(concrete(d) for d in sig.dests),
            )
        )
    for inst in decl.insts:
        _walk_tree(
            design,
            all_decls[inst.decl],
            f"{path}/{inst.name}",
            all_decls,
            leaves,
            nodes,
            segments,
        )


def elaborate(typed: TypedDesign) -> FlatDesign:
    """Flatten a type-checked design; raises ElaborationError on dangling ports."""
    design = typed.design
    all_decls = dict(LIBRARY_DECLS)
    all_decls.update(design.decls_by_name())

    leaves: list[FlatInstance] = []
    nodes: list[HierNode] = []
    segments: list[_Segment] = []
    _walk_tree(
        design, all_decls[design.top], ROOT_PATH, all_decls, leaves, nodes, segments
    )

    leaf_paths = {inst.path for inst in leaves}
    by_source: dict[Endpoint, _Segment] = {seg.source: seg for seg in segments}

    flat_signals: list[FlatSignal] = []
    visited: set[str] = set()
    for origin in segments:
        if origin.source.path not in leaf_paths:
            continue  # chains are stitched starting from their leaf driver
        chain = [origin]
        final_dests: list[Endpoint] = []
        frontier = [origin]
        visited.add(origin.qual_id)
        while frontier:
            seg = frontier.pop()
            if seg.decl.mode != origin.decl.mode or seg.decl.period != origin.decl.period:
                raise ElaborationError(
                    f"signal {seg.qual_id} continues {origin.qual_id} but declares "
                    f"{seg.decl.mode}/@every {seg.decl.period} instead of "
                    f"{origin.decl.mode}/@every {origin.decl.period}"
                )
            for dest in seg.dests:
                if dest.path in leaf_paths:
                    final_dests.append(dest)
                    continue
                cont = by_source.get(dest)
                if cont is None:
                    raise ElaborationError(
                        f"composite port {dest.render()} is left dangling "
                        f"(signal {seg.qual_id} ends there)"
                    )
                chain.append(cont)
                visited.add(cont.qual_id)
                frontier.append(cont)
        flat_signals.append(
            FlatSignal(
                id=origin.qual_id,
                value_type=origin.decl.value_type,
                mode=origin.decl.mode,
                period=origin.decl.period,
                source=origin.source,
                dests=tuple(sorted(final_dests, key=lambda e: (e.path, e.port))),
            )
        )

    leftovers = sorted(seg.qual_id for seg in segments if seg.qual_id not in visited)
    if leftovers:
        raise ElaborationError(
            f"signal {leftovers[0]} has no leaf driver; its chain starts at a "
            f"dangling composite port"
        )

    connected: set[Endpoint] = set()
    for sig in flat_signals:
        connected.add(sig.source)
        connected.update(sig.dests)
    for inst in leaves:
        for port in inst.ports:
            if Endpoint(inst.path, port.name) not in connected:
                raise ElaborationError(
                    f"port {inst.path}.{port.name} is not connected to any signal"
                )

    return FlatDesign(
        name=design.name,
        instances=tuple(sorted(leaves, key=lambda i: i.path)),
        signals=tuple(sorted(flat_signals, key=lambda s: s.id)),
        hierarchy=tuple(sorted(nodes, key=lambda n: n.path)),
    )
