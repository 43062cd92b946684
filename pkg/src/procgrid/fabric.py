"""Compile-time fabric mapping: placement, rectilinear routing, and TDM slots.

Transfers are circuit-switched per slot: a firing signal holds every segment
of its route for that one slot, so two routes conflict only when they share a
segment (same track, same bus, same span) in the same slot. All of this is
fixed before the first cycle runs; the engine never arbitrates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import CapacityError, OffsetBlockers, SchedulingConflict
from .isa import format_program, parse_program
from .netlist import (
    Design,
    Endpoint,
    FlatDesign,
    FlatInstance,
    FlatSignal,
    HierNode,
    PortDecl,
    ValueType,
    elaborate,
    parse_design,
    print_design,
    typecheck,
)

Coord = tuple[int, int]  # (row, col)


@dataclass(frozen=True)
class GridConfig:
    rows: int
    cols: int
    buses_per_track: int = 2
    clock_hz: int = 160_000_000
    bus_width: int = 32
    buffer_depth: int = 1
    probe_reserve_frac: float = 0.05

    def __post_init__(self):
        if self.bus_width != 32:
            raise ValueError("bus width is fixed at 32 bits")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one row and column")


@dataclass(frozen=True)
class Segment:
    """Unit of slot occupancy: one bus span between adjacent switch positions."""

    kind: str  # "row" | "col"
    track: int  # row index for row segments, column index for col segments
    bus: int
    pos: int  # left column / top row of the span


@dataclass(frozen=True)
class Route:
    signal: str
    segments: tuple[tuple[str, int, int], ...]  # (kind, track, pos), bus-agnostic
    switch_points: tuple[Coord, ...]
    local_loop: bool = False


@dataclass(frozen=True)
class Placement:
    cells: dict[str, Coord]
    reserve: tuple[Coord, ...]


@dataclass(frozen=True)
class ScheduleTable:
    """Offsets and per-track bus choices; a signal fires at slots s = offset mod period."""

    frame_length: int
    offsets: dict[str, int]
    buses: dict[str, dict[tuple[str, int], int]]

    def fires_at(self, sid: str, slot: int, period: int) -> bool:
        return slot % period == self.offsets[sid]


@dataclass(frozen=True)
class ProbeRecord:
    """A probe element already woven into the artifact."""

    kind: str  # trace | assert_predicate | assert_bandwidth | ber
    signals: tuple[str, ...]
    params: dict
    path: str
    coord: Coord


@dataclass(frozen=True)
class FileBinding:
    direction: str  # "input" | "output"
    path: str  # host file
    signal: str


@dataclass(frozen=True)
class CompiledArtifact:
    """The unit the engine and shell load: flat design plus fabric mapping."""

    flat: FlatDesign
    grid: GridConfig
    placement: Placement
    routes: dict[str, Route]
    schedule: ScheduleTable
    source: str  # canonical design text, kept for the hierarchy view
    probes: tuple[ProbeRecord, ...] = ()
    bindings: tuple[FileBinding, ...] = ()


# --- placement --------------------------------------------------------------


def _bfs_order(flat: FlatDesign) -> list[str]:
    degree: dict[str, int] = {inst.path: 0 for inst in flat.instances}
    adj: dict[str, set[str]] = {inst.path: set() for inst in flat.instances}
    for sig in flat.signals:
        ends = [sig.source.path] + [d.path for d in sig.dests] + [t.path for t in sig.taps]
        for e in ends:
            degree[e] = degree.get(e, 0) + 1
        for d in ends[1:]:
            adj[sig.source.path].add(d)
            adj[d].add(sig.source.path)

    order: list[str] = []
    seen: set[str] = set()
    remaining = sorted(degree, key=lambda p: (-degree[p], p))
    for start in remaining:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            node = queue.pop(0)
            order.append(node)
            for nxt in sorted(adj[node]):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return order


def place(flat: FlatDesign, grid: GridConfig) -> Placement:
    """Deterministic greedy placement keeping a probe reserve free.

    Instances are ordered breadth-first from the best-connected one; each is
    dropped on the free cell closest to its already-placed neighbors (grid
    center for the seeds), which keeps connected chains adjacent.
    """
    total = grid.rows * grid.cols
    reserve_min = math.ceil(grid.probe_reserve_frac * total)
    n = len(flat.instances)
    if n > total - reserve_min:
        raise CapacityError(
            f"{n} instances do not fit a {grid.rows}x{grid.cols} grid "
            f"with {reserve_min} cell(s) reserved for probes"
        )

    def center_key(coord: Coord):
        r, c = coord
        return (abs(2 * r - (grid.rows - 1)) + abs(2 * c - (grid.cols - 1)), r, c)

    free = {(r, c) for r in range(grid.rows) for c in range(grid.cols)}
    adj: dict[str, set[str]] = {inst.path: set() for inst in flat.instances}
    for sig in flat.signals:
        for d in list(sig.dests) + list(sig.taps):
            adj[sig.source.path].add(d.path)
            adj[d.path].add(sig.source.path)

    cells: dict[str, Coord] = {}
    for path in _bfs_order(flat):
        placed_neighbors = [cells[p] for p in sorted(adj[path]) if p in cells]
        if placed_neighbors:
            best = min(
                free,
                key=lambda rc: (
                    sum(abs(rc[0] - pr) + abs(rc[1] - pc) for pr, pc in placed_neighbors),
                    rc,
                ),
            )
        else:
            best = min(free, key=center_key)
        cells[path] = best
        free.discard(best)

    return Placement(cells=cells, reserve=tuple(sorted(free)))


# --- routing ----------------------------------------------------------------


def path_segments(src: Coord, dst: Coord) -> tuple[list[tuple[str, int, int]], Coord | None]:
    """Row-first rectilinear path from src to dst; returns (segments, corner)."""
    segs: list[tuple[str, int, int]] = []
    r0, c0 = src
    r1, c1 = dst
    for c in range(min(c0, c1), max(c0, c1)):
        segs.append(("row", r0, c))
    for r in range(min(r0, r1), max(r0, r1)):
        segs.append(("col", c1, r))
    corner = (r0, c1) if c0 != c1 and r0 != r1 else None
    return segs, corner


def route_signal(placement: Placement, signal: FlatSignal, grid: GridConfig) -> Route:
    """Row-then-column tree from the source to every destination (and tap)."""
    src = placement.cells[signal.source.path]
    segs: set[tuple[str, int, int]] = set()
    corners: set[Coord] = set()
    for dest in sorted(
        list(signal.dests) + list(signal.taps), key=lambda e: (e.path, e.port)
    ):
        dseg, corner = path_segments(src, placement.cells[dest.path])
        segs.update(dseg)
        if corner is not None:
            corners.add(corner)
    return Route(
        signal=signal.id,
        segments=tuple(sorted(segs)),
        switch_points=tuple(sorted(corners)),
        local_loop=not segs,
    )


# --- scheduling -------------------------------------------------------------

_SEARCH_BUDGET = 200_000


def _track_groups(route: Route) -> dict[tuple[str, int], list[tuple[str, int, int]]]:
    groups: dict[tuple[str, int], list[tuple[str, int, int]]] = {}
    for seg in route.segments:
        groups.setdefault((seg[0], seg[1]), []).append(seg)
    return groups


def schedule(
    flat: FlatDesign,
    placement: Placement,
    routes: dict[str, Route],
    grid: GridConfig,
) -> ScheduleTable:
    """Allocate conflict-free offsets (and per-track buses) for every signal.

    Signals are taken in ascending period order (highest bandwidth first) and
    tried first-fit; if the greedy descent dead-ends the search backtracks, so
    feasible small instances are always found. Raises SchedulingConflict with
    the blocking signals per candidate offset otherwise.
    """
    signals = sorted(flat.signals, key=lambda s: (s.period, s.id))
    frame = max((s.period for s in signals), default=1)
    occupancy: dict[tuple[str, int, int, int, int], str] = {}
    offsets: dict[str, int] = {}
    buses: dict[str, dict[tuple[str, int], int]] = {}
    budget = [_SEARCH_BUDGET]
    first_failure: list[SchedulingConflict] = []

    def try_signal(i: int) -> bool:
        if i == len(signals):
            return True
        sig = signals[i]
        route = routes[sig.id]
        groups = _track_groups(route)
        attempts: list[OffsetBlockers] = []
        for offset in range(sig.period):
            if budget[0] <= 0:
                return False
            budget[0] -= 1
            slots = range(offset, frame, sig.period)
            chosen: dict[tuple[str, int], int] = {}
            blockers: set[str] = set()
            ok = True
            for track, segs in sorted(groups.items()):
                bus_found = None
                for bus in range(grid.buses_per_track):
                    clash = [
                        occupancy.get((k, t, bus, pos, s))
                        for (k, t, pos) in segs
                        for s in slots
                    ]
                    hit = [c for c in clash if c]
                    if not hit:
                        bus_found = bus
                        break
                    blockers.update(hit)
                if bus_found is None:
                    ok = False
                    break
                chosen[track] = bus_found
            if not ok:
                attempts.append(OffsetBlockers(offset, tuple(sorted(blockers))))
                continue
            # commit and recurse
            placed = [
                ((k, t, chosen[(k, t)], pos, s), sig.id)
                for (k, t, pos) in route.segments
                for s in slots
            ]
            for key, val in placed:
                occupancy[key] = val
            offsets[sig.id] = offset
            buses[sig.id] = chosen
            if try_signal(i + 1):
                return True
            for key, _ in placed:
                del occupancy[key]
            del offsets[sig.id]
            del buses[sig.id]
            attempts.append(OffsetBlockers(offset, ("<later signal unschedulable>",)))
        if not first_failure:
            first_failure.append(SchedulingConflict(sig.id, attempts))
        return False

    if not try_signal(0):
        if first_failure:
            raise first_failure[0]
        raise SchedulingConflict("<unknown>", [])
    return ScheduleTable(frame_length=frame, offsets=offsets, buses=buses)


def expand_occupancy(
    flat: FlatDesign,
    routes: dict[str, Route],
    table: ScheduleTable,
    grid: GridConfig,
) -> dict[tuple[Segment, int], str]:
    """Explicit segment x slot matrix over one frame; tests and the loader use
    it to assert at most one occupant per cell."""
    out: dict[tuple[Segment, int], str] = {}
    periods = {s.id: s.period for s in flat.signals}
    for sid, route in routes.items():
        offset = table.offsets[sid]
        for slot in range(offset, table.frame_length, periods[sid]):
            for kind, track, pos in route.segments:
                bus = table.buses[sid].get((kind, track), 0)
                key = (Segment(kind, track, bus, pos), slot)
                if key in out and out[key] != sid:
                    raise AssertionError(
                        f"schedule conflict: {out[key]} and {sid} share {key}"
                    )
                out[key] = sid
    return out


def aggregate_bandwidth(grid: GridConfig, ae_count: int) -> int:
    """Total internal transfer bandwidth in bits per second."""
    return ae_count * grid.buses_per_track * grid.bus_width * grid.clock_hz


# --- compile pipeline and artifact serialization ----------------------------


def build_artifact(design: Design, grid: GridConfig) -> CompiledArtifact:
    """Run the full compile: typecheck, elaborate, place, route, schedule."""
    typed = typecheck(design)
    flat = elaborate(typed)
    placement = place(flat, grid)
    routes = {s.id: route_signal(placement, s, grid) for s in flat.signals}
    table = schedule(flat, placement, routes, grid)
    return CompiledArtifact(
        flat=flat,
        grid=grid,
        placement=placement,
        routes=routes,
        schedule=table,
        source=print_design(design),
    )


def compile_source(text: str, grid: GridConfig) -> CompiledArtifact:
    return build_artifact(parse_design(text), grid)


def _type_doc(vt: ValueType) -> dict:
    return {"name": vt.name, "width": vt.width, "signedness": vt.signedness}


def _type_from(doc: dict) -> ValueType:
    return ValueType(doc["name"], doc["width"], doc["signedness"])


def artifact_to_json(art: CompiledArtifact) -> str:
    doc = {
        "format": "pgc-1",
        "design": {
            "name": art.flat.name,
            "instances": [
                {
                    "path": i.path,
                    "decl": i.decl,
                    "ae_class": i.ae_class,
                    "native": i.native,
                    "ports": [
                        {
                            "name": p.name,
                            "dir": p.direction,
                            "type": _type_doc(p.value_type),
                        }
                        for p in i.ports
                    ],
                    "program": format_program(i.program) if i.program else None,
                }
                for i in art.flat.instances
            ],
            "signals": [
                {
                    "id": s.id,
                    "type": _type_doc(s.value_type),
                    "mode": s.mode,
                    "period": s.period,
                    "source": {"path": s.source.path, "port": s.source.port},
                    "dests": [{"path": d.path, "port": d.port} for d in s.dests],
                    "taps": [{"path": t.path, "port": t.port} for t in s.taps],
                }
                for s in art.flat.signals
            ],
            "hierarchy": [
                {"path": h.path, "decl": h.decl, "kind": h.kind}
                for h in art.flat.hierarchy
            ],
        },
        "grid": {
            "rows": art.grid.rows,
            "cols": art.grid.cols,
            "buses_per_track": art.grid.buses_per_track,
            "clock_hz": art.grid.clock_hz,
            "bus_width": art.grid.bus_width,
            "buffer_depth": art.grid.buffer_depth,
            "probe_reserve_frac": art.grid.probe_reserve_frac,
        },
        "placement": {
            "cells": {p: list(rc) for p, rc in sorted(art.placement.cells.items())},
            "reserve": [list(rc) for rc in art.placement.reserve],
        },
        "routes": {
            sid: {
                "segments": [list(seg) for seg in r.segments],
                "switch_points": [list(pt) for pt in r.switch_points],
                "local_loop": r.local_loop,
            }
            for sid, r in sorted(art.routes.items())
        },
        "schedule": {
            "frame_length": art.schedule.frame_length,
            "offsets": dict(sorted(art.schedule.offsets.items())),
            "buses": {
                sid: {f"{kind}:{track}": bus for (kind, track), bus in sorted(assign.items())}
                for sid, assign in sorted(art.schedule.buses.items())
            },
        },
        "probes": [
            {
                "kind": p.kind,
                "signals": list(p.signals),
                "params": p.params,
                "path": p.path,
                "coord": list(p.coord),
            }
            for p in art.probes
        ],
        "bindings": [
            {"direction": b.direction, "path": b.path, "signal": b.signal}
            for b in art.bindings
        ],
        "source": art.source,
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def artifact_from_json(text: str) -> CompiledArtifact:
    doc = json.loads(text)
    if doc.get("format") != "pgc-1":
        raise ValueError(f"not a compiled-design document: format={doc.get('format')!r}")
    d = doc["design"]
    instances = tuple(
        FlatInstance(
            path=i["path"],
            decl=i["decl"],
            ae_class=i["ae_class"],
            ports=tuple(
                PortDecl(p["name"], p["dir"], _type_from(p["type"])) for p in i["ports"]
            ),
            program=parse_program([(0, ln) for ln in i["program"]]) if i["program"] else None,
            native=i.get("native"),
        )
        for i in d["instances"]
    )
    signals = tuple(
        FlatSignal(
            id=s["id"],
            value_type=_type_from(s["type"]),
            mode=s["mode"],
            period=s["period"],
            source=Endpoint(s["source"]["path"], s["source"]["port"]),
            dests=tuple(Endpoint(x["path"], x["port"]) for x in s["dests"]),
            taps=tuple(Endpoint(x["path"], x["port"]) for x in s.get("taps", [])),
        )
        for s in d["signals"]
    )
    hierarchy = tuple(
        HierNode(h["path"], h["decl"], h["kind"]) for h in d.get("hierarchy", [])
    )
    flat = FlatDesign(d["name"], instances, signals, hierarchy)
    g = doc["grid"]
    grid = GridConfig(
        rows=g["rows"],
        cols=g["cols"],
        buses_per_track=g["buses_per_track"],
        clock_hz=g["clock_hz"],
        bus_width=g["bus_width"],
        buffer_depth=g["buffer_depth"],
        probe_reserve_frac=g["probe_reserve_frac"],
    )
    pl = doc["placement"]
    placement = Placement(
        cells={p: (rc[0], rc[1]) for p, rc in pl["cells"].items()},
        reserve=tuple((rc[0], rc[1]) for rc in pl["reserve"]),
    )
    routes = {
        sid: Route(
            signal=sid,
            segments=tuple((s[0], s[1], s[2]) for s in r["segments"]),
            switch_points=tuple((p[0], p[1]) for p in r["switch_points"]),
            local_loop=r["local_loop"],
        )
        for sid, r in doc["routes"].items()
    }
    sc = doc["schedule"]
    table = ScheduleTable(
        frame_length=sc["frame_length"],
        offsets=dict(sc["offsets"]),
        buses={
            sid: {
                (key.split(":")[0], int(key.split(":")[1])): bus
                for key, bus in assign.items()
            }
            for sid, assign in sc["buses"].items()
        },
    )
    probes = tuple(
        ProbeRecord(
            kind=p["kind"],
            signals=tuple(p["signals"]),
            params=p["params"],
            path=p["path"],
            coord=(p["coord"][0], p["coord"][1]),
        )
        for p in doc.get("probes", [])
    )
    bindings = tuple(
        FileBinding(b["direction"], b["path"], b["signal"])
        for b in doc.get("bindings", [])
    )
    return CompiledArtifact(
        flat=flat,
        grid=grid,
        placement=placement,
        routes=routes,
        schedule=table,
        source=doc.get("source", ""),
        probes=probes,
        bindings=bindings,
    )


def save_artifact(art: CompiledArtifact, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(artifact_to_json(art))


def load_artifact(path: str) -> CompiledArtifact:
    with open(path, "r", encoding="utf-8") as fh:
        return artifact_from_json(fh.read())


def with_additions(
    art: CompiledArtifact,
    *,
    flat: FlatDesign | None = None,
    placement: Placement | None = None,
    routes: dict[str, Route] | None = None,
    schedule_table: ScheduleTable | None = None,
    probes: tuple[ProbeRecord, ...] | None = None,
    bindings: tuple[FileBinding, ...] | None = None,
) -> CompiledArtifact:
    """Copy-with-changes helper used by probe insertion and file binding."""
    return replace(
        art,
        flat=flat if flat is not None else art.flat,
        placement=placement if placement is not None else art.placement,
        routes=routes if routes is not None else art.routes,
        schedule=schedule_table if schedule_table is not None else art.schedule,
        probes=probes if probes is not None else art.probes,
        bindings=bindings if bindings is not None else art.bindings,
    )
