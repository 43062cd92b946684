"""Non-intrusive observation: tap probes and host file transfer.

A probe turns a point-to-point signal into a one-to-many one: the original
destinations keep their handshake untouched while the probe's tap endpoint is
exempt from flow control, so attaching instrumentation can never change what
the design under test does. The probe element itself occupies a reserved grid
cell and its tap branch rides the signal's own time slots.

File transfer reuses the same machinery from the host side: file_source and
file_sink are ordinary library leaves bound to host files before a run.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

from .errors import (
    BadSpec,
    FileFormatError,
    MissingFile,
    NoReserveError,
    TapRouteError,
    TypeMismatch,
    UnknownSignal,
)
from .fabric import (
    CompiledArtifact,
    FileBinding,
    GridConfig,
    Placement,
    ProbeRecord,
    Route,
    ScheduleTable,
    expand_occupancy,
    path_segments,
    with_additions,
)
from .netlist import (
    ANY_TYPE,
    Endpoint,
    FlatDesign,
    FlatInstance,
    FlatSignal,
    HierNode,
    PortDecl,
    ValueType,
)

PROBE_KINDS = ("trace", "assert_predicate", "assert_bandwidth", "ber")


@dataclass(frozen=True)
class ProbeSpec:
    """What to attach: kind, the signal(s) to tap, and kind-specific params.

    trace             one signal, params {}
    assert_predicate  one signal, params {"op", "value", optional "signed"}
    assert_bandwidth  one signal, params {"floor", "window"}
    ber               two signals (reference first), params {}
    """

    kind: str
    signals: tuple[str, ...]
    params: dict | None = None


def _validate_spec(artifact: CompiledArtifact, spec: ProbeSpec):
    if spec.kind not in PROBE_KINDS:
        raise BadSpec(f"unknown probe kind {spec.kind!r}")
    want = 2 if spec.kind == "ber" else 1
    if len(spec.signals) != want:
        raise BadSpec(f"{spec.kind} probe taps {want} signal(s), got {len(spec.signals)}")
    by_id = {s.id: s for s in artifact.flat.signals}
    for sid in spec.signals:
        if sid not in by_id:
            raise UnknownSignal(f"no signal {sid!r} in the design")
    if spec.kind == "assert_bandwidth":
        params = spec.params or {}
        if "floor" not in params or "window" not in params:
            raise BadSpec("assert_bandwidth needs 'floor' and 'window' params")
        if int(params["window"]) < artifact.schedule.frame_length:
            raise BadSpec("bandwidth window must cover at least one frame")
        if not 0.0 <= float(params["floor"]) <= 1.0:
            raise BadSpec("bandwidth floor must lie in [0, 1]")
    if spec.kind == "ber":
        a, b = (by_id[sid].value_type for sid in spec.signals)
        if a != b:
            raise TypeMismatch(
                f"ber streams must agree in type: {a.render()} vs {b.render()}"
            )


def _route_cells(route: Route, src: tuple[int, int]) -> set[tuple[int, int]]:
    """Every grid coordinate the routed tree touches, the source included."""
    cells = {src}
    for kind, track, pos in route.segments:
        if kind == "row":
            cells.add((track, pos))
            cells.add((track, pos + 1))
        else:
            cells.add((pos, track))
            cells.add((pos + 1, track))
    return cells


def insert_probe(artifact: CompiledArtifact, spec: ProbeSpec) -> CompiledArtifact:
    """Weave a probe element into a compiled design.

    Takes a cell from the probe reserve (the free one nearest the tapped
    signal's source), anchors a branch at the nearest point of the existing
    route tree, and claims the branch segments in the signal's own slots.
    Raises NoReserveError when the reserve is empty and TapRouteError when the
    branch cannot share the slots conflict-free.
    """
    _validate_spec(artifact, spec)
    if not artifact.placement.reserve:
        raise NoReserveError("no reserved cells left for probes")

    by_id = {s.id: s for s in artifact.flat.signals}
    primary = by_id[spec.signals[0]]
    src_cell = artifact.placement.cells[primary.source.path]

    # nearest reserve cell to the tapped source, row-major on ties
    coord = min(
        artifact.placement.reserve,
        key=lambda rc: (abs(rc[0] - src_cell[0]) + abs(rc[1] - src_cell[1]), rc),
    )
    index = len(artifact.probes)
    path = f"probe/p{index}"
    tap_ports = ("a", "b") if spec.kind == "ber" else ("i",)

    occupancy = {
        (seg.kind, seg.track, seg.bus, seg.pos, slot): sid
        for (seg, slot), sid in expand_occupancy(
            artifact.flat, artifact.routes, artifact.schedule, artifact.grid
        ).items()
    }

    new_routes = dict(artifact.routes)
    new_buses = {sid: dict(assign) for sid, assign in artifact.schedule.buses.items()}
    new_signals: dict[str, FlatSignal] = {s.id: s for s in artifact.flat.signals}

    for sid, port in zip(spec.signals, tap_ports):
        sig = new_signals[sid]
        route = new_routes[sid]
        sig_src = artifact.placement.cells[sig.source.path]
        anchor = min(
            _route_cells(route, sig_src),
            key=lambda rc: (abs(rc[0] - coord[0]) + abs(rc[1] - coord[1]), rc),
        )
        branch, corner = path_segments(anchor, coord)
        fresh = [seg for seg in branch if seg not in route.segments]
        slots = range(
            artifact.schedule.offsets[sid], artifact.schedule.frame_length, sig.period
        )

        # claim each new track's segments on one bus for the signal's slots
        groups: dict[tuple[str, int], list[tuple[str, int, int]]] = {}
        for seg in fresh:
            groups.setdefault((seg[0], seg[1]), []).append(seg)
        chosen: dict[tuple[str, int], int] = {}
        for track, segs in sorted(groups.items()):
            preferred = new_buses[sid].get(track)
            # a track the tree already rides is pinned to the tree's bus; only
            # brand-new tracks get a free choice
            if preferred is not None:
                candidates = [preferred]
            else:
                candidates = list(range(artifact.grid.buses_per_track))
            found = None
            for bus in candidates:
                clash = [
                    occupancy.get((k, t, bus, pos, s))
                    for (k, t, pos) in segs
                    for s in slots
                    if occupancy.get((k, t, bus, pos, s)) not in (None, sid)
                ]
                if not clash:
                    found = bus
                    break
            if found is None:
                raise TapRouteError(
                    f"probe branch for {sid} blocked on {track[0]} track {track[1]}"
                )
            chosen[track] = found
        for track, bus in chosen.items():
            for seg in groups[track]:
                for s in slots:
                    occupancy[(seg[0], seg[1], bus, seg[2], s)] = sid
            if track not in new_buses[sid]:
                new_buses[sid][track] = bus

        new_routes[sid] = Route(
            signal=sid,
            segments=tuple(sorted(set(route.segments) | set(fresh))),
            switch_points=tuple(
                sorted(set(route.switch_points) | ({corner} if corner else set()) | {anchor})
            ),
            local_loop=route.local_loop and not fresh,
        )
        new_signals[sid] = FlatSignal(
            id=sig.id,
            value_type=sig.value_type,
            mode=sig.mode,
            period=sig.period,
            source=sig.source,
            dests=sig.dests,
            taps=tuple(list(sig.taps) + [Endpoint(path, port)]),
        )

    probe_ports = tuple(
        PortDecl(port, "in", ANY_TYPE) for port in tap_ports
    )
    probe_inst = FlatInstance(
        path=path,
        decl=f"probe_{spec.kind}",
        ae_class="STAN",
        ports=probe_ports,
        program=None,
        native=f"probe_{spec.kind}",
    )
    instances = tuple(sorted(
        list(artifact.flat.instances) + [probe_inst], key=lambda i: i.path
    ))
    signals = tuple(new_signals[s.id] for s in artifact.flat.signals)
    hierarchy = tuple(sorted(
        list(artifact.flat.hierarchy) + [HierNode(path, probe_inst.decl, "leaf")],
        key=lambda h: h.path,
    ))
    flat = FlatDesign(artifact.flat.name, instances, signals, hierarchy)

    cells = dict(artifact.placement.cells)
    cells[path] = coord
    placement = Placement(
        cells=cells,
        reserve=tuple(rc for rc in artifact.placement.reserve if rc != coord),
    )
    record = ProbeRecord(
        kind=spec.kind,
        signals=tuple(spec.signals),
        params=dict(spec.params or {}),
        path=path,
        coord=coord,
    )
    schedule = ScheduleTable(
        frame_length=artifact.schedule.frame_length,
        offsets=dict(artifact.schedule.offsets),
        buses=new_buses,
    )
    return with_additions(
        artifact,
        flat=flat,
        placement=placement,
        routes=new_routes,
        schedule_table=schedule,
        probes=tuple(list(artifact.probes) + [record]),
    )


# --- probe readouts ---------------------------------------------------------


def probe_observations(state, path: str, port: str = "i") -> list[tuple[int, int]]:
    return list(state.probe_values.get((path, port), []))


@dataclass(frozen=True)
class BerResult:
    errors: int
    total_bits: int
    rate: float


def ber(test: list[int], reference: list[int], width: int) -> BerResult:
    """Bit error ratio of two value streams compared pairwise in arrival
    order up to the shorter length: differing bits over compared bits."""
    mask = (1 << width) - 1
    pairs = min(len(test), len(reference))
    errors = 0
    for i in range(pairs):
        errors += ((test[i] ^ reference[i]) & mask).bit_count()
    total = pairs * width
    return BerResult(errors=errors, total_bits=total,
                     rate=errors / total if total else 0.0)


def probe_ber(state, path: str) -> BerResult:
    """ber() over the two tapped streams of a ber probe (reference on port a)."""
    record = next((p for p in state.artifact.probes if p.path == path), None)
    if record is None or record.kind != "ber":
        raise BadSpec(f"{path!r} is not a ber probe")
    ref = [v for _, v in state.probe_values.get((path, "a"), [])]
    obs = [v for _, v in state.probe_values.get((path, "b"), [])]
    sig = next(s for s in state.artifact.flat.signals if s.id == record.signals[0])
    return ber(obs, ref, sig.value_type.width or 32)


def check_bandwidth_assertion(
    trace,
    signal: str,
    floor: float,
    window: int,
    artifact: CompiledArtifact,
    total_cycles: int | None = None,
) -> dict:
    """Walk consecutive windows of a trace and fail at the first one whose
    utilization (transfers over offered slots) drops below the floor.

    `trace` is an iterable of event dicts or raw trace lines; only whole
    windows are judged, so pass total_cycles when the trace alone does not
    show how far the run went."""
    periods = {s.id: s.period for s in artifact.flat.signals}
    if signal not in periods:
        raise UnknownSignal(f"no signal {signal!r}")
    if window < artifact.schedule.frame_length:
        raise BadSpec("bandwidth window must cover at least one frame")
    counts: dict[int, int] = {}
    seen = -1
    for event in trace:
        if isinstance(event, str):
            event = json.loads(event)
        cycle = event.get("cycle", -1)
        if cycle > seen:
            seen = cycle
        if event.get("kind") == "transfer" and event.get("signal") == signal:
            counts[cycle // window] = counts.get(cycle // window, 0) + 1
    if total_cycles is None:
        total_cycles = seen + 1
    opportunities = window // periods[signal]
    for k in range(total_cycles // window):
        got = counts.get(k, 0)
        utilization = got / opportunities
        if utilization < floor:
            return {
                "ok": False,
                "floor": floor,
                "window": window,
                "at_cycle": (k + 1) * window,
                "window_start": k * window,
                "transfers": got,
                "utilization": utilization,
            }
    return {"ok": True, "floor": floor, "window": window,
            "windows_checked": total_cycles // window}


def probe_bandwidth(state, path: str) -> dict:
    """Offline re-check of a bandwidth assertion probe from its own tap
    observations; agrees with the engine's online window checks."""
    record = next((p for p in state.artifact.probes if p.path == path), None)
    if record is None or record.kind != "assert_bandwidth":
        raise BadSpec(f"{path!r} is not a bandwidth assertion probe")
    floor = float(record.params["floor"])
    window = int(record.params["window"])
    sig = next(s for s in state.artifact.flat.signals if s.id == record.signals[0])
    trace = (
        {"cycle": cycle, "kind": "transfer", "signal": sig.id}
        for cycle, _ in state.probe_values.get((path, "i"), [])
    )
    return check_bandwidth_assertion(
        trace, sig.id, floor, window, state.artifact, total_cycles=state.cycle
    )


def probe_report(state) -> list[dict]:
    out = []
    for record in state.artifact.probes:
        ports = ("a", "b") if record.kind == "ber" else ("i",)
        observed = {p: len(state.probe_values.get((record.path, p), [])) for p in ports}
        entry = {
            "path": record.path,
            "kind": record.kind,
            "signals": list(record.signals),
            "coord": list(record.coord),
            "observed": observed,
            "dropped": state.probe_drops.get(record.path, 0),
        }
        if record.kind == "assert_predicate":
            entry["failures"] = state.assert_failures.get(record.path, 0)
        if record.kind == "ber":
            result = probe_ber(state, record.path)
            entry["ber"] = {
                "errors": result.errors,
                "total_bits": result.total_bits,
                "rate": result.rate,
            }
        if record.kind == "assert_bandwidth":
            entry["bandwidth"] = probe_bandwidth(state, record.path)
        out.append(entry)
    return out


# --- host file transfer -----------------------------------------------------


def _value_range(vt: ValueType) -> tuple[int, int]:
    width = vt.width or 32
    if vt.signedness == "signed":
        return -(1 << (width - 1)), (1 << (width - 1)) - 1
    return 0, (1 << width) - 1


def load_value_file(path: str, vt: ValueType) -> list[int]:
    """Parse one value per line, decimal or 0x hex, # comments allowed.
    Values are range-checked against the signal type and returned as bit
    patterns ready for the bus."""
    if not os.path.exists(path):
        raise MissingFile(f"input file {path!r} does not exist")
    width = vt.width or 32
    lo, hi = _value_range(vt)
    values: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                value = int(text, 16) if text.lower().startswith(("0x", "-0x")) else int(text, 10)
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: not a value: {text!r}") from None
            if text.lower().startswith("0x"):
                # hex is a raw pattern; only the width constrains it
                if not 0 <= value < (1 << width):
                    raise FileFormatError(
                        f"{path}:{lineno}: 0x{value:x} does not fit {width} bits"
                    )
            elif not lo <= value <= hi:
                raise FileFormatError(
                    f"{path}:{lineno}: {value} outside {vt.render()} range [{lo}, {hi}]"
                )
            values.append(value & ((1 << width) - 1))
    return values


def write_value_file(path: str, patterns: list[int], vt: ValueType):
    """Inverse of load_value_file: signed types print as signed decimals."""
    width = vt.width or 32
    sign_bit = 1 << (width - 1)
    with open(path, "w", encoding="utf-8") as fh:
        for p in patterns:
            if vt.signedness == "signed" and p & sign_bit:
                fh.write(f"{p - (1 << width)}\n")
            else:
                fh.write(f"{p}\n")


def bind_file(
    artifact: CompiledArtifact, signal: str, direction: str, path: str
) -> CompiledArtifact:
    """Attach a host file to a file_source (input) or file_sink (output)
    signal. Input files are parsed right away so format problems surface at
    bind time, not mid-run."""
    by_id = {s.id: s for s in artifact.flat.signals}
    if signal not in by_id:
        raise UnknownSignal(f"no signal {signal!r} in the design")
    sig = by_id[signal]
    by_path = {i.path: i for i in artifact.flat.instances}
    if direction == "input":
        src = by_path[sig.source.path]
        if src.native != "file_source":
            raise BadSpec(f"signal {signal!r} is not driven by a file_source")
        load_value_file(path, sig.value_type)
    elif direction == "output":
        sinks = [d for d in sig.dests if by_path[d.path].native == "file_sink"]
        if not sinks:
            raise BadSpec(f"signal {signal!r} has no file_sink destination")
    else:
        raise BadSpec(f"direction must be 'input' or 'output', got {direction!r}")
    kept = [b for b in artifact.bindings
            if not (b.signal == signal and b.direction == direction)]
    kept.append(FileBinding(direction=direction, path=path, signal=signal))
    return with_additions(artifact, bindings=tuple(kept))


def grid_for(flat: FlatDesign, reserve_frac: float = 0.05, **kwargs) -> GridConfig:
    """Smallest square grid that fits the design plus its probe reserve."""
    n = len(flat.instances)
    side = 1
    while side * side - math.ceil(reserve_frac * side * side) < n:
        side += 1
    return GridConfig(rows=side, cols=side, probe_reserve_frac=reserve_frac, **kwargs)
