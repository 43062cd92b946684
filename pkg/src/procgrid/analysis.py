"""Design browsing and run inspection.

Three complementary graph views: the hierarchy as authored (one composite at a
time), the fully elaborated flat leaf graph under any scope, and the strongly
connected condensation of the flat graph, which is what you want when hunting
feedback loops. Everything here is read-only over the compiled artifact and,
for live views, the run state.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .engine import HALTED, RUNNING, SLEEP_GET, SLEEP_PUT, SystemState
from .errors import UnknownScope, UnknownSignal
from .fabric import CompiledArtifact
from .graphs import condense, strongly_connected_components
from .netlist import Design, FlatDesign, parse_design


@dataclass(frozen=True)
class GraphNode:
    path: str
    decl: str
    kind: str  # "leaf" | "composite"
    ae_class: str | None = None


@dataclass(frozen=True)
class GraphEdge:
    signal: str
    source: str  # instance path
    dest: str
    mode: str
    period: int
    tap: bool = False


@dataclass(frozen=True)
class ExternalLink:
    """Half edge: a signal crossing the scope boundary."""

    signal: str
    endpoint: str  # instance path inside the scope
    direction: str  # "in" (driven from outside) | "out" (leaves the scope)


@dataclass(frozen=True)
class DesignGraph:
    scope: str
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    externals: tuple[ExternalLink, ...] = ()


def _hier_node(flat: FlatDesign, scope: str):
    for node in flat.hierarchy:
        if node.path == scope:
            return node
    raise UnknownScope(f"no instance at path {scope!r}")


def hierarchy_view(design: Design, flat: FlatDesign, scope: str) -> dict:
    """One level of the design as authored: the composite at `scope`, its
    child instances, and the signal segments declared right there."""
    node = _hier_node(flat, scope)
    decl = design.decls_by_name()[node.decl]
    children = []
    for inst in decl.insts:
        sub = design.decls_by_name().get(inst.decl)
        kind = "leaf" if (sub is None or sub.is_leaf()) else "composite"
        child_count = 0 if sub is None or sub.is_leaf() else len(sub.insts)
        children.append({"name": inst.name, "decl": inst.decl, "kind": kind,
                         "children": child_count})
    signals = []
    for sig in decl.signals:
        def ep(e):
            return f"{e.inst}.{e.port}" if e.inst else e.port

        signals.append({
            "id": sig.id,
            "type": sig.value_type.render(),
            "mode": sig.mode,
            "period": sig.period,
            "source": ep(sig.source),
            "dests": [ep(d) for d in sig.dests],
        })
    ports = [
        {"name": p.name, "dir": p.direction, "type": p.value_type.render()}
        for p in decl.ports
    ]
    return {
        "scope": scope,
        "decl": node.decl,
        "kind": node.kind,
        "ports": ports,
        "children": children,
        "signals": signals,
    }


def flat_view(flat: FlatDesign, scope: str = "top") -> DesignGraph:
    """Leaf instances under `scope` with one edge per signal destination;
    signals crossing the boundary become half edges."""
    if scope != "top":
        _hier_node(flat, scope)
    prefix = scope + "/"

    def inside(path: str) -> bool:
        return path == scope or path.startswith(prefix)

    nodes = tuple(
        GraphNode(path=i.path, decl=i.decl, kind="leaf", ae_class=i.ae_class)
        for i in flat.instances
        if inside(i.path)
    )
    node_paths = {n.path for n in nodes}
    edges: list[GraphEdge] = []
    externals: list[ExternalLink] = []
    for sig in flat.signals:
        src_in = sig.source.path in node_paths
        pairs = [(d, False) for d in sig.dests] + [(t, True) for t in sig.taps]
        for dest, is_tap in pairs:
            dst_in = dest.path in node_paths
            if src_in and dst_in:
                edges.append(GraphEdge(sig.id, sig.source.path, dest.path,
                                       sig.mode, sig.period, is_tap))
            elif src_in and not dst_in:
                externals.append(ExternalLink(sig.id, sig.source.path, "out"))
            elif dst_in and not src_in:
                externals.append(ExternalLink(sig.id, dest.path, "in"))
    return DesignGraph(
        scope=scope,
        nodes=nodes,
        edges=tuple(sorted(edges, key=lambda e: (e.signal, e.dest))),
        externals=tuple(sorted(set(externals), key=lambda x: (x.signal, x.endpoint))),
    )


def scc_view(flat: FlatDesign, scope: str = "top") -> dict:
    """Strongly connected components of the flat graph plus the condensation
    DAG; components are numbered by their smallest member so the numbering is
    stable across runs."""
    graph = flat_view(flat, scope)
    nodes = sorted(n.path for n in graph.nodes)
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for e in graph.edges:
        if not e.tap and e.dest not in adjacency[e.source]:
            adjacency[e.source].append(e.dest)
    for succs in adjacency.values():
        succs.sort()
    comps = strongly_connected_components(nodes, adjacency)
    dag = condense(comps, adjacency)
    return {
        "scope": scope,
        "components": [list(c) for c in comps],
        "dag_edges": [list(e) for e in dag],
    }


# --- live run views ---------------------------------------------------------

_DISPLAY = {
    RUNNING: "processing",
    SLEEP_PUT: "waiting_comm",
    SLEEP_GET: "waiting_comm",
    HALTED: "halted",
}


def live_status(state: SystemState) -> dict:
    """Per-instance activity for the array view: processing, waiting_comm
    (with the blocking port and signal), or halted."""
    instances = {}
    for path in sorted(state.aes):
        ae = state.aes[path]
        rec = {
            "status": ae.status,
            "display": _DISPLAY[ae.status],
            "kind": ae.kind,
            "pc": ae.pc,
            "executed": ae.executed,
            "sleeps": ae.sleeps,
            "sleep_cycles": ae.sleep_cycles,
        }
        if ae.sleep_port is not None:
            rec["port"] = ae.sleep_port
            rec["signal"] = state.port_signal.get((path, ae.sleep_port), "")
        instances[path] = rec
    counts = state.status_counts()
    return {
        "cycle": state.cycle,
        "instances": instances,
        "counts": {
            "processing": counts[RUNNING],
            "waiting_comm": counts[SLEEP_PUT] + counts[SLEEP_GET],
            "halted": counts[HALTED],
        },
    }


def signal_utilization(trace, signal: str, window: tuple[int, int],
                       artifact: CompiledArtifact) -> float:
    """Transfers observed in [start, end) of a trace divided by the slots the
    schedule offered the signal there; the window must cover a whole frame.
    `trace` is an iterable of event dicts or raw trace lines."""
    periods = {s.id: s.period for s in artifact.flat.signals}
    if signal not in periods:
        raise UnknownSignal(f"no signal {signal!r}")
    start, end = window
    if end - start < artifact.schedule.frame_length:
        raise ValueError("window shorter than one frame")
    fired = 0
    for event in trace:
        if isinstance(event, str):
            event = json.loads(event)
        if (event.get("kind") == "transfer" and event.get("signal") == signal
                and start <= event["cycle"] < end):
            fired += 1
    return fired / ((end - start) // periods[signal])


def utilization_summary(state: SystemState) -> dict:
    """Transfers actually fired over slots offered, per signal and overall."""
    table = state.artifact.schedule
    out = {}
    total_fired = 0
    total_offered = 0
    for sig in state.artifact.flat.signals:
        offset = table.offsets[sig.id]
        if state.cycle > offset:
            offered = (state.cycle - 1 - offset) // sig.period + 1
        else:
            offered = 0
        fired = state.transfer_counts[sig.id]
        total_fired += fired
        total_offered += offered
        out[sig.id] = {
            "period": sig.period,
            "offered": offered,
            "fired": fired,
            "utilization": fired / offered if offered else 0.0,
        }
    return {
        "cycle": state.cycle,
        "signals": out,
        "overall": total_fired / total_offered if total_offered else 0.0,
    }


# --- exports ----------------------------------------------------------------


def graph_to_json(graph: DesignGraph) -> str:
    return json.dumps(asdict(graph), indent=2, sort_keys=True)


def graph_to_dot(graph: DesignGraph) -> str:
    """Graphviz digraph; solid for sync, dashed for async, dotted for taps."""
    lines = [f'digraph "{graph.scope}" {{', "  rankdir=LR;"]
    for node in graph.nodes:
        label = f"{node.path}\\n{node.decl}"
        lines.append(f'  "{node.path}" [label="{label}" shape=box];')
    for e in graph.edges:
        style = "dotted" if e.tap else ("dashed" if e.mode == "async" else "solid")
        lines.append(
            f'  "{e.source}" -> "{e.dest}" '
            f'[label="{e.signal} @{e.period}" style={style}];'
        )
    for x in graph.externals:
        anchor = f"ext_{x.signal}_{x.direction}".replace("/", "_")
        lines.append(f'  "{anchor}" [label="{x.signal}" shape=plaintext];')
        if x.direction == "in":
            lines.append(f'  "{anchor}" -> "{x.endpoint}" [style=dashed color=gray];')
        else:
            lines.append(f'  "{x.endpoint}" -> "{anchor}" [style=dashed color=gray];')
    lines.append("}")
    return "\n".join(lines)


def artifact_design(artifact: CompiledArtifact) -> Design:
    """Re-parse the canonical source carried in the artifact; the hierarchy
    view works from the authored form, not the flattened one."""
    return parse_design(artifact.source)
