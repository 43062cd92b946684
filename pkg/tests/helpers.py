"""Shared fixtures and reference oracles for the test suite.

The oracles here are deliberately naive (transitive closure, exhaustive offset
search, brute-force placement) so the production code is checked against an
independent computation, not against itself.
"""

from __future__ import annotations

import hashlib
import random

from procgrid import engine
from procgrid.fabric import (
    CompiledArtifact,
    GridConfig,
    compile_source,
    place,
    route_signal,
    schedule,
)
from procgrid.netlist import (
    Endpoint,
    FlatDesign,
    FlatInstance,
    FlatSignal,
    HierNode,
    PortDecl,
    ValueType,
)

U32 = ValueType("unsigned", 32, "unsigned")


# --- design sources --------------------------------------------------------

def pair_src(period=4, mode="sync", prod_pad=0, cons_pad=0) -> str:
    """Producer/consumer pair: values 0,1,2,... with optional NOP padding to
    stretch either side's loop."""
    prod_nops = "\n".join("    NOP" for _ in range(prod_pad))
    cons_nops = "\n".join("    NOP" for _ in range(cons_pad))
    return f"""design pair

process prod {{
  out o : unsigned(32)
  program {{
    CONST r1, 1
  loop:
    PUT r0, o
    ADD r0, r0, r1
{prod_nops}
    BR loop
  }}
}}

process cons {{
  in i : unsigned(32)
  program {{
  loop:
    GET r2, i
{cons_nops}
    BR loop
  }}
}}

process sys {{
  inst p : prod
  inst c : cons
  signal s : unsigned(32) @every {period} {mode} from p.o to c.i
}}

top sys
"""


# constant-value producer that PUTs on cycle 0, so a fresh run saturates the
# signal from its first slot onward
SATURATED_SRC = """design sat

process prod {
  out o : unsigned(32)
  program {
  loop:
    PUT r0, o
    BR loop
  }
}

process cons {
  in i : unsigned(32)
  program {
  loop:
    GET r2, i
    BR loop
  }
}

process sys {
  inst p : prod
  inst c : cons
  signal s : unsigned(32) @every 4 sync from p.o to c.i
}

top sys
"""

CROSS_WAIT_SRC = """design crosswait

process left {
  in i : unsigned(32)
  out o : unsigned(32)
  program {
    GET r0, i
    PUT r0, o
    HALT
  }
}

process right {
  in i : unsigned(32)
  out o : unsigned(32)
  program {
    GET r0, i
    PUT r0, o
    HALT
  }
}

process sys {
  inst a : left
  inst b : right
  signal ab : unsigned(32) @every 2 sync from a.o to b.i
  signal ba : unsigned(32) @every 2 sync from b.o to a.i
}

top sys
"""

RING3_SRC = """design ring3

process node {
  in i : unsigned(32)
  out o : unsigned(32)
  program {
  loop:
    GET r0, i
    PUT r0, o
    BR loop
  }
}

process sys {
  inst x : node
  inst y : node
  inst z : node
  signal xy : unsigned(32) @every 2 sync from x.o to y.i
  signal yz : unsigned(32) @every 2 sync from y.o to z.i
  signal zx : unsigned(32) @every 2 sync from z.o to x.i
}

top sys
"""

IDENTITY_PIPE_SRC = """design idpipe

process copy {
  in i : unsigned(32)
  out o : unsigned(32)
  program {
  loop:
    GET r0, i
    PUT r0, o
    BR loop
  }
}

process sys {
  inst src : file_source
  inst cp : copy
  inst snk : file_sink
  signal a : unsigned(32) @every 2 sync from src.o to cp.i
  signal b : unsigned(32) @every 2 sync from cp.o to snk.i
}

top sys
"""

# a consumer stuck on a signal nobody drives, while file input keeps arriving
# on the other port: quiet, but an external wake is still possible
FILE_PENDING_SRC = """design filepending

process quitter {
  out o : unsigned(32)
  program {
    HALT
  }
}

process taker {
  in d : unsigned(32)
  in n : unsigned(32)
  program {
    GET r0, n
    GET r1, d
    HALT
  }
}

process sys {
  inst src : file_source
  inst q : quitter
  inst c : taker
  signal data : unsigned(32) @every 2 sync from src.o to c.d
  signal never : unsigned(32) @every 2 sync from q.o to c.n
}

top sys
"""

THREE_LEVEL_SRC = """design deep

process worker {
  in i : unsigned(32)
  out o : unsigned(32)
  program {
  loop:
    GET r0, i
    PUT r0, o
    BR loop
  }
}

process stage {
  in i : unsigned(32)
  out o : unsigned(32)
  inst w1 : worker
  inst w2 : worker
  signal head : unsigned(32) @every 4 sync from i to w1.i
  signal mid : unsigned(32) @every 4 sync from w1.o to w2.i
  signal tail : unsigned(32) @every 4 sync from w2.o to o
}

process sys {
  inst feed : prodhead
  inst s1 : stage
  inst s2 : stage
  inst drain : tailcons
  signal into : unsigned(32) @every 4 sync from feed.o to s1.i
  signal link : unsigned(32) @every 4 sync from s1.o to s2.i
  signal outof : unsigned(32) @every 4 sync from s2.o to drain.i
}

process prodhead {
  out o : unsigned(32)
  program {
    CONST r1, 1
  loop:
    PUT r0, o
    ADD r0, r0, r1
    BR loop
  }
}

process tailcons {
  in i : unsigned(32)
  program {
  loop:
    GET r2, i
    BR loop
  }
}

top sys
"""


def mixed_src(pairs=10) -> str:
    """`pairs` producer/consumer pairs with a spread of periods and modes;
    odd pairs run async with a deliberately slow consumer."""
    periods = [1, 2, 4, 8]
    decls = []
    insts = []
    signals = []
    for k in range(pairs):
        period = periods[k % len(periods)]
        mode = "async" if k % 2 else "sync"
        pad = "    NOP\n    NOP\n    NOP\n" if mode == "async" else ""
        decls.append(f"""process prod{k} {{
  out o : unsigned(32)
  program {{
    CONST r0, {k + 1}
    CONST r1, {2 * k + 3}
  loop:
    PUT r0, o
    ADD r0, r0, r1
    BR loop
  }}
}}

process cons{k} {{
  in i : unsigned(32)
  program {{
  loop:
    GET r2, i
{pad}    BR loop
  }}
}}
""")
        insts.append(f"  inst p{k} : prod{k}\n  inst c{k} : cons{k}")
        signals.append(
            f"  signal s{k} : unsigned(32) @every {period} {mode} "
            f"from p{k}.o to c{k}.i"
        )
    return (
        "design mixed\n\n"
        + "\n".join(decls)
        + "\nprocess sys {\n"
        + "\n".join(insts)
        + "\n"
        + "\n".join(signals)
        + "\n}\n\ntop sys\n"
    )


# --- build and run helpers --------------------------------------------------

def build(src: str, rows: int, cols: int, **grid_kwargs) -> CompiledArtifact:
    return compile_source(src, GridConfig(rows=rows, cols=cols, **grid_kwargs))


def run_cycles(artifact: CompiledArtifact, cycles: int, trace=True,
               breakpoints=None):
    state = engine.SystemState(artifact)
    state.trace_enabled = trace
    stop = engine.run(state, max_cycles=cycles, breakpoints=breakpoints)
    return state, stop


def hashed_run(artifact: CompiledArtifact, cycles: int, chunk=10_000):
    """Run in chunks, folding the trace into a digest so long runs stay
    memory-bounded. Returns (trace digest, final dump json, stop reason)."""
    state = engine.SystemState(artifact)
    digest = hashlib.sha256()
    done = 0
    stop = None
    while done < cycles:
        stop = engine.run(state, max_cycles=min(chunk, cycles - done))
        for line in state.trace:
            digest.update(line.encode())
            digest.update(b"\n")
        state.trace.clear()
        done = state.cycle
        if stop.reason != engine.STOP_CYCLE_LIMIT:
            break
    return digest.hexdigest(), engine.state_dump_json(state), stop


def events(state, kind=None, instance=None, signal=None):
    """Parsed trace events, optionally filtered."""
    import json

    out = []
    for line in state.trace:
        ev = json.loads(line)
        if kind is not None and ev.get("kind") != kind:
            continue
        if instance is not None and ev.get("instance") != instance:
            continue
        if signal is not None and ev.get("signal") != signal:
            continue
        out.append(ev)
    return out


# --- graph oracles ----------------------------------------------------------

def closure_partition(nodes, adjacency):
    """SCC partition from the definition: mutual reachability over the
    transitive closure."""
    order = {n: k for k, n in enumerate(nodes)}
    n = len(nodes)
    reach = [[False] * n for _ in range(n)]
    for a, succs in adjacency.items():
        for b in succs:
            reach[order[a]][order[b]] = True
    for i in range(n):
        reach[i][i] = True
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                row_k = reach[k]
                row_i = reach[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    comps = {}
    for a in nodes:
        i = order[a]
        key = frozenset(
            b for b in nodes if reach[i][order[b]] and reach[order[b]][i]
        )
        comps[key] = True
    return set(comps)


def is_acyclic(nodes, edges) -> bool:
    succs = {n: [] for n in nodes}
    for a, b in edges:
        succs[a].append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}

    def visit(n):
        color[n] = GREY
        for m in succs[n]:
            if color[m] == GREY:
                return False
            if color[m] == WHITE and not visit(m):
                return False
        color[n] = BLACK
        return True

    return all(color[n] != WHITE or visit(n) for n in nodes)


def random_digraph(rng: random.Random, max_nodes=10):
    n = rng.randint(1, max_nodes)
    nodes = [f"n{k}" for k in range(n)]
    adjacency = {a: [] for a in nodes}
    for a in nodes:
        for b in nodes:
            if a != b and rng.random() < 0.25:
                adjacency[a].append(b)
    return nodes, adjacency


# --- scheduling oracle ------------------------------------------------------

def flat_for_schedule(rng: random.Random, n_signals: int, periods=(1, 2, 4, 8),
                      n_insts=6) -> FlatDesign:
    """Hand-built flat design for the scheduler: programs never run, so the
    instances only need distinct ports per endpoint."""
    ports: dict[str, list[PortDecl]] = {f"top/u{k}": [] for k in range(n_insts)}
    paths = sorted(ports)
    signals = []
    for s in range(n_signals):
        src, dst = rng.sample(paths, 2)
        op = f"o{s}"
        ip = f"i{s}"
        ports[src].append(PortDecl(op, "out", U32))
        ports[dst].append(PortDecl(ip, "in", U32))
        signals.append(FlatSignal(
            id=f"top/s{s}",
            value_type=U32,
            mode="sync",
            period=rng.choice(periods),
            source=Endpoint(src, op),
            dests=(Endpoint(dst, ip),),
        ))
    instances = tuple(
        FlatInstance(path=p, decl="u", ae_class="STAN",
                     ports=tuple(ports[p]), program=None)
        for p in paths
    )
    hierarchy = (HierNode("top", "sys", "composite"),) + tuple(
        HierNode(p, "u", "leaf") for p in paths
    )
    return FlatDesign("rand", instances, tuple(sorted(signals, key=lambda s: s.id)),
                      hierarchy)


def exhaustive_feasible(flat: FlatDesign, placement, routes, grid) -> bool:
    """Try every offset assignment (single bus per track): feasible iff some
    assignment keeps every shared segment collision-free. Two signals collide
    on a segment iff their offsets agree modulo the smaller period (periods
    are powers of two)."""
    assert grid.buses_per_track == 1
    sigs = sorted(flat.signals, key=lambda s: s.id)
    segs = {s.id: set(routes[s.id].segments) for s in sigs}
    chosen: list[tuple[str, int, int]] = []  # (sid, period, offset)

    def compatible(sid, period, offset):
        mine = segs[sid]
        for osid, operiod, ooffset in chosen:
            if not (mine & segs[osid]):
                continue
            g = min(period, operiod)
            if offset % g == ooffset % g:
                return False
        return True

    def assign(k):
        if k == len(sigs):
            return True
        sig = sigs[k]
        for offset in range(sig.period):
            if compatible(sig.id, sig.period, offset):
                chosen.append((sig.id, sig.period, offset))
                if assign(k + 1):
                    return True
                chosen.pop()
        return False

    return assign(0)


def try_schedule(flat: FlatDesign, grid: GridConfig):
    """Run the placement/routing/scheduling chain; returns (table, routes) or
    (None, routes) when the scheduler gives up."""
    from procgrid.errors import SchedulingConflict

    placement = place(flat, grid)
    routes = {s.id: route_signal(placement, s, grid) for s in flat.signals}
    try:
        return schedule(flat, placement, routes, grid), placement, routes
    except SchedulingConflict:
        return None, placement, routes


# --- random runnable fixtures ----------------------------------------------

def random_runnable_src(rng: random.Random) -> str:
    """Small compilable design with 1..4 pairs, random periods, modes, and
    loop paddings; every program loops forever."""
    return mixed_like(rng, pairs=rng.randint(1, 4))


def mixed_like(rng: random.Random, pairs: int) -> str:
    decls = []
    insts = []
    signals = []
    for k in range(pairs):
        period = rng.choice([1, 2, 4, 8])
        mode = rng.choice(["sync", "async"])
        prod_pad = "\n".join("    NOP" for _ in range(rng.randint(0, 3)))
        cons_pad = "\n".join("    NOP" for _ in range(rng.randint(0, 3)))
        if prod_pad:
            prod_pad += "\n"
        if cons_pad:
            cons_pad += "\n"
        decls.append(f"""process prod{k} {{
  out o : unsigned(32)
  program {{
    CONST r0, {rng.randint(0, 1000)}
    CONST r1, {rng.randint(1, 9)}
  loop:
    PUT r0, o
    ADD r0, r0, r1
{prod_pad}    BR loop
  }}
}}

process cons{k} {{
  in i : unsigned(32)
  program {{
  loop:
    GET r2, i
{cons_pad}    BR loop
  }}
}}
""")
        insts.append(f"  inst p{k} : prod{k}\n  inst c{k} : cons{k}")
        signals.append(
            f"  signal s{k} : unsigned(32) @every {period} {mode} "
            f"from p{k}.o to c{k}.i"
        )
    return (
        "design randfix\n\n"
        + "\n".join(decls)
        + "\nprocess sys {\n"
        + "\n".join(insts)
        + "\n"
        + "\n".join(signals)
        + "\n}\n\ntop sys\n"
    )
