"""Cycle-accurate two-phase executor.

Each cycle runs a compute phase (every running element issues exactly one
instruction; a blocked PUT or GET puts the element to sleep with the program
counter frozen, so the instruction reissues on wake) followed by a bus phase
(every signal whose slot matches cycle mod frame attempts its transfer).
Wakeups granted during the bus phase take effect in the next compute phase.

There is no runtime arbitration anywhere: the bus phase just replays the
compile-time slot table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .fabric import CompiledArtifact

WORD_MASK = 0xFFFFFFFF

# statuses
RUNNING = "running"
SLEEP_PUT = "sleeping_on_put"
SLEEP_GET = "sleeping_on_get"
HALTED = "halted"

# stop reasons for run()
STOP_CYCLE_LIMIT = "cycle_limit"
STOP_BREAKPOINT = "breakpoint"
STOP_DEADLOCK = "deadlock"
STOP_ALL_HALTED = "all_halted"
STOP_PAUSED = "paused"

_OP_CONST = 0
_OP_MOV = 1
_OP_ADD = 2
_OP_SUB = 3
_OP_MUL = 4
_OP_AND = 5
_OP_OR = 6
_OP_XOR = 7
_OP_SHL = 8
_OP_SHR = 9
_OP_CMPEQ = 10
_OP_CMPLT = 11
_OP_BR = 12
_OP_BRZ = 13
_OP_PUT = 14
_OP_GET = 15
_OP_NOP = 16
_OP_HALT = 17

_OPCODE = {
    "CONST": _OP_CONST, "MOV": _OP_MOV, "ADD": _OP_ADD, "SUB": _OP_SUB,
    "MUL": _OP_MUL, "AND": _OP_AND, "OR": _OP_OR, "XOR": _OP_XOR,
    "SHL": _OP_SHL, "SHR": _OP_SHR, "CMPEQ": _OP_CMPEQ, "CMPLT": _OP_CMPLT,
    "BR": _OP_BR, "BRZ": _OP_BRZ, "PUT": _OP_PUT, "GET": _OP_GET,
    "NOP": _OP_NOP, "HALT": _OP_HALT,
}


def compile_program(program) -> list[tuple]:
    """Lower parsed instructions to int-opcode tuples with resolved branch targets."""
    labels = program.label_map()
    out = []
    for ins in program.instrs:
        code = _OPCODE[ins.op]
        if code in (_OP_BR,):
            out.append((code, labels[ins.args[0]]))
        elif code == _OP_BRZ:
            out.append((code, ins.args[0], labels[ins.args[1]]))
        elif code == _OP_CONST:
            out.append((code, ins.args[0], ins.args[1] & WORD_MASK))
        else:
            out.append((code, *ins.args))
    return out


class AE:
    """Runtime state of one array element."""

    __slots__ = (
        "path", "kind", "ae_class", "code", "pc", "regs", "status", "sleep_port",
        "out_bufs", "in_bufs", "executed", "sleeps", "sleep_cycles",
        "file_values", "file_cursor", "file_window", "collected",
    )

    def __init__(self, path: str, kind: str, ae_class: str, code: list[tuple] | None):
        self.path = path
        self.kind = kind  # program | file_source | file_sink | probe
        self.ae_class = ae_class
        self.code = code or []
        self.pc = 0
        self.regs = [0] * 16
        self.status = RUNNING if kind == "program" else RUNNING
        self.sleep_port: str | None = None
        self.out_bufs: dict[str, list[int]] = {}
        self.in_bufs: dict[str, list[int]] = {}
        self.executed = 0
        self.sleeps = 0        # blocked-issue transitions
        self.sleep_cycles = 0  # whole cycles spent asleep, the power proxy
        # file_source state
        self.file_values: list[int] = []
        self.file_cursor = 0
        self.file_window: list[int] = []
        # file_sink state
        self.collected: list[int] = []


class _Wire:
    """Per-signal runtime record resolved to AE object references."""

    __slots__ = ("sid", "mode", "period", "offset", "mask", "src_ae", "src_port",
                 "dests", "taps")

    def __init__(self, sid, mode, period, offset, mask, src_ae, src_port, dests, taps):
        self.sid = sid
        self.mode = mode
        self.period = period
        self.offset = offset
        self.mask = mask
        self.src_ae = src_ae
        self.src_port = src_port
        self.dests = dests  # list[(AE, port)]
        self.taps = taps    # list[(AE, port)]


@dataclass
class DeadlockReport:
    """Wait-for analysis of a quiesced system."""

    cycle: int
    edges: list[tuple[str, str]]
    cycles: list[list[str]]
    starved: list[str]

    def render(self) -> str:
        lines = [f"deadlock detected at cycle {self.cycle}"]
        for group in self.cycles:
            lines.append("  cycle: " + " -> ".join(group + [group[0]]))
        for path in self.starved:
            lines.append(f"  starved: {path}")
        for a, b in self.edges:
            lines.append(f"  {a} waits on {b}")
        return "\n".join(lines)


class SystemState:
    """Everything the engine mutates while a design runs."""

    def __init__(self, artifact: CompiledArtifact, input_values: dict[str, list[int]] | None = None):
        self.artifact = artifact
        self.cycle = 0
        self.frame = artifact.schedule.frame_length
        self.trace: list[str] = []
        self.trace_enabled = True
        self.trace_file = None  # optional open handle, written per cycle
        self.last_activity = 0
        self.deadlock: DeadlockReport | None = None
        self.transfer_counts: dict[str, int] = {}
        # probe observations keyed by (probe path, tap port): (cycle, value)
        self.probe_values: dict[tuple[str, str], list[tuple[int, int]]] = {}
        self.probe_drops: dict[str, int] = {}
        self.assert_failures: dict[str, int] = {}
        self._events: list[tuple[str, str, str, int | None]] = []
        self.last_cycle_events: list[tuple[str, str, str, int | None]] = []

        depth = artifact.grid.buffer_depth
        self.aes: dict[str, AE] = {}
        probe_paths = {p.path for p in artifact.probes}
        for inst in artifact.flat.instances:
            if inst.native in ("file_source", "file_sink"):
                kind = inst.native
            elif inst.path in probe_paths or (inst.native or "").startswith("probe"):
                kind = "probe"
            else:
                kind = "program"
            code = compile_program(inst.program) if inst.program else None
            ae = AE(inst.path, kind, inst.ae_class, code)
            for port in inst.ports:
                if port.direction == "out":
                    ae.out_bufs[port.name] = []
                else:
                    ae.in_bufs[port.name] = []
            self.aes[inst.path] = ae

        if input_values is None:
            input_values = _load_bound_inputs(artifact)
        for path, values in input_values.items():
            if path in self.aes:
                self.aes[path].file_values = list(values)

        self._probe_by_path = {p.path: p for p in artifact.probes}
        self._buffer_depth = depth
        # bandwidth assertions checked online at window boundaries:
        # (path, tap key, signal, period, floor, window)
        self._bw_probes: list[tuple[str, tuple[str, str], str, int, float, int]] = []
        periods = {s.id: s.period for s in artifact.flat.signals}
        for p in artifact.probes:
            if p.kind == "assert_bandwidth":
                sid = p.signals[0]
                self._bw_probes.append((
                    p.path, (p.path, "i"), sid, periods[sid],
                    float(p.params["floor"]), int(p.params["window"]),
                ))

        # port -> signal map for event annotation and wait-for edges
        self.port_signal: dict[tuple[str, str], str] = {}
        self.signal_mask: dict[str, int] = {}
        self.wires: list[_Wire] = []
        for sig in artifact.flat.signals:
            self.transfer_counts[sig.id] = 0
            mask = (1 << sig.value_type.width) - 1 if sig.value_type.width else WORD_MASK
            src_ae = self.aes[sig.source.path]
            dests = [(self.aes[d.path], d.port) for d in sig.dests]
            taps = [(self.aes[t.path], t.port) for t in sig.taps]
            offset = artifact.schedule.offsets[sig.id]
            wire = _Wire(sig.id, sig.mode, sig.period, offset, mask,
                         src_ae, sig.source.port, dests, taps)
            self.wires.append(wire)
            self.signal_mask[sig.id] = mask
            self.port_signal[(sig.source.path, sig.source.port)] = sig.id
            for d in sig.dests:
                self.port_signal[(d.path, d.port)] = sig.id
            for t in sig.taps:
                self.port_signal[(t.path, t.port)] = sig.id

        # per-slot firing lists over one frame
        self.slot_wires: list[list[_Wire]] = [[] for _ in range(self.frame)]
        for wire in sorted(self.wires, key=lambda w: w.sid):
            for slot in range(wire.offset, self.frame, wire.period):
                self.slot_wires[slot].append(wire)

        paths = sorted(self.aes)
        self._program_aes = [self.aes[p] for p in paths if self.aes[p].kind == "program"]
        self._source_aes = [self.aes[p] for p in paths if self.aes[p].kind == "file_source"]
        self._sink_aes = [self.aes[p] for p in paths if self.aes[p].kind == "file_sink"]

    # --- event plumbing ---

    def emit(self, kind: str, signal: str = "", instance: str = "", value: int | None = None):
        self._events.append((kind, signal, instance, value))

    def _flush_events(self):
        if not self._events:
            self.last_cycle_events = []
            return
        self._events.sort(key=lambda e: (e[0], e[1], e[2]))
        self.last_cycle_events = list(self._events)
        cycle = self.cycle
        if self.trace_enabled:
            for kind, signal, instance, value in self._events:
                parts = [f'"cycle":{cycle}', f'"kind":"{kind}"']
                if signal:
                    parts.append(f'"signal":"{signal}"')
                if instance:
                    parts.append(f'"instance":"{instance}"')
                if value is not None:
                    parts.append(f'"value":{value}')
                line = "{" + ",".join(parts) + "}"
                self.trace.append(line)
                if self.trace_file is not None:
                    self.trace_file.write(line + "\n")
        self.last_activity = cycle
        self._events.clear()

    # --- derived views ---

    def status_counts(self) -> dict[str, int]:
        counts = {RUNNING: 0, SLEEP_PUT: 0, SLEEP_GET: 0, HALTED: 0}
        for ae in self._program_aes:
            counts[ae.status] += 1
        return counts

    def instance_status(self) -> dict[str, str]:
        return {path: self.aes[path].status for path in sorted(self.aes)}


def _load_bound_inputs(artifact: CompiledArtifact) -> dict[str, list[int]]:
    if not artifact.bindings:
        return {}
    from .instruments import load_value_file  # deferred: instruments builds on fabric

    by_signal = {s.id: s for s in artifact.flat.signals}
    out: dict[str, list[int]] = {}
    for binding in artifact.bindings:
        if binding.direction != "input":
            continue
        sig = by_signal[binding.signal]
        out[sig.source.path] = load_value_file(binding.path, sig.value_type)
    return out


# --- instruction execution --------------------------------------------------


def _exec_one(state: SystemState, ae: AE, depth: int):
    code = ae.code
    pc = ae.pc
    if pc >= len(code):
        ae.status = HALTED
        state.emit("halt", instance=ae.path)
        return
    ins = code[pc]
    op = ins[0]
    regs = ae.regs
    if op == _OP_PUT:
        reg, port = ins[1], ins[2]
        buf = ae.out_bufs[port]
        if len(buf) < depth:
            sid = state.port_signal.get((ae.path, port), "")
            value = regs[reg] & state.signal_mask.get(sid, WORD_MASK)
            buf.append(value)
            ae.pc = pc + 1
            ae.executed += 1
            state.emit("put", signal=sid, instance=ae.path, value=value)
        else:
            ae.status = SLEEP_PUT
            ae.sleep_port = port
            ae.sleeps += 1
            ae.sleep_cycles += 1  # the blocked-issue cycle counts as asleep
            state.emit("sleep", signal=state.port_signal.get((ae.path, port), ""),
                       instance=ae.path)
        return
    if op == _OP_GET:
        reg, port = ins[1], ins[2]
        buf = ae.in_bufs[port]
        if buf:
            value = buf.pop(0)
            regs[reg] = value
            ae.pc = pc + 1
            ae.executed += 1
            state.emit("get", signal=state.port_signal.get((ae.path, port), ""),
                       instance=ae.path, value=value)
        else:
            ae.status = SLEEP_GET
            ae.sleep_port = port
            ae.sleeps += 1
            ae.sleep_cycles += 1
            state.emit("sleep", signal=state.port_signal.get((ae.path, port), ""),
                       instance=ae.path)
        return
    ae.executed += 1
    if op == _OP_CONST:
        regs[ins[1]] = ins[2]
    elif op == _OP_MOV:
        regs[ins[1]] = regs[ins[2]]
    elif op == _OP_ADD:
        regs[ins[1]] = (regs[ins[2]] + regs[ins[3]]) & WORD_MASK
    elif op == _OP_SUB:
        regs[ins[1]] = (regs[ins[2]] - regs[ins[3]]) & WORD_MASK
    elif op == _OP_MUL:
        regs[ins[1]] = (regs[ins[2]] * regs[ins[3]]) & WORD_MASK
    elif op == _OP_AND:
        regs[ins[1]] = regs[ins[2]] & regs[ins[3]]
    elif op == _OP_OR:
        regs[ins[1]] = regs[ins[2]] | regs[ins[3]]
    elif op == _OP_XOR:
        regs[ins[1]] = regs[ins[2]] ^ regs[ins[3]]
    elif op == _OP_SHL:
        regs[ins[1]] = (regs[ins[2]] << (regs[ins[3]] & 31)) & WORD_MASK
    elif op == _OP_SHR:
        regs[ins[1]] = regs[ins[2]] >> (regs[ins[3]] & 31)
    elif op == _OP_CMPEQ:
        regs[ins[1]] = 1 if regs[ins[2]] == regs[ins[3]] else 0
    elif op == _OP_CMPLT:
        regs[ins[1]] = 1 if regs[ins[2]] < regs[ins[3]] else 0
    elif op == _OP_BR:
        ae.pc = ins[1]
        return
    elif op == _OP_BRZ:
        ae.pc = ins[2] if regs[ins[1]] == 0 else pc + 1
        return
    elif op == _OP_HALT:
        ae.status = HALTED
        state.emit("halt", instance=ae.path)
        return
    # NOP and all register ops fall through to sequential advance
    ae.pc = pc + 1


# --- the cycle --------------------------------------------------------------


def step(state: SystemState):
    """Advance exactly one cycle: service file elements, compute, then buses."""
    depth = state._buffer_depth

    # between-cycle file service: refill sources, drain sinks and probes
    for ae in state._source_aes:
        port = next(iter(ae.out_bufs))
        buf = ae.out_bufs[port]
        if len(buf) < depth:
            if not ae.file_window and ae.file_cursor < len(ae.file_values):
                ae.file_window = ae.file_values[ae.file_cursor:ae.file_cursor + 64]
                ae.file_cursor += len(ae.file_window)
            if ae.file_window:
                buf.append(ae.file_window.pop(0))
                state.last_activity = state.cycle
            elif not buf and ae.status == RUNNING:
                # out of data for good; park the element so the stall is visible
                ae.status = SLEEP_GET
                ae.sleep_port = port

    # phase A: compute
    for ae in state._program_aes:
        st = ae.status
        if st == RUNNING:
            _exec_one(state, ae, depth)
        elif st == SLEEP_PUT or st == SLEEP_GET:
            ae.sleep_cycles += 1

    # phase B: bus transfers at this frame slot
    slot = state.cycle % state.frame
    woken: list[AE] = []
    for wire in state.slot_wires[slot]:
        src_buf = wire.src_ae.out_bufs[wire.src_port]
        if not src_buf:
            continue
        if wire.mode == "sync":
            ready = all(len(ae.in_bufs[port]) < depth for ae, port in wire.dests)
            if not ready:
                continue  # retried automatically at the next opportunity
        value = src_buf.pop(0)
        state.transfer_counts[wire.sid] += 1
        state.emit("transfer", signal=wire.sid, value=value)
        for ae, port in wire.dests:
            buf = ae.in_bufs[port]
            if len(buf) < depth:
                buf.append(value)
            else:
                # async overwrite: newest entry is replaced, oldest still drains
                lost = buf[-1]
                buf[-1] = value
                state.emit("overwrite_loss", signal=wire.sid, instance=ae.path,
                           value=lost)
        for ae, port in wire.taps:
            probe = state._probe_by_path.get(ae.path)
            key = (ae.path, port)
            values = state.probe_values.setdefault(key, [])
            values.append((state.cycle, value))
            if probe is not None and probe.kind == "assert_predicate":
                if not _predicate_holds(probe.params, value):
                    state.assert_failures[ae.path] = state.assert_failures.get(ae.path, 0) + 1
                    state.emit("assert_fail", signal=wire.sid, instance=ae.path,
                               value=value)
        # source may have been sleeping on this port's space
        if wire.src_ae.status == SLEEP_PUT and wire.src_ae.sleep_port == wire.src_port:
            woken.append(wire.src_ae)
        for ae, port in wire.dests:
            if ae.status == SLEEP_GET and ae.sleep_port == port and ae.in_bufs[port]:
                woken.append(ae)

    for ae in woken:
        if ae.status in (SLEEP_PUT, SLEEP_GET) and ae.kind == "program":
            ae.status = RUNNING
            ae.sleep_port = None
            state.emit("wake", instance=ae.path)

    # drain sinks so a depth-1 buffer never blocks the producer side
    for ae in state._sink_aes:
        for port, buf in ae.in_bufs.items():
            while buf:
                ae.collected.append(buf.pop(0))
                state.last_activity = state.cycle

    # bandwidth assertions fire at the close of each whole window
    if state._bw_probes:
        end = state.cycle + 1
        for path, key, sid, period, floor, window in state._bw_probes:
            if end % window:
                continue
            start = end - window
            count = 0
            for t, _ in reversed(state.probe_values.get(key, [])):
                if t < start:
                    break
                count += 1
            if count / (window // period) < floor:
                state.assert_failures[path] = state.assert_failures.get(path, 0) + 1
                state.emit("assert_fail", signal=sid, instance=path, value=count)

    state._flush_events()
    state.cycle += 1


def _predicate_holds(params: dict, value: int) -> bool:
    op = params.get("op", "eq")
    ref = params.get("value", 0)
    width = params.get("width", 32)
    if params.get("signed"):
        if value & (1 << (width - 1)):
            value -= 1 << width
    if op == "eq":
        return value == ref
    if op == "ne":
        return value != ref
    if op == "lt":
        return value < ref
    if op == "le":
        return value <= ref
    if op == "gt":
        return value > ref
    if op == "ge":
        return value >= ref
    raise ValueError(f"unknown predicate op {op!r}")


# --- quiescence and deadlock ------------------------------------------------


def _all_settled(state: SystemState) -> bool:
    if any(ae.status != HALTED for ae in state._program_aes):
        return False
    return state.cycle - state.last_activity >= state.frame


def _deadlock_suspected(state: SystemState) -> bool:
    counts = state.status_counts()
    if counts[RUNNING] != 0:
        return False
    if counts[SLEEP_PUT] + counts[SLEEP_GET] == 0:
        return False
    if state.cycle - state.last_activity < state.frame:
        return False
    # pending file input can still wake the system, so it is never a deadlock
    for ae in state._source_aes:
        if (ae.file_window or ae.file_cursor < len(ae.file_values)
                or any(ae.out_bufs.values())):
            return False
    return True


def build_deadlock_report(state: SystemState) -> DeadlockReport:
    """Wait-for graph over sleeping elements; its strongly connected pieces of
    size two or more are true cycles, the rest of the sleepers are starved."""
    from .graphs import strongly_connected_components

    by_signal = {w.sid: w for w in state.wires}
    edges: set[tuple[str, str]] = set()
    # an exhausted file source also shows as sleeping but it is the cause of a
    # stall, never a participant, so only program elements contribute edges
    sleepers = [ae for ae in state._program_aes
                if ae.status in (SLEEP_PUT, SLEEP_GET)]
    for ae in sleepers:
        sid = state.port_signal.get((ae.path, ae.sleep_port or ""), "")
        if not sid:
            continue
        wire = by_signal[sid]
        if ae.status == SLEEP_GET:
            edges.add((ae.path, wire.src_ae.path))
        else:
            for dest, _ in wire.dests:
                edges.add((ae.path, dest.path))
    nodes = sorted({n for e in edges for n in e})
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in sorted(edges):
        adjacency[a].append(b)
    comps = strongly_connected_components(nodes, adjacency)
    cycles = [list(c) for c in comps
              if len(c) > 1 or (c[0], c[0]) in edges]
    in_cycle = {n for c in cycles for n in c}
    starved = sorted(ae.path for ae in sleepers if ae.path not in in_cycle)
    return DeadlockReport(cycle=state.cycle, edges=sorted(edges),
                          cycles=cycles, starved=starved)


# --- breakpoints and run loop -----------------------------------------------


@dataclass(frozen=True)
class Breakpoint:
    kind: str  # "pc" | "cycle" | "signal" | "halt"
    arg: str   # pc: "instance:pc", cycle: "n", signal: id, halt: instance

    def label(self) -> str:
        return f"{self.kind} {self.arg}"


@dataclass
class StopInfo:
    reason: str
    cycle: int
    breakpoint: Breakpoint | None = None
    deadlock: DeadlockReport | None = None


def run(
    state: SystemState,
    max_cycles: int | None = None,
    breakpoints: list[Breakpoint] | None = None,
    cycle_hook=None,
) -> StopInfo:
    """Run until a stop condition; a cycle breakpoint equal to the current
    cycle is skipped once so resuming from a stop makes progress."""
    breakpoints = breakpoints or []
    cycle_bps = {int(b.arg) for b in breakpoints if b.kind == "cycle"}
    signal_bps = {b.arg: b for b in breakpoints if b.kind == "signal"}
    halt_bps = {b.arg: b for b in breakpoints if b.kind == "halt"}
    pc_bps: dict[tuple[str, int], Breakpoint] = {}
    for b in breakpoints:
        if b.kind == "pc":
            path, _, pcs = b.arg.rpartition(":")
            pc_bps[(path, int(pcs))] = b
    executed = 0
    first = True

    while True:
        if not first:
            if state.cycle in cycle_bps:
                bp = next(b for b in breakpoints
                          if b.kind == "cycle" and int(b.arg) == state.cycle)
                return StopInfo(STOP_BREAKPOINT, state.cycle, breakpoint=bp)
            # pc breakpoints stop when the element is about to issue that line
            for (path, pc), bp in pc_bps.items():
                ae = state.aes.get(path)
                if ae is not None and ae.status == RUNNING and ae.pc == pc:
                    return StopInfo(STOP_BREAKPOINT, state.cycle, breakpoint=bp)
        if max_cycles is not None and executed >= max_cycles:
            return StopInfo(STOP_CYCLE_LIMIT, state.cycle)
        first = False

        halted_before = {ae.path for ae in state._program_aes if ae.status == HALTED}
        step(state)
        executed += 1

        if signal_bps or halt_bps:
            hit = _scan_cycle_events(state, signal_bps, halt_bps, halted_before)
            if hit is not None:
                return StopInfo(STOP_BREAKPOINT, state.cycle, breakpoint=hit)

        if _all_settled(state):
            return StopInfo(STOP_ALL_HALTED, state.cycle)
        if _deadlock_suspected(state):
            report = build_deadlock_report(state)
            state.deadlock = report
            return StopInfo(STOP_DEADLOCK, state.cycle, deadlock=report)

        if cycle_hook is not None and cycle_hook(state):
            return StopInfo(STOP_PAUSED, state.cycle)


def _scan_cycle_events(state, signal_bps, halt_bps, halted_before):
    if signal_bps:
        for kind, signal, _, _ in state.last_cycle_events:
            if kind == "transfer" and signal in signal_bps:
                return signal_bps[signal]
    if halt_bps:
        for ae in state._program_aes:
            if ae.status == HALTED and ae.path not in halted_before and ae.path in halt_bps:
                return halt_bps[ae.path]
    return None


# --- snapshots --------------------------------------------------------------


def snapshot(state: SystemState) -> dict:
    """Copy every piece of mutable run state; restoring and rerunning gives a
    byte-identical continuation."""
    return {
        "cycle": state.cycle,
        "last_activity": state.last_activity,
        "trace": list(state.trace),
        "trace_enabled": state.trace_enabled,
        "transfer_counts": dict(state.transfer_counts),
        "probe_values": {k: list(v) for k, v in state.probe_values.items()},
        "probe_drops": dict(state.probe_drops),
        "assert_failures": dict(state.assert_failures),
        "aes": {
            path: {
                "pc": ae.pc,
                "regs": list(ae.regs),
                "status": ae.status,
                "sleep_port": ae.sleep_port,
                "out_bufs": {p: list(b) for p, b in ae.out_bufs.items()},
                "in_bufs": {p: list(b) for p, b in ae.in_bufs.items()},
                "executed": ae.executed,
                "sleeps": ae.sleeps,
                "sleep_cycles": ae.sleep_cycles,
                "file_cursor": ae.file_cursor,
                "file_window": list(ae.file_window),
                "collected": list(ae.collected),
            }
            for path, ae in state.aes.items()
        },
    }


def restore(state: SystemState, snap: dict):
    state.cycle = snap["cycle"]
    state.last_activity = snap["last_activity"]
    state.trace = list(snap["trace"])
    state.trace_enabled = snap["trace_enabled"]
    state.transfer_counts = dict(snap["transfer_counts"])
    state.probe_values = {k: list(v) for k, v in snap["probe_values"].items()}
    state.probe_drops = dict(snap["probe_drops"])
    state.assert_failures = dict(snap["assert_failures"])
    state.deadlock = None
    for path, rec in snap["aes"].items():
        ae = state.aes[path]
        ae.pc = rec["pc"]
        ae.regs = list(rec["regs"])
        ae.status = rec["status"]
        ae.sleep_port = rec["sleep_port"]
        ae.out_bufs = {p: list(b) for p, b in rec["out_bufs"].items()}
        ae.in_bufs = {p: list(b) for p, b in rec["in_bufs"].items()}
        ae.executed = rec["executed"]
        ae.sleeps = rec["sleeps"]
        ae.sleep_cycles = rec["sleep_cycles"]
        ae.file_cursor = rec["file_cursor"]
        ae.file_window = list(rec["file_window"])
        ae.collected = list(rec["collected"])


def state_dump(state: SystemState) -> dict:
    """Portable JSON view of the run state: registers, pc, status, buffers,
    sleep accounting, and the cycle count.  Unlike snapshot() this is a stable
    external format, not a restore image."""
    instances = {}
    for path in sorted(state.aes):
        ae = state.aes[path]
        instances[path] = {
            "pc": ae.pc,
            "status": ae.status,
            "regs": list(ae.regs),
            "sleep_cycles": ae.sleep_cycles,
            "in": {p: list(b) for p, b in sorted(ae.in_bufs.items())},
            "out": {p: list(b) for p, b in sorted(ae.out_bufs.items())},
        }
    return {"cycle": state.cycle, "instances": instances}


def state_dump_json(state: SystemState) -> str:
    return json.dumps(state_dump(state), sort_keys=True, indent=1)


def flush_sinks(state: SystemState):
    """Write every output binding in full; called once when a run ends."""
    if not state.artifact.bindings:
        return
    from .instruments import write_value_file

    by_signal = {s.id: s for s in state.artifact.flat.signals}
    for binding in state.artifact.bindings:
        if binding.direction != "output":
            continue
        sig = by_signal[binding.signal]
        sink = next(
            state.aes[d.path] for d in sig.dests
            if state.aes[d.path].kind == "file_sink"
        )
        write_value_file(binding.path, sink.collected, sig.value_type)
