"""Interactive and scripted control of a simulation.

A Session owns one loaded artifact plus its run state and executes commands
that arrive either as text lines or as JSON documents; both forms share one
dispatch table, so the wire protocol and the REPL cannot drift apart.

Every state-changing command lands in the journal, with run and step recorded
as the number of cycles that actually elapsed. Replaying the journal against
the same artifact therefore reproduces the run exactly, even when the
original stops came from breakpoints or a human at a keyboard.
"""

from __future__ import annotations

import cmd
import shlex

from . import analysis, engine
from .engine import Breakpoint, SystemState
from .errors import ProcgridError, ScriptError, SessionError, UnknownInstance
from .fabric import GridConfig, compile_source, load_artifact
from .instruments import (
    ProbeSpec,
    bind_file,
    grid_for,
    insert_probe,
    probe_report,
)
from .netlist import parse_design

class CommandResult:
    def __init__(self, ok: bool, data=None, error: str | None = None):
        self.ok = ok
        self.data = data
        self.error = error

    def to_doc(self) -> dict:
        if self.ok:
            return {"ok": True, "data": self.data}
        return {"ok": False, "error": self.error}


class Session:
    """One design, one run, one journal."""

    def __init__(self):
        self.artifact = None
        self.artifact_path: str | None = None
        self.state: SystemState | None = None
        self.breakpoints: list[Breakpoint] = []
        self.snapshots: dict[str, dict] = {}
        self.journal: list[str] = []
        self.last_stop: engine.StopInfo | None = None
        self.cycle_hook = None  # injected by the protocol server

    # --- plumbing ---

    def _need_state(self) -> SystemState:
        if self.state is None:
            raise SessionError("no design loaded")
        return self.state

    def _reset_state(self):
        self.state = SystemState(self.artifact)
        self.last_stop = None

    def execute_text(self, line: str) -> CommandResult:
        try:
            verb, args = parse_command(line)
        except ProcgridError as exc:
            return CommandResult(False, error=str(exc))
        return self.execute(verb, args)

    def execute_json(self, doc: dict) -> CommandResult:
        verb = doc.get("verb")
        args = doc.get("args") or {}
        if not isinstance(verb, str):
            return CommandResult(False, error="request needs a string 'verb'")
        if not isinstance(args, dict):
            return CommandResult(False, error="'args' must be an object")
        return self.execute(verb, args)

    def execute(self, verb: str, args: dict) -> CommandResult:
        handler = getattr(self, f"_cmd_{verb}", None)
        if handler is None:
            return CommandResult(False, error=f"unknown command {verb!r}")
        try:
            data = handler(args)
        except ProcgridError as exc:
            return CommandResult(False, error=str(exc))
        except FileNotFoundError as exc:
            return CommandResult(False, error=str(exc))
        return CommandResult(True, data=data)

    # --- commands ---

    def _cmd_load(self, args) -> dict:
        path = args["path"]
        if path.endswith(".pgc"):
            self.artifact = load_artifact(path)
        else:
            with open(path, "r", encoding="utf-8") as fh:
                design = parse_design(fh.read())
            from .fabric import build_artifact
            from .netlist import elaborate, typecheck

            flat = elaborate(typecheck(design))
            self.artifact = build_artifact(design, grid_for(flat))
        self.artifact_path = path
        self.breakpoints = []
        self.snapshots = {}
        self._reset_state()
        self.journal.append(f"load {path}")
        return {
            "design": self.artifact.flat.name,
            "instances": len(self.artifact.flat.instances),
            "signals": len(self.artifact.flat.signals),
            "grid": [self.artifact.grid.rows, self.artifact.grid.cols],
            "frame": self.artifact.schedule.frame_length,
        }

    def _advance(self, max_cycles: int | None, honor_breakpoints: bool) -> dict:
        state = self._need_state()
        before = state.cycle
        bps = self.breakpoints if honor_breakpoints else []
        try:
            info = engine.run(state, max_cycles=max_cycles, breakpoints=bps,
                              cycle_hook=self.cycle_hook)
        finally:
            executed = state.cycle - before
            if executed:
                self.journal.append(f"step {executed}")
        self.last_stop = info
        data = {
            "reason": info.reason,
            "cycle": info.cycle,
            "executed": executed,
        }
        if info.breakpoint is not None:
            data["breakpoint"] = info.breakpoint.label()
        if info.deadlock is not None:
            data["deadlock"] = {
                "cycles": info.deadlock.cycles,
                "starved": info.deadlock.starved,
                "edges": [list(e) for e in info.deadlock.edges],
            }
        return data

    def _cmd_run(self, args) -> dict:
        return self._advance(args.get("cycles"), honor_breakpoints=True)

    def _cmd_step(self, args) -> dict:
        return self._advance(int(args.get("cycles", 1)), honor_breakpoints=False)

    def _cmd_break(self, args) -> dict:
        self._need_state()
        action = args["action"]
        if action == "add":
            bp = Breakpoint(kind=args["kind"], arg=str(args["arg"]))
            if bp.kind == "cycle":
                int(bp.arg)  # validate now, not at run time
            elif bp.kind == "pc":
                path, sep, pcs = bp.arg.rpartition(":")
                if not sep or not path:
                    raise SessionError("pc breakpoint needs <instance>:<pc>")
                int(pcs)
            elif bp.kind not in ("signal", "halt"):
                raise SessionError(f"unknown breakpoint kind {bp.kind!r}")
            self.breakpoints.append(bp)
            return {"added": bp.label(), "count": len(self.breakpoints)}
        if action == "remove":
            which = args["which"]
            if which == "all":
                removed = len(self.breakpoints)
                self.breakpoints = []
                return {"removed": removed}
            idx = int(which)
            if not 0 <= idx < len(self.breakpoints):
                raise SessionError(f"no breakpoint {idx}")
            bp = self.breakpoints.pop(idx)
            return {"removed": bp.label()}
        if action == "list":
            return {"breakpoints": [b.label() for b in self.breakpoints]}
        raise SessionError(f"unknown break action {action!r}")

    def _cmd_status(self, args) -> dict:
        state = self._need_state()
        data = analysis.live_status(state)
        data["design"] = self.artifact.flat.name
        if self.last_stop is not None:
            data["last_stop"] = self.last_stop.reason
        if state.deadlock is not None:
            data["deadlock"] = {
                "cycles": state.deadlock.cycles,
                "starved": state.deadlock.starved,
            }
        return data

    def _cmd_inspect(self, args) -> dict:
        state = self._need_state()
        path = args["path"]
        ae = state.aes.get(path)
        if ae is None:
            raise UnknownInstance(f"no instance at path {path!r}")
        return {
            "path": path,
            "kind": ae.kind,
            "class": ae.ae_class,
            "status": ae.status,
            "pc": ae.pc,
            "regs": list(ae.regs),
            "out_bufs": {p: list(b) for p, b in ae.out_bufs.items()},
            "in_bufs": {p: list(b) for p, b in ae.in_bufs.items()},
            "executed": ae.executed,
            "sleeps": ae.sleeps,
            "sleep_cycles": ae.sleep_cycles,
            "coord": list(self.artifact.placement.cells[path]),
        }

    def _cmd_signal(self, args) -> dict:
        state = self._need_state()
        sid = args["id"]
        sig = next((s for s in self.artifact.flat.signals if s.id == sid), None)
        if sig is None:
            from .errors import UnknownSignal

            raise UnknownSignal(f"no signal {sid!r}")
        util = analysis.utilization_summary(state)["signals"][sid]
        return {
            "id": sid,
            "type": sig.value_type.render(),
            "mode": sig.mode,
            "period": sig.period,
            "offset": self.artifact.schedule.offsets[sid],
            "source": f"{sig.source.path}.{sig.source.port}",
            "dests": [f"{d.path}.{d.port}" for d in sig.dests],
            "taps": [f"{t.path}.{t.port}" for t in sig.taps],
            "transfers": state.transfer_counts[sid],
            "utilization": util,
        }

    def _cmd_hier(self, args) -> dict:
        self._need_state()
        scope = args.get("scope", "top")
        design = analysis.artifact_design(self.artifact)
        return analysis.hierarchy_view(design, self.artifact.flat, scope)

    def _cmd_flat(self, args) -> dict:
        self._need_state()
        from dataclasses import asdict

        scope = args.get("scope", "top")
        return asdict(analysis.flat_view(self.artifact.flat, scope))

    def _cmd_scc(self, args) -> dict:
        self._need_state()
        return analysis.scc_view(self.artifact.flat, args.get("scope", "top"))

    def _cmd_util(self, args) -> dict:
        summary = analysis.utilization_summary(self._need_state())
        sid = args.get("signal")
        if sid is None:
            return summary
        if sid not in summary["signals"]:
            from .errors import UnknownSignal

            raise UnknownSignal(f"no signal {sid!r}")
        return {"cycle": summary["cycle"], "id": sid, **summary["signals"][sid]}

    def _cmd_placement(self, args) -> dict:
        self._need_state()
        return {
            "grid": [self.artifact.grid.rows, self.artifact.grid.cols],
            "cells": {p: list(rc) for p, rc in sorted(self.artifact.placement.cells.items())},
            "reserve": [list(rc) for rc in self.artifact.placement.reserve],
        }

    def _cmd_probe(self, args) -> dict:
        if args.get("action") == "report":
            return {"probes": probe_report(self._need_state())}
        self._need_state()
        spec = ProbeSpec(
            kind=args["kind"],
            signals=tuple(args["signals"]),
            params=args.get("params") or {},
        )
        self.artifact = insert_probe(self.artifact, spec)
        self.snapshots = {}  # saved images no longer match the artifact shape
        self._reset_state()
        record = self.artifact.probes[-1]
        extra = "".join(
            f" {k}={v}" for k, v in sorted((spec.params or {}).items())
        )
        self.journal.append(
            "probe add " + spec.kind + " " + " ".join(spec.signals) + extra
        )
        return {
            "path": record.path,
            "coord": list(record.coord),
            "reset": True,
        }

    def _cmd_bind(self, args) -> dict:
        self._need_state()
        self.artifact = bind_file(
            self.artifact, args["signal"], args["direction"], args["path"]
        )
        self.snapshots = {}
        self._reset_state()
        self.journal.append(f"bind {args['direction']} {args['signal']} {args['path']}")
        return {"signal": args["signal"], "direction": args["direction"], "reset": True}

    def _cmd_trace(self, args) -> dict:
        state = self._need_state()
        action = args["action"]
        if action == "on":
            state.trace_enabled = True
            self.journal.append("trace on")
            return {"trace": "on"}
        if action == "off":
            state.trace_enabled = False
            self.journal.append("trace off")
            return {"trace": "off"}
        if action == "save":
            with open(args["path"], "w", encoding="utf-8") as fh:
                for line in state.trace:
                    fh.write(line + "\n")
            return {"saved": args["path"], "events": len(state.trace)}
        if action == "tail":
            n = int(args.get("count", 10))
            return {"events": state.trace[-n:] if n else []}
        raise SessionError(f"unknown trace action {action!r}")

    def _cmd_snapshot(self, args) -> dict:
        state = self._need_state()
        action = args["action"]
        if action == "save":
            name = args["name"]
            self.snapshots[name] = engine.snapshot(state)
            self.journal.append(f"snapshot save {name}")
            return {"saved": name, "cycle": state.cycle}
        if action == "restore":
            name = args["name"]
            if name not in self.snapshots:
                raise SessionError(f"no snapshot {name!r}")
            engine.restore(state, self.snapshots[name])
            self.last_stop = None
            self.journal.append(f"snapshot restore {name}")
            return {"restored": name, "cycle": state.cycle}
        if action == "list":
            return {
                "snapshots": {
                    name: snap["cycle"] for name, snap in sorted(self.snapshots.items())
                }
            }
        raise SessionError(f"unknown snapshot action {action!r}")

    def _cmd_dump(self, args) -> dict:
        state = self._need_state()
        doc = engine.state_dump(state)
        path = args.get("path")
        if path:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(engine.state_dump_json(state) + "\n")
            return {"saved": path, "cycle": state.cycle}
        return doc

    def _cmd_journal(self, args) -> dict:
        action = args.get("action", "show")
        if action == "show":
            return {"journal": list(self.journal)}
        if action == "save":
            with open(args["path"], "w", encoding="utf-8") as fh:
                for line in self.journal:
                    fh.write(line + "\n")
            return {"saved": args["path"], "commands": len(self.journal)}
        raise SessionError(f"unknown journal action {action!r}")

    def _cmd_flush(self, args) -> dict:
        state = self._need_state()
        engine.flush_sinks(state)
        return {"flushed": [
            b.path for b in self.artifact.bindings if b.direction == "output"
        ]}

    def _cmd_quit(self, args) -> dict:
        return {"closing": True}

    def _cmd_help(self, args) -> dict:
        return {"commands": sorted(
            name[5:] for name in dir(self) if name.startswith("_cmd_")
        )}


# --- text command grammar ---------------------------------------------------


def parse_command(line: str) -> tuple[str, dict]:
    """One text line to (verb, args); inverse of the journal's rendering."""
    words = shlex.split(line, comments=True)
    if not words:
        raise SessionError("empty command")
    verb, rest = words[0], words[1:]

    if verb in ("quit", "exit"):
        return "quit", {}
    if verb == "load":
        if len(rest) != 1:
            raise SessionError("usage: load <design.pg|artifact.pgc>")
        return "load", {"path": rest[0]}
    if verb == "run":
        if len(rest) > 1:
            raise SessionError("usage: run [cycles]")
        return "run", {"cycles": int(rest[0])} if rest else {"cycles": None}
    if verb == "step":
        if len(rest) > 1:
            raise SessionError("usage: step [cycles]")
        return "step", {"cycles": int(rest[0]) if rest else 1}
    if verb == "break":
        if not rest:
            raise SessionError("usage: break add|remove|list ...")
        action = rest[0]
        if action == "add":
            if len(rest) == 2:
                return "break", {"action": "add", "kind": "cycle", "arg": rest[1]}
            if len(rest) == 3 and rest[1] in ("cycle", "signal", "halt", "pc"):
                return "break", {"action": "add", "kind": rest[1], "arg": rest[2]}
            if len(rest) == 3:
                # break add <instance> <pc>
                return "break", {"action": "add", "kind": "pc",
                                 "arg": f"{rest[1]}:{int(rest[2])}"}
            raise SessionError(
                "usage: break add <cycle> | break add cycle|signal|halt|pc <arg>"
                " | break add <instance> <pc>"
            )
        if action == "remove":
            if len(rest) != 2:
                raise SessionError("usage: break remove <index|all>")
            return "break", {"action": "remove", "which": rest[1]}
        if action == "list":
            return "break", {"action": "list"}
        raise SessionError(f"unknown break action {action!r}")
    if verb == "status":
        return "status", {}
    if verb == "inspect":
        if len(rest) != 1:
            raise SessionError("usage: inspect <instance-path>")
        return "inspect", {"path": rest[0]}
    if verb == "signal":
        if len(rest) != 1:
            raise SessionError("usage: signal <signal-id>")
        return "signal", {"id": rest[0]}
    if verb in ("hier", "flat", "scc"):
        if len(rest) > 1:
            raise SessionError(f"usage: {verb} [scope]")
        return verb, {"scope": rest[0]} if rest else {}
    if verb == "util":
        if len(rest) > 1:
            raise SessionError("usage: util [signal]")
        return "util", {"signal": rest[0]} if rest else {}
    if verb == "dump":
        if len(rest) > 1:
            raise SessionError("usage: dump [file]")
        return "dump", {"path": rest[0]} if rest else {}
    if verb == "placement":
        return "placement", {}
    if verb == "probe":
        if rest and rest[0] == "report":
            return "probe", {"action": "report"}
        if not rest or rest[0] != "add" or len(rest) < 3:
            raise SessionError("usage: probe add <kind> <signal>... [key=value]... | probe report")
        kind = rest[1]
        signals = []
        params: dict = {}
        for word in rest[2:]:
            if "=" in word:
                key, _, value = word.partition("=")
                try:
                    params[key] = int(value, 0)
                except ValueError:
                    params[key] = value
            else:
                signals.append(word)
        return "probe", {"action": "add", "kind": kind, "signals": signals,
                         "params": params}
    if verb == "bind":
        if len(rest) != 3 or rest[0] not in ("input", "output"):
            raise SessionError("usage: bind input|output <signal> <file>")
        return "bind", {"direction": rest[0], "signal": rest[1], "path": rest[2]}
    if verb == "trace":
        if not rest:
            raise SessionError("usage: trace on|off|save <file>|tail [n]")
        if rest[0] in ("on", "off") and len(rest) == 1:
            return "trace", {"action": rest[0]}
        if rest[0] == "save" and len(rest) == 2:
            return "trace", {"action": "save", "path": rest[1]}
        if rest[0] == "tail" and len(rest) <= 2:
            args = {"action": "tail"}
            if len(rest) == 2:
                args["count"] = int(rest[1])
            return "trace", args
        raise SessionError("usage: trace on|off|save <file>|tail [n]")
    if verb == "snapshot":
        if not rest:
            raise SessionError("usage: snapshot save|restore|list [name]")
        if rest[0] in ("save", "restore") and len(rest) == 2:
            return "snapshot", {"action": rest[0], "name": rest[1]}
        if rest[0] == "list" and len(rest) == 1:
            return "snapshot", {"action": "list"}
        raise SessionError("usage: snapshot save|restore|list [name]")
    if verb == "journal":
        if not rest or rest[0] == "show":
            return "journal", {"action": "show"}
        if rest[0] == "save" and len(rest) == 2:
            return "journal", {"action": "save", "path": rest[1]}
        raise SessionError("usage: journal show|save <file>")
    if verb == "flush":
        return "flush", {}
    if verb == "help":
        return "help", {}
    raise SessionError(f"unknown command {verb!r}")


# --- scripts ----------------------------------------------------------------


def _parse_script(lines: list[str], start_line: int = 1):
    """Flatten a script with repeat blocks into (lineno, tolerant, text)."""
    out: list[tuple[int, bool, str]] = []
    i = 0
    while i < len(lines):
        lineno = start_line + i
        text = lines[i].split("#", 1)[0].strip()
        i += 1
        if not text:
            continue
        tolerant = False
        if text.startswith("try "):
            tolerant = True
            text = text[4:].strip()
        if text.startswith("repeat "):
            head = text[len("repeat "):].strip()
            if not head.endswith("{"):
                raise ScriptError("repeat needs 'repeat N {'", lineno)
            try:
                count = int(head[:-1].strip())
            except ValueError:
                raise ScriptError("repeat needs an integer count", lineno) from None
            depth = 1
            block: list[str] = []
            block_start = start_line + i
            while i < len(lines):
                inner = lines[i].split("#", 1)[0].strip()
                if inner.endswith("{") and (inner.startswith("repeat ")
                                            or inner.startswith("try repeat ")):
                    depth += 1
                elif inner == "}":
                    depth -= 1
                    if depth == 0:
                        break
                block.append(lines[i])
                i += 1
            else:
                raise ScriptError("repeat block never closed", lineno)
            i += 1  # past the closing brace
            body = _parse_script(block, block_start)
            for _ in range(count):
                out.extend(body)
            continue
        out.append((lineno, tolerant, text))
    return out


def run_script(session: Session, text: str) -> list[tuple[str, CommandResult]]:
    """Execute a command script; a failed command aborts with ScriptError
    unless prefixed with 'try'."""
    results = []
    for lineno, tolerant, command in _parse_script(text.splitlines()):
        if command == "quit":
            break
        result = session.execute_text(command)
        results.append((command, result))
        if not result.ok and not tolerant:
            raise ScriptError(f"{command!r} failed: {result.error}", lineno)
    return results


# --- interactive REPL -------------------------------------------------------


def _render(data, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(data, dict):
        lines = []
        for key, value in data.items():
            if isinstance(value, (dict, list)) and value:
                lines.append(f"{pad}{key}:")
                lines.append(_render(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {value}")
        return "\n".join(lines)
    if isinstance(data, list):
        return "\n".join(
            _render(v, indent) if isinstance(v, (dict, list)) else f"{pad}- {v}"
            for v in data
        )
    return f"{pad}{data}"


class Repl(cmd.Cmd):
    intro = "design debug session; 'help' lists commands, 'quit' leaves"
    prompt = "(procgrid) "

    def __init__(self, session: Session | None = None):
        super().__init__()
        self.session = session or Session()

    def default(self, line: str):
        if line.strip() in ("quit", "exit", "EOF"):
            return True
        try:
            result = self.session.execute_text(line)
        except KeyboardInterrupt:
            print("interrupted")
            return False
        if result.ok:
            if result.data is not None:
                print(_render(result.data))
        else:
            print(f"error: {result.error}")
        return False

    def do_quit(self, arg):
        return True

    do_exit = do_quit
    do_EOF = do_quit

    def do_help(self, arg):
        result = self.session.execute("help", {})
        print("commands:", ", ".join(result.data["commands"]))

    def emptyline(self):
        return False
