"""Command line front door: build, run, analyze, shell, serve.

Exit codes: 0 on success, 1 for user errors (compile problems, bad files or
arguments, runs that end in deadlock or assertion failures, aborted scripts),
2 for internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import analysis, engine
from .errors import ProcgridError, ScriptError, TypeCheckFailure
from .fabric import (
    GridConfig,
    aggregate_bandwidth,
    build_artifact,
    load_artifact,
    save_artifact,
)
from .instruments import bind_file, grid_for
from .netlist import elaborate, parse_design, typecheck
from .server import ProtocolServer
from .shell import Repl, Session, run_script


def _load_target(path: str, rows: int | None = None, cols: int | None = None,
                 **grid_kwargs):
    """A .pgc loads as-is; a source file compiles onto the requested grid or
    the smallest square that fits."""
    if path.endswith(".pgc"):
        return load_artifact(path)
    with open(path, "r", encoding="utf-8") as fh:
        design = parse_design(fh.read())
    flat = elaborate(typecheck(design))
    if rows and cols:
        grid = GridConfig(rows=rows, cols=cols, **grid_kwargs)
    else:
        grid = grid_for(flat, **grid_kwargs)
    return build_artifact(design, grid)


def _print_compile_error(exc: ProcgridError):
    if isinstance(exc, TypeCheckFailure):
        for issue in exc.errors:
            where = f" (line {issue.line})" if issue.line else ""
            print(f"error: {issue.message}{where}", file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def cmd_build(args) -> int:
    rows, cols = args.rows, args.cols
    if args.grid:
        try:
            rows, cols = (int(part) for part in args.grid.split(","))
        except ValueError:
            print(f"error: -g wants rows,cols, got {args.grid!r}", file=sys.stderr)
            return 1
    try:
        artifact = _load_target(
            args.design, rows=rows, cols=cols,
            buses_per_track=args.buses, buffer_depth=args.depth,
        )
    except (ProcgridError, OSError, ValueError) as exc:
        _print_compile_error(exc) if isinstance(exc, ProcgridError) else print(
            f"error: {exc}", file=sys.stderr)
        return 1
    out = args.output or (args.design.rsplit(".", 1)[0] + ".pgc")
    save_artifact(artifact, out)
    grid = artifact.grid
    print(f"{artifact.flat.name}: {len(artifact.flat.instances)} instances, "
          f"{len(artifact.flat.signals)} signals on {grid.rows}x{grid.cols}, "
          f"frame {artifact.schedule.frame_length}")
    print(f"wrote {out}")
    return 0


def cmd_run(args) -> int:
    bindings = []
    for sig, path in args.bind_input or []:
        bindings.append(("input", sig, path))
    for sig, path in args.bind_output or []:
        bindings.append(("output", sig, path))
    for spec in args.bind or []:
        # dir=path:signal
        direction, _, rest = spec.partition("=")
        path, sep, sig = rest.rpartition(":")
        if direction not in ("input", "output") or not sep or not path or not sig:
            print(f"error: --bind wants dir=path:signal, got {spec!r}",
                  file=sys.stderr)
            return 1
        bindings.append((direction, sig, path))
    try:
        artifact = _load_target(args.target)
        for direction, sig, path in bindings:
            artifact = bind_file(artifact, sig, direction, path)
    except (ProcgridError, OSError) as exc:
        _print_compile_error(exc) if isinstance(exc, ProcgridError) else print(
            f"error: {exc}", file=sys.stderr)
        return 1

    state = engine.SystemState(artifact)
    info = engine.run(state, max_cycles=args.cycles)
    engine.flush_sinks(state)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for line in state.trace:
                fh.write(line + "\n")

    counts = state.status_counts()
    print(f"stopped: {info.reason} at cycle {info.cycle}")
    print(f"processing {counts[engine.RUNNING]}, "
          f"waiting_comm {counts[engine.SLEEP_PUT] + counts[engine.SLEEP_GET]}, "
          f"halted {counts[engine.HALTED]}; {len(state.trace)} events")
    failed = sum(state.assert_failures.values())
    if failed:
        print(f"{failed} assertion failure(s)")
    if info.deadlock is not None:
        print(info.deadlock.render())
    return 1 if (info.reason == engine.STOP_DEADLOCK or failed) else 0


def cmd_analyze(args) -> int:
    if args.scc:
        args.view = "scc"
    if args.flat is not None:
        args.view = "flat"
        args.scope = args.flat
    try:
        artifact = _load_target(args.target)
    except (ProcgridError, OSError) as exc:
        _print_compile_error(exc) if isinstance(exc, ProcgridError) else print(
            f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.view == "hier":
            design = analysis.artifact_design(artifact)
            print(json.dumps(
                analysis.hierarchy_view(design, artifact.flat, args.scope),
                indent=2))
        elif args.view == "flat":
            graph = analysis.flat_view(artifact.flat, args.scope)
            if args.format == "dot":
                print(analysis.graph_to_dot(graph))
            else:
                print(analysis.graph_to_json(graph))
        elif args.view == "scc":
            print(json.dumps(analysis.scc_view(artifact.flat, args.scope), indent=2))
        else:  # info
            grid = artifact.grid
            ae_count = grid.rows * grid.cols
            print(json.dumps({
                "design": artifact.flat.name,
                "instances": len(artifact.flat.instances),
                "signals": len(artifact.flat.signals),
                "grid": {"rows": grid.rows, "cols": grid.cols},
                "frame_length": artifact.schedule.frame_length,
                "probe_reserve": len(artifact.placement.reserve),
                "aggregate_bandwidth_bits_per_s": aggregate_bandwidth(grid, ae_count),
            }, indent=2))
    except ProcgridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_shell(args) -> int:
    session = Session()
    if args.target:
        result = session.execute("load", {"path": args.target})
        if not result.ok:
            print(f"error: {result.error}", file=sys.stderr)
            return 1
        print(f"loaded {args.target}")
    if args.script:
        try:
            with open(args.script, "r", encoding="utf-8") as fh:
                run_script(session, fh.read())
        except (ScriptError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0
    try:
        Repl(session).cmdloop()
    except KeyboardInterrupt:
        print()
    return 0


def cmd_serve(args) -> int:
    host, port = args.host, args.port
    if args.socket:
        text_host, sep, text_port = args.socket.rpartition(":")
        if not sep:
            text_host, text_port = host, args.socket
        try:
            host, port = text_host, int(text_port)
        except ValueError:
            print(f"error: --socket wants host:port, got {args.socket!r}",
                  file=sys.stderr)
            return 1
    session = Session()
    if args.target:
        result = session.execute("load", {"path": args.target})
        if not result.ok:
            print(f"error: {result.error}", file=sys.stderr)
            return 1
    server = ProtocolServer(session, host=host, port=port)
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="procgrid",
        description="grid-of-processes simulator and toolchain",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="compile a design to an artifact")
    p.add_argument("design")
    p.add_argument("-o", "--output")
    p.add_argument("-g", "--grid", metavar="ROWS,COLS")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--buses", type=int, default=2)
    p.add_argument("--depth", type=int, default=1)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="run a design or artifact to a stop")
    p.add_argument("target")
    p.add_argument("--cycles", type=int)
    p.add_argument("--trace", help="write the event trace to a file")
    p.add_argument("--bind", action="append", metavar="DIR=PATH:SIGNAL")
    p.add_argument("--bind-input", nargs=2, action="append",
                   metavar=("SIGNAL", "FILE"))
    p.add_argument("--bind-output", nargs=2, action="append",
                   metavar=("SIGNAL", "FILE"))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="design views and fabric numbers")
    p.add_argument("target")
    p.add_argument("--view", choices=("hier", "flat", "scc", "info"),
                   default="info")
    p.add_argument("--scc", action="store_true", help="shortcut for --view scc")
    p.add_argument("--flat", metavar="SCOPE",
                   help="shortcut for --view flat --scope SCOPE")
    p.add_argument("--scope", default="top")
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("shell", help="interactive debug session")
    p.add_argument("target", nargs="?")
    p.add_argument("--script", help="run a command script instead of a REPL")
    p.set_defaults(func=cmd_shell)

    p = sub.add_parser("serve", help="expose a session over a local socket")
    p.add_argument("target", nargs="?")
    p.add_argument("--socket", metavar="HOST:PORT")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; that code is kept for real bugs
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except ProcgridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        raise
    except Exception as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
