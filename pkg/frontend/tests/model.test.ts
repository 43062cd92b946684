import { describe, expect, it } from "vitest";
import {
  TRACE_TAIL_MAX,
  applyHier,
  applyStatus,
  applyStop,
  applyTrace,
  clearError,
  commandFailed,
  connectionLost,
  connectionUp,
  initialModel,
  resetForReconnect,
  runIssued,
  select,
  selectSignal,
  setView,
  tapAdded,
  toggleExpand,
  ViewModel,
  StatusData,
} from "../src/model.js";

function statusData(overrides: Partial<StatusData> = {}): StatusData {
  return {
    cycle: 42,
    instances: {
      "top/a": {
        status: "asleep",
        display: "waiting_comm",
        kind: "left",
        pc: 1,
        executed: 2,
        sleeps: 1,
        sleep_cycles: 40,
        port: "i",
        signal: "ba",
      },
      "top/b": {
        status: "ready",
        display: "processing",
        kind: "right",
        pc: 0,
        executed: 3,
        sleeps: 0,
        sleep_cycles: 0,
      },
    },
    counts: { processing: 1, waiting_comm: 1, halted: 0 },
    design: "crosswait",
    ...overrides,
  };
}

describe("applyStatus", () => {
  it("maps instance displays and waits", () => {
    const m = applyStatus(initialModel(), statusData());
    expect(m.cycle).toBe(42);
    expect(m.statuses).toEqual({ "top/a": "waiting_comm", "top/b": "processing" });
    expect(m.waits).toEqual({ "top/a": { port: "i", signal: "ba" } });
    expect(m.counts.waiting_comm).toBe(1);
    expect(m.design).toBe("crosswait");
  });

  it("keeps the design name when a push omits it", () => {
    const first = applyStatus(initialModel(), statusData());
    const push = statusData({ design: undefined, cycle: 50 });
    delete (push as Record<string, unknown>).design;
    const m = applyStatus(first, push);
    expect(m.design).toBe("crosswait");
    expect(m.cycle).toBe(50);
  });

  it("does not mutate its input", () => {
    const before = initialModel();
    const copy = JSON.parse(JSON.stringify(before));
    applyStatus(before, statusData());
    expect(before).toEqual(copy);
  });
});

describe("run lifecycle", () => {
  it("runIssued sets running and clears the old stop reason", () => {
    const m0: ViewModel = { ...initialModel(), stopReason: "breakpoint" };
    const m = runIssued(m0);
    expect(m.running).toBe(true);
    expect(m.stopReason).toBeNull();
  });

  it("applyStop lands the cycle, reason and deadlock", () => {
    const m = applyStop(runIssued(initialModel()), {
      reason: "deadlock",
      cycle: 7,
      deadlock: { cycles: [["top/a", "top/b"]], starved: [] },
    });
    expect(m.running).toBe(false);
    expect(m.cycle).toBe(7);
    expect(m.stopReason).toBe("deadlock");
    expect(m.deadlock?.cycles).toEqual([["top/a", "top/b"]]);
  });

  it("applyStop clears a stale deadlock after a clean stop", () => {
    const dead = applyStop(initialModel(), {
      reason: "deadlock",
      cycle: 7,
      deadlock: { cycles: [["top/a"]], starved: [] },
    });
    const m = applyStop(dead, { reason: "cycle_limit", cycle: 17 });
    expect(m.deadlock).toBeNull();
  });
});

describe("connection state", () => {
  it("connectionLost stops claiming a run is in flight", () => {
    const m = connectionLost(runIssued(initialModel()));
    expect(m.connection).toBe("disconnected");
    expect(m.running).toBe(false);
  });

  it("reconnect reset keeps only the chosen view and expansion", () => {
    let m = applyStatus(initialModel(), statusData());
    m = setView(m, { kind: "scc", scope: "top" });
    m = toggleExpand(m, "top/pipe");
    const fresh = connectionUp(resetForReconnect(m), null);
    expect(fresh.connection).toBe("connected");
    expect(fresh.view).toEqual({ kind: "scc", scope: "top" });
    expect(fresh.expanded).toContain("top/pipe");
    expect(fresh.statuses).toEqual({});
    expect(fresh.cycle).toBe(0);
  });
});

describe("trace tail", () => {
  it("appends lines and keeps only the newest TRACE_TAIL_MAX", () => {
    let m = applyTrace(initialModel(), ["a", "b"]);
    expect(m.traceTail).toEqual(["a", "b"]);
    const many = Array.from({ length: TRACE_TAIL_MAX }, (_, i) => `line ${i}`);
    m = applyTrace(m, many);
    expect(m.traceTail).toHaveLength(TRACE_TAIL_MAX);
    expect(m.traceTail[0]).toBe("line 0");
    expect(m.traceTail.at(-1)).toBe(`line ${TRACE_TAIL_MAX - 1}`);
  });
});

describe("selection", () => {
  it("selecting a node clears the selected signal and vice versa", () => {
    let m = selectSignal(initialModel(), "ab");
    expect(m.selectedSignal).toBe("ab");
    m = select(m, "top/a");
    expect(m.selection).toBe("top/a");
    expect(m.selectedSignal).toBeNull();
    m = selectSignal(m, "ba");
    expect(m.selection).toBeNull();
    expect(m.selectedSignal).toBe("ba");
  });

  it("toggleExpand flips membership without duplicating", () => {
    const base = initialModel();
    const opened = toggleExpand(base, "top/pipe");
    expect(opened.expanded).toContain("top/pipe");
    const closed = toggleExpand(opened, "top/pipe");
    expect(closed.expanded).not.toContain("top/pipe");
    expect(closed.expanded).toEqual(base.expanded);
  });
});

describe("misc reducers", () => {
  it("tapAdded is idempotent per signal", () => {
    const once = tapAdded(initialModel(), "s");
    const twice = tapAdded(once, "s");
    expect(twice.taps).toEqual(["s"]);
  });

  it("hier pages accumulate by scope", () => {
    const page = (scope: string) => ({
      scope,
      decl: "sys",
      kind: "composite",
      ports: [],
      children: [],
      signals: [],
    });
    let m = applyHier(initialModel(), page("top"));
    m = applyHier(m, page("top/pipe"));
    expect(Object.keys(m.hier).sort()).toEqual(["top", "top/pipe"]);
  });

  it("commandFailed records the error until cleared", () => {
    const failed = commandFailed(runIssued(initialModel()), "no such path");
    expect(failed.error).toBe("no such path");
    expect(failed.running).toBe(false);
    expect(clearError(failed).error).toBeNull();
  });
});
