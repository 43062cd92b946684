/**
 * The view model and its reducers.
 *
 * Rendering is a pure function of this model; every mutation comes through
 * one of the reducers below, driven either by a protocol reply/event or by
 * a user command. Reducers never modify their input, they return a new
 * model, so a render can always be replayed from a model value.
 */

export type Display = "processing" | "waiting_comm" | "halted";

export type View =
  | { kind: "hierarchy"; scope: string }
  | { kind: "flat"; scope: string }
  | { kind: "scc"; scope: string };

export interface FlatNode {
  path: string;
  decl: string;
  kind: string;
  ae_class: string | null;
}

export interface FlatEdge {
  signal: string;
  source: string;
  dest: string;
  mode: string;
  period: number;
  tap: boolean;
}

export interface ExternalLink {
  signal: string;
  endpoint: string;
  direction: "in" | "out";
}

export interface FlatGraph {
  scope: string;
  nodes: FlatNode[];
  edges: FlatEdge[];
  externals: ExternalLink[];
}

export interface SccGraph {
  scope: string;
  components: string[][];
  dag_edges: [number, number][];
}

export interface HierChild {
  name: string;
  decl: string;
  kind: string;
  children: number;
}

export interface HierView {
  scope: string;
  decl: string;
  kind: string;
  ports: { name: string; dir: string; type: string }[];
  children: HierChild[];
  signals: {
    id: string;
    type: string;
    mode: string;
    period: number;
    source: string;
    dests: string[];
  }[];
}

export interface InstanceStatus {
  status: string;
  display: Display;
  kind: string;
  pc: number;
  executed: number;
  sleeps: number;
  sleep_cycles: number;
  port?: string;
  signal?: string;
}

export interface StatusData {
  cycle: number;
  instances: Record<string, InstanceStatus>;
  counts: Record<string, number>;
  design?: string;
  last_stop?: string;
  deadlock?: DeadlockInfo;
}

export interface DeadlockInfo {
  cycles: string[][];
  starved: string[];
  edges?: [string, string][];
}

export interface StopData {
  reason: string;
  cycle: number;
  executed?: number;
  breakpoint?: string;
  deadlock?: DeadlockInfo;
}

export interface InspectData {
  path: string;
  kind: string;
  class: string;
  status: string;
  pc: number;
  regs: number[];
  out_bufs: Record<string, number[]>;
  in_bufs: Record<string, number[]>;
  executed: number;
  sleeps: number;
  sleep_cycles: number;
  coord: [number, number];
}

export interface UtilData {
  cycle: number;
  signals: Record<
    string,
    { period: number; offered: number; fired: number; utilization: number }
  >;
  overall: number;
}

export type Connection = "connecting" | "connected" | "disconnected";

export interface ViewModel {
  connection: Connection;
  design: string | null;
  view: View;
  cycle: number;
  /** a run/step command is in flight; cleared by its reply */
  running: boolean;
  stopReason: string | null;
  deadlock: DeadlockInfo | null;
  counts: Record<string, number>;
  statuses: Record<string, Display>;
  /** per-instance blocking info while asleep, keyed by path */
  waits: Record<string, { port: string; signal: string }>;
  flat: FlatGraph | null;
  scc: SccGraph | null;
  /** hierarchy pages fetched so far, keyed by scope */
  hier: Record<string, HierView>;
  expanded: string[];
  selection: string | null;
  selectedSignal: string | null;
  inspect: InspectData | null;
  utilization: UtilData | null;
  /** signals with a probe tap added this session */
  taps: string[];
  traceTail: string[];
  error: string | null;
}

export const TRACE_TAIL_MAX = 200;

export function initialModel(): ViewModel {
  return {
    connection: "connecting",
    design: null,
    view: { kind: "flat", scope: "top" },
    cycle: 0,
    running: false,
    stopReason: null,
    deadlock: null,
    counts: {},
    statuses: {},
    waits: {},
    flat: null,
    scc: null,
    hier: {},
    expanded: ["top"],
    selection: null,
    selectedSignal: null,
    inspect: null,
    utilization: null,
    taps: [],
    traceTail: [],
    error: null,
  };
}

export function connectionUp(m: ViewModel, design: string | null): ViewModel {
  return { ...m, connection: "connected", design: design ?? m.design, error: null };
}

export function connectionLost(m: ViewModel): ViewModel {
  return { ...m, connection: "disconnected", running: false };
}

/** Fresh reconnect: keep nothing that could be stale. */
export function resetForReconnect(m: ViewModel): ViewModel {
  return { ...initialModel(), view: m.view, expanded: m.expanded };
}

export function applyStatus(m: ViewModel, data: StatusData): ViewModel {
  const statuses: Record<string, Display> = {};
  const waits: ViewModel["waits"] = {};
  for (const [path, rec] of Object.entries(data.instances)) {
    statuses[path] = rec.display;
    if (rec.port !== undefined) {
      waits[path] = { port: rec.port, signal: rec.signal ?? "" };
    }
  }
  return {
    ...m,
    cycle: data.cycle,
    counts: { ...data.counts },
    statuses,
    waits,
    design: data.design ?? m.design,
    stopReason: data.last_stop ?? m.stopReason,
    deadlock: data.deadlock ?? m.deadlock,
  };
}

export function runIssued(m: ViewModel): ViewModel {
  return { ...m, running: true, stopReason: null };
}

/** A step/run reply; also the shape of the broadcast stop event. */
export function applyStop(m: ViewModel, data: StopData): ViewModel {
  return {
    ...m,
    running: false,
    cycle: data.cycle,
    stopReason: data.reason,
    deadlock: data.deadlock ?? null,
  };
}

export function applyFlat(m: ViewModel, data: FlatGraph): ViewModel {
  return { ...m, flat: data };
}

export function applyScc(m: ViewModel, data: SccGraph): ViewModel {
  return { ...m, scc: data };
}

export function applyHier(m: ViewModel, data: HierView): ViewModel {
  return { ...m, hier: { ...m.hier, [data.scope]: data } };
}

export function applyInspect(m: ViewModel, data: InspectData): ViewModel {
  return { ...m, inspect: data };
}

export function applyUtil(m: ViewModel, data: UtilData): ViewModel {
  return { ...m, utilization: data };
}

export function applyTrace(m: ViewModel, lines: string[]): ViewModel {
  const tail = m.traceTail.concat(lines);
  return {
    ...m,
    traceTail:
      tail.length > TRACE_TAIL_MAX ? tail.slice(tail.length - TRACE_TAIL_MAX) : tail,
  };
}

export function tapAdded(m: ViewModel, signal: string): ViewModel {
  if (m.taps.includes(signal)) return m;
  return { ...m, taps: [...m.taps, signal] };
}

export function setView(m: ViewModel, view: View): ViewModel {
  return { ...m, view };
}

export function select(m: ViewModel, path: string | null): ViewModel {
  return {
    ...m,
    selection: path,
    selectedSignal: null,
    inspect: path === m.inspect?.path ? m.inspect : null,
  };
}

export function selectSignal(m: ViewModel, signal: string | null): ViewModel {
  return { ...m, selectedSignal: signal, selection: null, inspect: null };
}

export function toggleExpand(m: ViewModel, scope: string): ViewModel {
  const expanded = m.expanded.includes(scope)
    ? m.expanded.filter((s) => s !== scope)
    : [...m.expanded, scope];
  return { ...m, expanded };
}

export function commandFailed(m: ViewModel, error: string): ViewModel {
  return { ...m, error, running: false };
}

export function clearError(m: ViewModel): ViewModel {
  return { ...m, error: null };
}
