/**
 * User actions and their protocol commands.
 *
 * Every control in the page maps to exactly one protocol command; the view
 * never changes engine state any other way, so a session journal audit shows
 * precisely what the user did.
 */

import type { View } from "./model.js";

export type UiAction =
  | { kind: "status" }
  | { kind: "run"; cycles?: number }
  | { kind: "pause" }
  | { kind: "step"; cycles: number }
  | { kind: "breakAddCycle"; cycle: number }
  | { kind: "breakAddSignal"; signal: string }
  | { kind: "probeTrace"; signal: string }
  | { kind: "inspect"; path: string }
  | { kind: "utilization" }
  | { kind: "fetchView"; view: View }
  | { kind: "snapshotSave"; name: string }
  | { kind: "snapshotRestore"; name: string };

export interface ProtocolCommand {
  verb: string;
  args: Record<string, unknown>;
}

export function commandFor(action: UiAction): ProtocolCommand {
  switch (action.kind) {
    case "status":
      return { verb: "status", args: {} };
    case "run":
      return { verb: "run", args: { cycles: action.cycles ?? null } };
    case "pause":
      return { verb: "pause", args: {} };
    case "step":
      return { verb: "step", args: { cycles: action.cycles } };
    case "breakAddCycle":
      return {
        verb: "break",
        args: { action: "add", kind: "cycle", arg: String(action.cycle) },
      };
    case "breakAddSignal":
      return {
        verb: "break",
        args: { action: "add", kind: "signal", arg: action.signal },
      };
    case "probeTrace":
      return {
        verb: "probe",
        args: { action: "add", kind: "trace", signals: [action.signal], params: {} },
      };
    case "inspect":
      return { verb: "inspect", args: { path: action.path } };
    case "utilization":
      return { verb: "util", args: {} };
    case "fetchView": {
      const v = action.view;
      const verb = v.kind === "hierarchy" ? "hier" : v.kind;
      return { verb, args: { scope: v.scope } };
    }
    case "snapshotSave":
      return { verb: "snapshot", args: { action: "save", name: action.name } };
    case "snapshotRestore":
      return { verb: "snapshot", args: { action: "restore", name: action.name } };
  }
}
