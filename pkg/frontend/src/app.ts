/**
 * Browser entry point: wires the rendered page to the HTTP bridge.
 *
 * All state lives in one ViewModel; every server reply and pushed event
 * goes through a reducer and the page rerenders from scratch. DOM events
 * are delegated from the root via data-action attributes, so the markup
 * produced by the renderers stays inert strings.
 */

import {
  ViewModel,
  View,
  initialModel,
  connectionUp,
  connectionLost,
  resetForReconnect,
  applyStatus,
  runIssued,
  applyStop,
  applyFlat,
  applyScc,
  applyHier,
  applyInspect,
  applyUtil,
  applyTrace,
  tapAdded,
  setView,
  select,
  selectSignal,
  toggleExpand,
  commandFailed,
  clearError,
  StatusData,
  StopData,
  FlatGraph,
  SccGraph,
  HierView,
  InspectData,
  UtilData,
} from "./model.js";
import { UiAction, commandFor } from "./controls.js";
import { renderPage } from "./render.js";

const POLL_MS = 250;

let model: ViewModel = initialModel();
const root = document.getElementById("root")!;

function rerender(): void {
  root.innerHTML = renderPage(model);
}

function update(next: ViewModel): void {
  model = next;
  rerender();
}

interface CmdReply {
  ok: boolean;
  data?: unknown;
  error?: string;
}

async function post(verb: string, args: Record<string, unknown>): Promise<CmdReply> {
  const res = await fetch("/cmd", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ verb, args }),
  });
  return (await res.json()) as CmdReply;
}

async function dispatch(action: UiAction): Promise<void> {
  const cmd = commandFor(action);
  if (action.kind === "run" || action.kind === "step") {
    update(runIssued(model));
  }
  let reply: CmdReply;
  try {
    reply = await post(cmd.verb, cmd.args);
  } catch {
    update(connectionLost(model));
    return;
  }
  if (!reply.ok) {
    update(commandFailed(model, reply.error ?? "command failed"));
    return;
  }
  switch (action.kind) {
    case "run":
    case "step":
      update(applyStop(model, reply.data as StopData));
      await refreshStatus();
      break;
    case "pause":
      // The stop broadcast carries the authoritative state.
      break;
    case "status":
      update(applyStatus(model, reply.data as StatusData));
      break;
    case "inspect":
      update(applyInspect(model, reply.data as InspectData));
      break;
    case "utilization":
      update(applyUtil(model, reply.data as UtilData));
      break;
    case "probeTrace":
      update(tapAdded(model, action.signal));
      break;
    case "fetchView":
      applyViewReply(action.view, reply.data);
      break;
    case "snapshotRestore":
      await refreshStatus();
      break;
    default:
      break;
  }
}

function applyViewReply(view: View, data: unknown): void {
  if (view.kind === "hierarchy") update(applyHier(model, data as HierView));
  else if (view.kind === "scc") update(applyScc(model, data as SccGraph));
  else update(applyFlat(model, data as FlatGraph));
}

async function refreshStatus(): Promise<void> {
  try {
    const reply = await post("status", {});
    if (reply.ok) update(applyStatus(model, reply.data as StatusData));
  } catch {
    update(connectionLost(model));
  }
}

function onRootClick(ev: Event): void {
  const target = (ev.target as HTMLElement).closest("[data-action]") as HTMLElement | null;
  if (!target) return;
  const action = target.dataset.action!;
  switch (action) {
    case "run":
      void dispatch({ kind: "run" });
      break;
    case "pause":
      void dispatch({ kind: "pause" });
      break;
    case "step": {
      const n = Number(target.dataset.cycles ?? "1");
      void dispatch({ kind: "step", cycles: n });
      break;
    }
    case "refresh":
      void refreshStatus();
      break;
    case "util":
      void dispatch({ kind: "utilization" });
      break;
    case "view": {
      const view: View = {
        kind: target.dataset.view as View["kind"],
        scope: model.view.scope,
      };
      update(setView(model, view));
      void dispatch({ kind: "fetchView", view });
      break;
    }
    case "select": {
      const path = target.dataset.path!;
      update(select(model, path));
      void dispatch({ kind: "inspect", path });
      break;
    }
    case "select-signal":
      update(selectSignal(model, target.dataset.signal!));
      break;
    case "toggle": {
      const scope = target.dataset.scope!;
      update(toggleExpand(model, scope));
      if (model.expanded.includes(scope) && !model.hier[scope]) {
        void dispatch({ kind: "fetchView", view: { kind: "hierarchy", scope } });
      }
      break;
    }
    case "probe":
      if (model.selectedSignal !== null) {
        void dispatch({ kind: "probeTrace", signal: model.selectedSignal });
      }
      break;
    case "clear-error":
      update(clearError(model));
      break;
    default:
      break;
  }
}

function onPushedEvent(doc: { event: string; data: unknown }): void {
  switch (doc.event) {
    case "status":
      update(applyStatus(model, doc.data as StatusData));
      break;
    case "stop":
      update(applyStop(model, doc.data as StopData));
      void refreshStatus();
      break;
    case "trace":
      update(applyTrace(model, (doc.data as { lines: string[] }).lines));
      break;
    case "dropped":
      // The stream skipped events for us; resync.
      void refreshStatus();
      break;
    case "disconnected":
      update(connectionLost(model));
      break;
    default:
      break;
  }
}

function connectEvents(): void {
  const source = new EventSource("/events");
  source.onmessage = (ev) => {
    try {
      onPushedEvent(JSON.parse(ev.data));
    } catch {
      // skip malformed frames
    }
  };
  source.onopen = () => {
    update(connectionUp(resetForReconnect(model), null));
    void bootstrap();
  };
  source.onerror = () => {
    update(connectionLost(model));
    // EventSource retries on its own; state refreshes on the next open.
  };
}

async function bootstrap(): Promise<void> {
  await refreshStatus();
  void dispatch({ kind: "fetchView", view: model.view });
}

setInterval(() => {
  if (model.running && model.connection === "connected") {
    void refreshStatus();
  }
}, POLL_MS);

root.addEventListener("click", onRootClick);
rerender();
connectEvents();
