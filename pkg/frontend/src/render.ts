/**
 * Pure renderers: ViewModel in, HTML/SVG strings out.
 *
 * No DOM access and no state here. Interactive elements carry data-action
 * attributes that the page script wires up with event delegation, so the
 * same renderers run unchanged under tests.
 */

import type {
  Display,
  FlatGraph,
  HierView,
  ViewModel,
} from "./model.js";

export const STATUS_COLORS: Record<Display | "unknown", string> = {
  processing: "#2e7d32",
  waiting_comm: "#c62828",
  halted: "#757575",
  unknown: "#9e9e9e",
};

export function statusColor(display: Display | undefined): string {
  return display ? STATUS_COLORS[display] : STATUS_COLORS.unknown;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

// --- flat graph -------------------------------------------------------------

const NODE_W = 156;
const NODE_H = 46;
const CELL_W = 220;
const CELL_H = 110;
const MARGIN = 24;

interface Point {
  x: number;
  y: number;
}

/** Deterministic grid layout: nodes in path order, row-major. */
function layout(paths: string[]): Map<string, Point> {
  const cols = Math.max(1, Math.ceil(Math.sqrt(paths.length)));
  const points = new Map<string, Point>();
  paths.forEach((path, i) => {
    points.set(path, {
      x: MARGIN + (i % cols) * CELL_W + NODE_W / 2,
      y: MARGIN + Math.floor(i / cols) * CELL_H + NODE_H / 2,
    });
  });
  return points;
}

function svgSize(count: number): { w: number; h: number } {
  const cols = Math.max(1, Math.ceil(Math.sqrt(count)));
  const rows = Math.max(1, Math.ceil(count / cols));
  return {
    w: 2 * MARGIN + (cols - 1) * CELL_W + NODE_W,
    h: 2 * MARGIN + (rows - 1) * CELL_H + NODE_H,
  };
}

function nodeBox(
  path: string,
  label: string,
  sub: string,
  p: Point,
  fill: string,
  selected: boolean,
): string {
  const x = p.x - NODE_W / 2;
  const y = p.y - NODE_H / 2;
  const stroke = selected ? 'stroke="#1565c0" stroke-width="3"' : 'stroke="#333"';
  return (
    `<g class="node" data-action="select" data-path="${escapeHtml(path)}">` +
    `<rect x="${x}" y="${y}" width="${NODE_W}" height="${NODE_H}" rx="6" ` +
    `fill="${fill}" ${stroke}/>` +
    `<text x="${p.x}" y="${p.y - 4}" text-anchor="middle" fill="#fff" ` +
    `font-size="13" font-weight="bold">${escapeHtml(label)}</text>` +
    `<text x="${p.x}" y="${p.y + 13}" text-anchor="middle" fill="#f0f0f0" ` +
    `font-size="11">${escapeHtml(sub)}</text>` +
    `</g>`
  );
}

function edgeLine(
  from: Point,
  to: Point,
  label: string,
  signal: string,
  tap: boolean,
  util: number | null,
  selected: boolean,
): string {
  // trim the line to the node borders, roughly
  const dx = to.x - from.x;
  const dy = to.y - from.y;
  const len = Math.hypot(dx, dy) || 1;
  const sx = from.x + (dx / len) * (NODE_W / 2);
  const sy = from.y + (dy / len) * (NODE_H / 2 + 8);
  const ex = to.x - (dx / len) * (NODE_W / 2);
  const ey = to.y - (dy / len) * (NODE_H / 2 + 8);
  const mx = (sx + ex) / 2;
  const my = (sy + ey) / 2;
  const dash = tap ? 'stroke-dasharray="5,4"' : "";
  const stroke = selected ? "#1565c0" : "#555";
  const width = selected ? 3 : 1.6;
  const text = util === null ? label : `${label} ${(util * 100).toFixed(0)}%`;
  const badge = tap
    ? `<circle cx="${mx}" cy="${my - 14}" r="6" fill="#f9a825"/>` +
      `<title>probe tap</title>`
    : "";
  return (
    `<g class="edge" data-action="select-signal" data-signal="${escapeHtml(signal)}">` +
    `<line x1="${sx}" y1="${sy}" x2="${ex}" y2="${ey}" stroke="${stroke}" ` +
    `stroke-width="${width}" marker-end="url(#arrow)" ${dash}/>` +
    `<text x="${mx}" y="${my - 4}" text-anchor="middle" font-size="10" ` +
    `fill="#444">${escapeHtml(text)}</text>${badge}</g>`
  );
}

const SVG_DEFS =
  `<defs><marker id="arrow" markerWidth="9" markerHeight="7" refX="8" refY="3.5" ` +
  `orient="auto"><polygon points="0 0, 9 3.5, 0 7" fill="#555"/></marker></defs>`;

export function renderFlatSvg(m: ViewModel): string {
  const graph = m.flat;
  if (graph === null) return `<p class="placeholder">loading wiring…</p>`;
  const paths = graph.nodes.map((n) => n.path).sort();
  const points = layout(paths);
  const { w, h } = svgSize(paths.length);
  const utils = m.utilization;
  const parts: string[] = [];
  for (const e of graph.edges) {
    const from = points.get(e.source);
    const to = points.get(e.dest);
    if (!from || !to) continue;
    const util = utils?.signals[e.signal]?.utilization ?? null;
    const tapped = e.tap || m.taps.includes(e.signal);
    parts.push(
      edgeLine(
        from,
        to,
        `${e.signal} @${e.period} ${e.mode}`,
        e.signal,
        tapped,
        util,
        m.selectedSignal === e.signal,
      ),
    );
  }
  for (const link of graph.externals) {
    const p = points.get(link.endpoint);
    if (!p) continue;
    const outward = link.direction === "out";
    const ex = outward ? p.x + NODE_W / 2 + 46 : p.x - NODE_W / 2 - 46;
    const [x1, x2] = outward ? [p.x + NODE_W / 2, ex] : [ex, p.x - NODE_W / 2];
    parts.push(
      `<g class="external"><line x1="${x1}" y1="${p.y}" x2="${x2}" y2="${p.y}" ` +
        `stroke="#999" stroke-width="1.4" stroke-dasharray="2,3" ` +
        `marker-end="url(#arrow)"/>` +
        `<text x="${ex}" y="${p.y - 6}" font-size="10" fill="#777" ` +
        `text-anchor="middle">${escapeHtml(link.signal)}</text></g>`,
    );
  }
  for (const n of graph.nodes) {
    const p = points.get(n.path)!;
    parts.push(
      nodeBox(
        n.path,
        n.path,
        n.decl,
        p,
        statusColor(m.statuses[n.path]),
        m.selection === n.path,
      ),
    );
  }
  return (
    `<svg class="graph" viewBox="0 0 ${w} ${h}" width="${w}" height="${h}" ` +
    `xmlns="http://www.w3.org/2000/svg">${SVG_DEFS}${parts.join("")}</svg>`
  );
}

// --- SCC view ---------------------------------------------------------------

const COMP_W = 200;
const COMP_GAP = 36;

export function renderSccSvg(m: ViewModel): string {
  const scc = m.scc;
  if (scc === null) return `<p class="placeholder">loading components…</p>`;
  const rowH = 34;
  const heights = scc.components.map((c) => 40 + c.length * rowH);
  const maxH = Math.max(60, ...heights);
  const w = 2 * MARGIN + scc.components.length * (COMP_W + COMP_GAP);
  const h = 2 * MARGIN + maxH + 30;
  const centers: Point[] = [];
  const parts: string[] = [];
  scc.components.forEach((comp, i) => {
    const x = MARGIN + i * (COMP_W + COMP_GAP);
    const y = MARGIN;
    const boxH = heights[i];
    const feedback = comp.length > 1;
    const cls = feedback ? "component feedback" : "component singleton";
    const stroke = feedback ? 'stroke="#b71c1c" stroke-width="3"' : 'stroke="#888"';
    const fill = feedback ? "#fff3f3" : "#fafafa";
    centers.push({ x: x + COMP_W / 2, y: y + boxH / 2 });
    const members = comp
      .map((path, j) => {
        const cy = y + 34 + j * rowH;
        return (
          `<circle cx="${x + 18}" cy="${cy}" r="7" ` +
          `fill="${statusColor(m.statuses[path])}"/>` +
          `<text x="${x + 32}" y="${cy + 4}" font-size="12" fill="#222" ` +
          `class="member" data-action="select" data-path="${escapeHtml(path)}">` +
          `${escapeHtml(path)}</text>`
        );
      })
      .join("");
    const tag = feedback
      ? `<text x="${x + COMP_W - 8}" y="${y + 16}" text-anchor="end" ` +
        `font-size="10" fill="#b71c1c">feedback</text>`
      : "";
    parts.push(
      `<g class="${cls}"><rect x="${x}" y="${y}" width="${COMP_W}" ` +
        `height="${boxH}" rx="8" fill="${fill}" ${stroke}/>` +
        `<text x="${x + 8}" y="${y + 16}" font-size="11" fill="#555">#${i}</text>` +
        `${tag}${members}</g>`,
    );
  });
  for (const [a, b] of scc.dag_edges) {
    const from = centers[a];
    const to = centers[b];
    if (!from || !to) continue;
    const y = MARGIN + maxH + 14;
    parts.push(
      `<path d="M ${from.x} ${heights[a] + MARGIN} C ${from.x} ${y}, ` +
        `${to.x} ${y}, ${to.x} ${heights[b] + MARGIN}" fill="none" ` +
        `stroke="#555" stroke-width="1.6" marker-end="url(#arrow)"/>`,
    );
  }
  return (
    `<svg class="graph scc" viewBox="0 0 ${w} ${h}" width="${w}" height="${h}" ` +
    `xmlns="http://www.w3.org/2000/svg">${SVG_DEFS}${parts.join("")}</svg>`
  );
}

// --- hierarchy view ---------------------------------------------------------

function hierChildren(m: ViewModel, scope: string, page: HierView): string {
  const rows = page.children
    .map((child) => {
      const childPath = `${scope}/${child.name}`;
      if (child.kind === "composite") {
        const open = m.expanded.includes(childPath);
        const sub =
          open && m.hier[childPath]
            ? hierChildren(m, childPath, m.hier[childPath])
            : "";
        return (
          `<li class="composite"><span data-action="toggle" ` +
          `data-scope="${escapeHtml(childPath)}">${open ? "▾" : "▸"} ` +
          `${escapeHtml(child.name)} : ${escapeHtml(child.decl)} ` +
          `(${child.children} inside)</span>${sub}</li>`
        );
      }
      const color = statusColor(m.statuses[childPath]);
      return (
        `<li class="leaf" data-action="select" data-path="${escapeHtml(childPath)}">` +
        `<span class="dot" style="background:${color}"></span>` +
        `${escapeHtml(child.name)} : ${escapeHtml(child.decl)}</li>`
      );
    })
    .join("");
  const signals = page.signals
    .map(
      (s) =>
        `<li class="signal">${escapeHtml(s.id)} : ${escapeHtml(s.type)} ` +
        `@${s.period} ${escapeHtml(s.mode)} ${escapeHtml(s.source)} → ` +
        `${escapeHtml(s.dests.join(", "))}</li>`,
    )
    .join("");
  return `<ul class="hier">${rows}${signals ? `<ul class="signals">${signals}</ul>` : ""}</ul>`;
}

export function renderHierarchy(m: ViewModel): string {
  const root = m.hier[m.view.scope];
  if (!root) return `<p class="placeholder">loading hierarchy…</p>`;
  return (
    `<div class="hier-root"><strong>${escapeHtml(root.scope)}</strong> : ` +
    `${escapeHtml(root.decl)}${hierChildren(m, root.scope, root)}</div>`
  );
}

// --- panels -----------------------------------------------------------------

export function renderInspector(m: ViewModel): string {
  if (m.selection === null) {
    return `<p class="placeholder">select a process</p>`;
  }
  const d = m.inspect;
  if (!d || d.path !== m.selection) {
    return `<p class="placeholder">inspecting ${escapeHtml(m.selection)}…</p>`;
  }
  const regs = d.regs
    .map((v, i) => `<span class="reg">r${i}=${v}</span>`)
    .join(" ");
  const bufs = (title: string, bufs: Record<string, number[]>) =>
    Object.entries(bufs)
      .map(
        ([port, vals]) =>
          `<div>${title} ${escapeHtml(port)}: [${vals.join(", ")}]</div>`,
      )
      .join("");
  return (
    `<div class="inspector"><h3>${escapeHtml(d.path)}</h3>` +
    `<div>${escapeHtml(d.kind)} (${escapeHtml(d.class)}) at ` +
    `(${d.coord[0]}, ${d.coord[1]})</div>` +
    `<div>status <b>${escapeHtml(d.status)}</b>, pc ${d.pc}</div>` +
    `<div>executed ${d.executed}, slept ${d.sleep_cycles} over ${d.sleeps} naps</div>` +
    `<div class="regs">${regs}</div>` +
    bufs("in", d.in_bufs) +
    bufs("out", d.out_bufs) +
    `</div>`
  );
}

export function renderTracePanel(m: ViewModel): string {
  if (!m.traceTail.length) return `<p class="placeholder">no trace yet</p>`;
  const lines = m.traceTail.map((l) => escapeHtml(l)).join("\n");
  return `<pre class="trace">${lines}</pre>`;
}

export function renderStatusBar(m: ViewModel): string {
  const conn = `<span class="conn ${m.connection}">${m.connection}</span>`;
  const design = m.design ? ` <b>${escapeHtml(m.design)}</b>` : "";
  const cycle = ` cycle <b>${m.cycle}</b>`;
  const counts = Object.entries(m.counts)
    .map(([k, v]) => `${k} ${v}`)
    .join(", ");
  const run = m.running ? ` <span class="running">running…</span>` : "";
  const stop = m.stopReason ? ` stopped: ${escapeHtml(m.stopReason)}` : "";
  const dead = m.deadlock
    ? `<div class="deadlock">deadlock: cycles ` +
      `${m.deadlock.cycles.map((c) => `[${c.join(" ⇄ ")}]`).join(" ")}` +
      (m.deadlock.starved.length
        ? `; starved ${m.deadlock.starved.join(", ")}`
        : "") +
      `</div>`
    : "";
  const err = m.error
    ? `<div class="error" data-action="clear-error">${escapeHtml(m.error)}</div>`
    : "";
  return `<div class="statusbar">${conn}${design}${cycle} | ${counts}${run}${stop}</div>${dead}${err}`;
}

export function renderControls(m: ViewModel): string {
  const off = m.connection !== "connected";
  const dis = (cond: boolean) => (cond ? " disabled" : "");
  const viewBtn = (kind: string, label: string) => {
    const active = m.view.kind === kind ? " active" : "";
    return (
      `<button class="view${active}" data-action="view" data-view="${kind}"` +
      `${dis(off)}>${label}</button>`
    );
  };
  return (
    `<div class="controls">` +
    `<button data-action="run"${dis(off || m.running)}>run</button>` +
    `<button data-action="pause"${dis(off || !m.running)}>pause</button>` +
    `<button data-action="step" data-cycles="1"${dis(off || m.running)}>step</button>` +
    `<button data-action="step" data-cycles="10"${dis(off || m.running)}>step 10</button>` +
    `<button data-action="refresh"${dis(off)}>status</button>` +
    `<button data-action="util"${dis(off)}>utilization</button>` +
    `<button data-action="probe"${dis(off || m.selectedSignal === null)}>probe selected edge</button>` +
    viewBtn("hierarchy", "hierarchy") +
    viewBtn("flat", "flat") +
    viewBtn("scc", "components") +
    `</div>`
  );
}

export function renderView(m: ViewModel): string {
  switch (m.view.kind) {
    case "flat":
      return renderFlatSvg(m);
    case "scc":
      return renderSccSvg(m);
    case "hierarchy":
      return renderHierarchy(m);
  }
}

export function renderPage(m: ViewModel): string {
  return (
    `${renderStatusBar(m)}${renderControls(m)}` +
    `<div class="main"><div class="viewpane">${renderView(m)}</div>` +
    `<div class="sidepane">${renderInspector(m)}` +
    `<h3 class="trace-title">trace tail</h3>${renderTracePanel(m)}</div></div>`
  );
}
