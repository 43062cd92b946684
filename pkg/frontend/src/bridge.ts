/**
 * HTTP bridge between the browser UI and a debug session socket.
 *
 * Browsers cannot open raw TCP connections, so this small server adapts:
 *   POST /cmd     {verb, args} -> forwarded to the socket, reply returned
 *   GET  /events  server-sent events stream carrying session broadcasts
 *   GET  /...     static files (index.html and compiled scripts)
 *
 * The bridge keeps two session connections. Control verbs (run, step,
 * break, ...) go over one that claims the controller role; reads, pause
 * and the event subscription go over the other. The split matters because
 * a long run occupies the control connection until it stops, while the
 * session answers other connections between cycles, which is exactly what
 * a polling UI and its pause button need.
 *
 * Each SSE client has a bounded outbound queue; when a slow client falls
 * behind, the oldest queued events are dropped and a `dropped` notice is
 * sent so the UI knows to refresh rather than trust a gapless stream.
 */

import http from "node:http";
import fs from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { parseArgs } from "node:util";
import { ProtocolClient, SessionEvent } from "./protocol.js";

const SSE_QUEUE_MAX = 200;

// Verbs that mutate the session and must ride the controller connection.
// A probe report is a read despite sharing the probe verb.
const CONTROL_VERBS = new Set([
  "load",
  "run",
  "step",
  "break",
  "probe",
  "bind",
  "trace",
  "snapshot",
  "flush",
]);

export function isControlVerb(verb: string, args: Record<string, unknown>): boolean {
  if (verb === "probe" && args.action === "report") return false;
  return CONTROL_VERBS.has(verb);
}

interface SseClient {
  res: http.ServerResponse;
  queue: string[];
  dropped: number;
  draining: boolean;
}

export interface Bridge {
  server: http.Server;
  port: number;
  control: ProtocolClient;
  reader: ProtocolClient;
  close(): void;
}

function contentType(file: string): string {
  if (file.endsWith(".html")) return "text/html; charset=utf-8";
  if (file.endsWith(".js")) return "text/javascript; charset=utf-8";
  if (file.endsWith(".css")) return "text/css; charset=utf-8";
  if (file.endsWith(".json")) return "application/json";
  return "application/octet-stream";
}

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    let body = "";
    req.setEncoding("utf8");
    req.on("data", (chunk: string) => {
      body += chunk;
      if (body.length > 1 << 20) {
        reject(new Error("request body too large"));
        req.destroy();
      }
    });
    req.on("end", () => resolve(body));
    req.on("error", reject);
  });
}

function sseWrite(client: SseClient, payload: string): void {
  client.queue.push(payload);
  while (client.queue.length > SSE_QUEUE_MAX) {
    client.queue.shift();
    client.dropped += 1;
  }
  drain(client);
}

function drain(client: SseClient): void {
  if (client.draining) return;
  client.draining = true;
  while (client.queue.length > 0) {
    if (client.dropped > 0) {
      const notice = JSON.stringify({ event: "dropped", data: { count: client.dropped } });
      client.dropped = 0;
      if (!client.res.write(`data: ${notice}\n\n`)) break;
    }
    const next = client.queue.shift()!;
    if (!client.res.write(`data: ${next}\n\n`)) break;
  }
  client.draining = false;
}

export async function startBridge(opts: {
  connectHost: string;
  connectPort: number;
  listenPort: number;
  staticDir?: string;
}): Promise<Bridge> {
  const here = path.dirname(fileURLToPath(import.meta.url));
  const staticDir = opts.staticDir ?? path.resolve(here, "..");
  const control = await ProtocolClient.connect(opts.connectHost, opts.connectPort);
  const reader = await ProtocolClient.connect(opts.connectHost, opts.connectPort);
  const sseClients = new Set<SseClient>();

  const broadcast = (doc: unknown) => {
    const payload = JSON.stringify(doc);
    for (const c of sseClients) sseWrite(c, payload);
  };

  reader.onEvent((ev: SessionEvent) => broadcast(ev));
  const onLost = () => broadcast({ event: "disconnected", data: {} });
  reader.onClose(onLost);
  control.onClose(onLost);

  // Events are subscribed on the read connection only, so each broadcast
  // reaches the browser exactly once.
  await reader.subscribe(["trace", "status", "stop", "probe"]);

  const server = http.createServer(async (req, res) => {
    const url = new URL(req.url ?? "/", "http://localhost");
    try {
      if (req.method === "POST" && url.pathname === "/cmd") {
        const body = await readBody(req);
        let cmd: { verb?: string; args?: Record<string, unknown> };
        try {
          cmd = JSON.parse(body);
        } catch {
          res.writeHead(400, { "content-type": "application/json" });
          res.end(JSON.stringify({ ok: false, error: "bad json" }));
          return;
        }
        if (!cmd.verb || typeof cmd.verb !== "string") {
          res.writeHead(400, { "content-type": "application/json" });
          res.end(JSON.stringify({ ok: false, error: "missing verb" }));
          return;
        }
        if (cmd.verb === "quit") {
          // The session outlives any one page; never let a browser end it.
          res.writeHead(403, { "content-type": "application/json" });
          res.end(JSON.stringify({ ok: false, error: "quit is not forwarded" }));
          return;
        }
        const args = cmd.args ?? {};
        const conn = isControlVerb(cmd.verb, args) ? control : reader;
        try {
          const reply = await conn.request(cmd.verb, args);
          res.writeHead(200, { "content-type": "application/json" });
          res.end(JSON.stringify(reply));
        } catch (err) {
          res.writeHead(502, { "content-type": "application/json" });
          res.end(JSON.stringify({ ok: false, error: String((err as Error).message ?? err) }));
        }
        return;
      }

      if (req.method === "GET" && url.pathname === "/events") {
        res.writeHead(200, {
          "content-type": "text/event-stream",
          "cache-control": "no-cache",
          connection: "keep-alive",
        });
        res.write(": connected\n\n");
        const sse: SseClient = { res, queue: [], dropped: 0, draining: false };
        sseClients.add(sse);
        res.on("drain", () => drain(sse));
        req.on("close", () => sseClients.delete(sse));
        return;
      }

      if (req.method === "GET") {
        const name = url.pathname === "/" ? "index.html" : url.pathname.slice(1);
        // Flatten to a basename so the handler cannot be walked out of
        // staticDir, then check the expected locations for it.
        const base = path.basename(name);
        const candidates = [path.join(staticDir, base), path.join(staticDir, "dist", base)];
        for (const file of candidates) {
          if (fs.existsSync(file) && fs.statSync(file).isFile()) {
            res.writeHead(200, { "content-type": contentType(file) });
            res.end(fs.readFileSync(file));
            return;
          }
        }
        res.writeHead(404, { "content-type": "text/plain" });
        res.end("not found");
        return;
      }

      res.writeHead(405, { "content-type": "text/plain" });
      res.end("method not allowed");
    } catch (err) {
      if (!res.headersSent) {
        res.writeHead(500, { "content-type": "text/plain" });
      }
      res.end(String((err as Error).message ?? err));
    }
  });

  await new Promise<void>((resolve) => server.listen(opts.listenPort, "127.0.0.1", resolve));
  const addr = server.address();
  const port = typeof addr === "object" && addr ? addr.port : opts.listenPort;

  return {
    server,
    port,
    control,
    reader,
    close() {
      for (const c of sseClients) c.res.end();
      sseClients.clear();
      control.close();
      reader.close();
      server.close();
    },
  };
}

export async function main(argv = process.argv.slice(2)): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      connect: { type: "string", default: "127.0.0.1:9000" },
      listen: { type: "string", default: "8080" },
    },
  });
  const [host, portStr] = (values.connect as string).split(":");
  const connectPort = Number(portStr);
  if (!host || !Number.isInteger(connectPort)) {
    console.error("--connect must look like host:port");
    process.exit(2);
  }
  const listenPort = Number(values.listen);
  const bridge = await startBridge({ connectHost: host, connectPort, listenPort });
  console.log(`bridge listening on http://127.0.0.1:${bridge.port} (session at ${values.connect})`);
  bridge.reader.onClose(() => {
    console.error("session connection closed");
  });
}

const entry = process.argv[1] ? path.resolve(process.argv[1]) : "";
if (entry && fileURLToPath(import.meta.url) === entry) {
  main().catch((err) => {
    console.error(String((err as Error)?.message ?? err));
    process.exit(1);
  });
}
