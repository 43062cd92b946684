/**
 * Line-delimited JSON client for a debug session socket.
 *
 * Requests are `{id, verb, args}` and get exactly one `{id, ok, data|error}`
 * reply; unsolicited `{event, data}` documents arrive interleaved and go to
 * event handlers. Replies resolve even when `ok` is false (a command error
 * is an answer); the promise only rejects when the connection itself dies.
 */

import net from "node:net";

export interface Reply {
  id: number;
  ok: boolean;
  data?: unknown;
  error?: string;
}

export interface SessionEvent {
  event: string;
  data: unknown;
}

type Waiter = {
  resolve: (reply: Reply) => void;
  reject: (err: Error) => void;
};

export class ProtocolClient {
  private sock: net.Socket;
  private buf = "";
  private nextId = 1;
  private pending = new Map<number, Waiter>();
  private eventHandlers: ((ev: SessionEvent) => void)[] = [];
  private closeHandlers: (() => void)[] = [];
  closed = false;

  private constructor(sock: net.Socket) {
    this.sock = sock;
    sock.setEncoding("utf8");
    sock.on("data", (chunk: string) => this.feed(chunk));
    sock.on("error", () => this.teardown());
    sock.on("close", () => this.teardown());
  }

  static connect(host: string, port: number, timeoutMs = 5000): Promise<ProtocolClient> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        sock.destroy();
        reject(new Error(`connect to ${host}:${port} timed out`));
      }, timeoutMs);
      sock.once("connect", () => {
        clearTimeout(timer);
        resolve(new ProtocolClient(sock));
      });
      sock.once("error", (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
  }

  private feed(chunk: string): void {
    this.buf += chunk;
    let nl: number;
    while ((nl = this.buf.indexOf("\n")) >= 0) {
      const line = this.buf.slice(0, nl);
      this.buf = this.buf.slice(nl + 1);
      if (!line.trim()) continue;
      let doc: Record<string, unknown>;
      try {
        doc = JSON.parse(line);
      } catch {
        continue; // a torn line on teardown is not worth dying over
      }
      if (typeof doc.id === "number" && this.pending.has(doc.id)) {
        const waiter = this.pending.get(doc.id)!;
        this.pending.delete(doc.id);
        waiter.resolve(doc as unknown as Reply);
      } else if (typeof doc.event === "string") {
        for (const handler of this.eventHandlers) {
          try {
            handler(doc as unknown as SessionEvent);
          } catch {
            // a broken handler must not kill the socket reader
          }
        }
      }
    }
  }

  request(verb: string, args: Record<string, unknown> = {}): Promise<Reply> {
    if (this.closed) {
      return Promise.reject(new Error("connection closed"));
    }
    const id = this.nextId++;
    const doc = JSON.stringify({ id, verb, args }) + "\n";
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.sock.write(doc);
    });
  }

  /** Subscribe to broadcast topics; returns the server's reply. */
  subscribe(topics: string[]): Promise<Reply> {
    return this.request("subscribe", { topics });
  }

  onEvent(handler: (ev: SessionEvent) => void): void {
    this.eventHandlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  private teardown(): void {
    if (this.closed) return;
    this.closed = true;
    this.sock.destroy();
    for (const waiter of this.pending.values()) {
      waiter.reject(new Error("connection closed"));
    }
    this.pending.clear();
    for (const handler of this.closeHandlers) {
      try {
        handler();
      } catch {
        // ignore
      }
    }
  }

  close(): void {
    this.teardown();
  }
}
