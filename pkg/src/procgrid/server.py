"""Line-delimited JSON control protocol over a local socket.

Requests are {"id": ..., "verb": ..., "args": {...}} and get exactly one
response {"id": ..., "ok": true, "data": ...} or {"id": ..., "ok": false,
"error": "..."}; pushed events carry an "event" key instead of an "id".

Exactly one connection at a time may mutate the session (the first to try
becomes the controller); everyone else is read-only. Read requests that
arrive while the controller has a run in flight are answered between cycles,
so a UI can poll status without pausing the simulation. Subscriber queues are
bounded, dropping the oldest entries first; a drop count rides on the next
delivered event so the client knows it missed some.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from collections import deque

from . import analysis
from .shell import CommandResult, Session

QUEUE_LIMIT = 1000
TOPICS = ("trace", "status", "stop", "probe")

# verbs that mutate the session; everything else is read-only
CONTROL_VERBS = {
    "load", "run", "step", "break", "probe", "bind", "trace",
    "snapshot", "flush", "quit",
}


def _is_control(verb: str, args: dict) -> bool:
    if verb == "probe" and args.get("action") == "report":
        return False
    return verb in CONTROL_VERBS


class _Client:
    """One connected peer: its socket, its topics, its bounded event queue."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.send_lock = threading.Lock()
        self.topics: set[str] = set()
        self.queue: deque[dict] = deque()
        self.dropped = 0
        self.queue_lock = threading.Lock()
        self.closed = False

    def send_doc(self, doc: dict):
        data = (json.dumps(doc) + "\n").encode("utf-8")
        with self.send_lock:
            if self.closed:
                return
            try:
                self.sock.sendall(data)
            except OSError:
                self.closed = True

    def push_event(self, topic: str, data):
        if topic not in self.topics or self.closed:
            return
        with self.queue_lock:
            if len(self.queue) >= QUEUE_LIMIT:
                self.queue.popleft()
                self.dropped += 1
            self.queue.append({"event": topic, "data": data})

    def drain_events(self):
        while True:
            with self.queue_lock:
                if not self.queue:
                    return
                doc = self.queue.popleft()
                if self.dropped:
                    doc["dropped"] = self.dropped
                    self.dropped = 0
            self.send_doc(doc)


class ProtocolServer:
    """Serve one Session to local clients."""

    def __init__(self, session: Session | None = None,
                 host: str = "127.0.0.1", port: int = 0):
        self.session = session or Session()
        self.lock = threading.Lock()
        self.clients: set[_Client] = set()
        self.clients_lock = threading.Lock()
        self.controller: _Client | None = None
        self.pending: deque[tuple[_Client, dict]] = deque()
        self.pending_lock = threading.Lock()
        self.pause_flag = threading.Event()
        self.running = False
        self._trace_mark = 0

        self.session.cycle_hook = self._cycle_hook

        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                client = _Client(self.connection)
                with outer.clients_lock:
                    outer.clients.add(client)
                try:
                    for raw in self.rfile:
                        line = raw.decode("utf-8", errors="replace").strip()
                        if not line:
                            continue
                        try:
                            doc = json.loads(line)
                        except json.JSONDecodeError as exc:
                            client.send_doc({"id": None, "ok": False,
                                             "error": f"bad json: {exc}"})
                            continue
                        if outer._dispatch(client, doc):
                            break
                finally:
                    client.closed = True
                    with outer.clients_lock:
                        outer.clients.discard(client)
                    if outer.controller is client:
                        outer.controller = None

        class Server(socketserver.ThreadingTCPServer):
            daemon_threads = True
            allow_reuse_address = True

        self._server = Server((host, port), Handler)
        self.address = self._server.server_address
        self._thread: threading.Thread | None = None

    # --- request handling ---

    def _dispatch(self, client: _Client, doc: dict) -> bool:
        """Handle one request; True means the connection should close."""
        req_id = doc.get("id")
        verb = doc.get("verb")
        args = doc.get("args") or {}
        if not isinstance(verb, str):
            client.send_doc({"id": req_id, "ok": False,
                             "error": "request needs a string 'verb'"})
            return False

        if verb == "subscribe":
            topics = args.get("topics", list(TOPICS))
            bad = [t for t in topics if t not in TOPICS]
            if bad:
                client.send_doc({"id": req_id, "ok": False,
                                 "error": f"unknown topics: {bad}"})
                return False
            client.topics = set(topics)
            client.send_doc({"id": req_id, "ok": True,
                             "data": {"topics": sorted(client.topics)}})
            return False

        if verb == "pause":
            # honored from any connection; the controller is usually blocked
            # inside its own run when someone needs this
            self.pause_flag.set()
            client.send_doc({"id": req_id, "ok": True, "data": {"pause": "requested"}})
            return False

        if _is_control(verb, args):
            if self.controller is not None and self.controller is not client:
                client.send_doc({"id": req_id, "ok": False,
                                 "error": "another connection controls this session"})
                return False
            self.controller = client
            if verb == "quit":
                client.send_doc({"id": req_id, "ok": True, "data": {"closing": True}})
                return True
            with self.lock:
                if verb in ("run", "step"):
                    self.running = True
                    self._trace_mark = len(self.session.state.trace) \
                        if self.session.state else 0
                    try:
                        result = self.session.execute(verb, args)
                    finally:
                        self.running = False
                        self.pause_flag.clear()
                    self._broadcast_trace_delta()
                    if result.ok:
                        self._broadcast("stop", result.data)
                        self._broadcast("status", self._status_data())
                        self._broadcast_probe_report()
                else:
                    result = self.session.execute(verb, args)
            client.send_doc({"id": req_id, **result.to_doc()})
            self._drain_pending()
            self._drain_all()
            return False

        # read-only verb: answer now if the session is idle, otherwise leave
        # it for the cycle hook to answer between cycles
        if self.lock.acquire(timeout=0.05):
            try:
                result = self.session.execute(verb, args)
            finally:
                self.lock.release()
            client.send_doc({"id": req_id, **result.to_doc()})
        else:
            with self.pending_lock:
                self.pending.append((client, doc))
        return False

    # --- mid-run servicing ---

    def _cycle_hook(self, state) -> bool:
        while True:
            with self.pending_lock:
                if not self.pending:
                    break
                client, doc = self.pending.popleft()
            result = self.session.execute(doc.get("verb"), doc.get("args") or {})
            client.send_doc({"id": doc.get("id"), **result.to_doc()})
        if state.cycle % max(1, state.frame) == 0:
            self._broadcast("status", self._status_data())
        self._broadcast_trace_delta()
        self._drain_all()
        return self.pause_flag.is_set()

    def _drain_pending(self):
        """Answer reads that queued up while a short control command held the
        session; mid-run ones are handled by the cycle hook instead."""
        while True:
            with self.pending_lock:
                if not self.pending:
                    return
                client, doc = self.pending.popleft()
            with self.lock:
                result = self.session.execute(doc.get("verb"), doc.get("args") or {})
            client.send_doc({"id": doc.get("id"), **result.to_doc()})

    def _status_data(self):
        if self.session.state is None:
            return {"cycle": 0, "instances": {}, "counts": {}}
        return analysis.live_status(self.session.state)

    def _broadcast(self, topic: str, data):
        with self.clients_lock:
            targets = list(self.clients)
        for client in targets:
            client.push_event(topic, data)

    def _broadcast_probe_report(self):
        state = self.session.state
        if state is None or not state.artifact.probes:
            return
        from .instruments import probe_report

        self._broadcast("probe", {"probes": probe_report(state)})

    def _broadcast_trace_delta(self):
        state = self.session.state
        if state is None:
            return
        lines = state.trace[self._trace_mark:]
        self._trace_mark = len(state.trace)
        if lines:
            self._broadcast("trace", {"lines": lines})

    def _drain_all(self):
        with self.clients_lock:
            targets = list(self.clients)
        for client in targets:
            client.drain_events()

    # --- lifecycle ---

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        self._server.serve_forever()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve(session: Session | None = None, host: str = "127.0.0.1",
          port: int = 0) -> ProtocolServer:
    return ProtocolServer(session, host, port).start()
