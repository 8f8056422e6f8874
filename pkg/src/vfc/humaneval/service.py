"""REST service for the pairwise study, plus static serving of the UI bundle
and the study images. Stdlib HTTP server: no framework dependency, and the
store already serializes all state changes."""

from __future__ import annotations

import json
import logging
import mimetypes
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from vfc.errors import DuplicateVote, NoTasks, TaskClosed, UnknownTask
from vfc.humaneval.store import VoteStore

logger = logging.getLogger(__name__)


class HumanEvalService:
    def __init__(
        self,
        store: VoteStore,
        static_dir: str | Path | None = None,
        images_root: str | Path | None = None,
    ):
        self.store = store
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self.images_root = Path(images_root).resolve() if images_root else None

    def make_server(self, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
        service = self

        class Handler(BaseHTTPRequestHandler):
            # -- helpers -------------------------------------------------------

            def _send_json(self, status: int, payload: dict) -> None:
                blob = json.dumps(payload, ensure_ascii=False).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json; charset=utf-8")
                self.send_header("Content-Length", str(len(blob)))
                self.end_headers()
                self.wfile.write(blob)

            def _send_file(self, root: Path, relative: str) -> None:
                target = (root / relative.lstrip("/")).resolve()
                if not target.is_relative_to(root) or not target.is_file():
                    self._send_json(404, {"error": "not_found"})
                    return
                mime, _ = mimetypes.guess_type(str(target))
                blob = target.read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", mime or "application/octet-stream")
                self.send_header("Content-Length", str(len(blob)))
                self.end_headers()
                self.wfile.write(blob)

            def log_message(self, fmt: str, *args) -> None:
                logger.debug("humaneval: " + fmt, *args)

            # -- routes --------------------------------------------------------

            def do_GET(self) -> None:  # noqa: N802 - BaseHTTPRequestHandler API
                parsed = urlparse(self.path)
                if parsed.path == "/healthz":
                    self._send_json(200, {"ok": True})
                    return
                if parsed.path == "/api/task":
                    rater = parse_qs(parsed.query).get("rater", [""])[0]
                    if not rater:
                        self._send_json(400, {"error": "missing rater"})
                        return
                    try:
                        task = service.store.next_task(rater)
                    except NoTasks:
                        self._send_json(404, {"error": "no_tasks"})
                        return
                    self._send_json(200, service.store.task_payload(task))
                    return
                if parsed.path == "/api/results":
                    self._send_json(200, service.store.results())
                    return
                if parsed.path.startswith("/images/"):
                    if service.images_root is None:
                        self._send_json(404, {"error": "no images_root configured"})
                        return
                    self._send_file(service.images_root, parsed.path[len("/images/"):])
                    return
                if service.static_dir is None:
                    self._send_json(404, {"error": "no static_dir configured"})
                    return
                relative = "index.html" if parsed.path == "/" else parsed.path
                self._send_file(service.static_dir, relative)

            def do_POST(self) -> None:  # noqa: N802
                parsed = urlparse(self.path)
                if parsed.path != "/api/vote":
                    self._send_json(404, {"error": "not_found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                    ack = service.store.submit_vote(
                        body.get("task_id", ""),
                        body.get("rater_id", ""),
                        body.get("choice", ""),
                    )
                except (json.JSONDecodeError, ValueError) as exc:
                    self._send_json(400, {"error": str(exc)})
                except DuplicateVote:
                    self._send_json(409, {"error": "duplicate_vote"})
                except TaskClosed:
                    self._send_json(409, {"error": "task_closed"})
                except UnknownTask:
                    self._send_json(404, {"error": "unknown_task"})
                else:
                    self._send_json(200, ack)

        return ThreadingHTTPServer((host, port), Handler)

    def serve_forever(self, host: str, port: int) -> None:
        server = self.make_server(host, port)
        logger.info("humaneval service listening on %s:%s", *server.server_address)
        # flush: supervising processes (tests, scripts) read the port from a pipe
        print(
            f"humaneval service listening on "
            f"{server.server_address[0]}:{server.server_address[1]}",
            flush=True,
        )
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.shutdown()
