"""HTTP layer: threaded stdlib server exposing the five role endpoints.

POST /caption /generate_image /complete /detect /embed with canonical JSON
bodies, GET /blob/{hash} for image payloads. Errors use the wire format
{"error": {"code", "retryable", "message"}}.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from groundforge.canonical import canonical_bytes
from groundforge.protocol import BackendError, ProtocolError, ROLES

from .config import ServerConfig
from .service import build_service

logger = logging.getLogger(__name__)

_STATUS_BY_CODE = {
    "unknown_role": 404,
    "fixture_miss": 404,
    "blob_miss": 404,
    "role_not_configured": 501,
    "protocol_error": 400,
    "bad_request": 400,
    "adapter_failure": 500,
    "adapter_error": 500,
}


def _error_body(code: str, message: str, retryable: bool) -> bytes:
    return canonical_bytes(
        {"error": {"code": code, "message": message, "retryable": retryable}}
    )


class ProtocolRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service = None  # set by build_server on the subclass

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes):
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, exc: BackendError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        self._send(status, _error_body(exc.code, str(exc), exc.retryable))

    def do_POST(self):
        role = self.path.strip("/")
        if role not in ROLES:
            self._send_error(BackendError(f"unknown endpoint {self.path!r}",
                                          code="unknown_role"))
            return
        try:
            length = int(self.headers.get("Content-Length") or 0)
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            self._send_error(BackendError(f"request body is not valid JSON: {exc}",
                                          code="bad_request"))
            return
        try:
            response = self.service.handle(role, payload)
        except ProtocolError as exc:
            self._send_error(exc)
            return
        except BackendError as exc:
            self._send_error(exc)
            return
        self._send(200, canonical_bytes(response))

    def do_GET(self):
        if not self.path.startswith("/blob/"):
            self._send_error(BackendError(f"unknown endpoint {self.path!r}",
                                          code="unknown_role"))
            return
        blob_hash = self.path[len("/blob/"):]
        try:
            blob = self.service.get_blob(blob_hash)
        except BackendError as exc:
            self._send_error(exc)
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)


def build_server(config: ServerConfig, port: int | None = None) -> ThreadingHTTPServer:
    """Construct a ready-to-run server; port=0 picks an ephemeral port."""
    service = build_service(config)

    class Handler(ProtocolRequestHandler):
        pass

    Handler.service = service
    bind_port = config.port if port is None else port
    return ThreadingHTTPServer(("127.0.0.1", bind_port), Handler)


def serve(config: ServerConfig) -> None:
    """Run the server until interrupted."""
    server = build_server(config)
    host, port = server.server_address[:2]
    logger.info("serving %s mode on %s:%d", config.mode, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
