"""Canned-response HTTP server used by the integration tests and ``secheader fixture``.

Config file: a JSON object mapping a request path to
``{"status": 200, "headers": [[name, value], ...], "body": "...", "delay_ms": 0}``.
Headers are sent exactly as configured, in order, with nothing added.
Unknown paths get ``404`` with ``Server: fixture``.
"""

from __future__ import annotations

import json
import logging
import ssl
import threading
import time
from dataclasses import dataclass, field
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Union
from urllib.parse import urlsplit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Route:
    status: int = 200
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""
    delay_ms: int = 0

    @classmethod
    def from_json(cls, obj: dict) -> Route:
        headers = obj.get("headers", [])
        if isinstance(headers, dict):
            headers = list(headers.items())
        body = obj.get("body", "")
        return cls(
            status=int(obj.get("status", 200)),
            headers=tuple((str(n), str(v)) for n, v in headers),
            body=body.encode("utf-8") if isinstance(body, str) else bytes(body),
            delay_ms=int(obj.get("delay_ms", 0)),
        )


NOT_FOUND = Route(404, (("Server", "fixture"), ("Content-Type", "text/plain")), b"not found\n")


def load_routes(path: Union[str, Path]) -> dict[str, Route]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected an object mapping paths to responses")
    return {p: Route.from_json(r) for p, r in data.items()}


@dataclass
class Stats:
    """Request accounting, shared by the handler threads."""

    in_flight: int = 0
    max_in_flight: int = 0
    requests: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def enter(self, line: str, headers: list) -> None:
        with self.lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            self.requests.append((line, headers))

    def leave(self) -> None:
        with self.lock:
            self.in_flight -= 1

    def reset(self) -> None:
        with self.lock:
            self.max_in_flight = self.in_flight
            self.requests.clear()


class _Handler(BaseHTTPRequestHandler):
    server: _Server

    def log_message(self, fmt, *args):
        log.info("%s %s", self.address_string(), fmt % args)

    def do_GET(self):
        stats = self.server.stats
        stats.enter(self.requestline, list(self.headers.items()))
        try:
            target = self.path
            route = self.server.routes.get(target) or self.server.routes.get(urlsplit(target).path)
            route = route or NOT_FOUND
            if route.delay_ms:
                time.sleep(route.delay_ms / 1000)
            self.log_request(route.status)
            try:
                reason = HTTPStatus(route.status).phrase
            except ValueError:
                reason = ""
            head = [f"HTTP/1.1 {route.status} {reason}".encode("latin-1")]
            head += [f"{n}: {v}".encode("latin-1") for n, v in route.headers]
            self.wfile.write(b"\r\n".join(head) + b"\r\n\r\n" + route.body)
            self.wfile.flush()
            self.close_connection = True
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            stats.leave()


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    block_on_close = False
    allow_reuse_address = True

    def __init__(self, address, routes, ssl_context=None):
        self.routes = routes
        self.stats = Stats()
        self.ssl_context = ssl_context
        super().__init__(address, _Handler)

    def get_request(self):
        sock, addr = super().get_request()
        if self.ssl_context is not None:
            sock = self.ssl_context.wrap_socket(sock, server_side=True, do_handshake_on_connect=False)
        return sock, addr

    def finish_request(self, request, client_address):
        if isinstance(request, ssl.SSLSocket):
            try:
                request.settimeout(10)
                request.do_handshake()
            except (ssl.SSLError, OSError):
                return
        super().finish_request(request, client_address)


class FixtureServer:
    """Run the fixture in a background thread::

        with FixtureServer(routes) as srv:
            srv.url("/path")
    """

    def __init__(self, routes: dict[str, Route], host: str = "127.0.0.1", port: int = 0,
                 certfile: Optional[str] = None, keyfile: Optional[str] = None):
        context = None
        if certfile:
            context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            context.load_cert_chain(certfile, keyfile)
        self._server = _Server((host, port), dict(routes), context)
        self._thread: Optional[threading.Thread] = None
        self.scheme = "https" if context else "http"

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def stats(self) -> Stats:
        return self._server.stats

    def url(self, path: str = "/", host: Optional[str] = None) -> str:
        return f"{self.scheme}://{host or self.host}:{self.port}{path}"

    def start(self) -> FixtureServer:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self.close()

    def close(self) -> None:
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
