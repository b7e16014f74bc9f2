"""Minimal JSON-over-HTTP search endpoint.

GET /health  -> 200 "ok"
POST /search -> {"query": str, "overrides": {"top_k"?, "final_k"?, "rerank"?}} -> SearchOutcome JSON
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from .errors import ConfigError, DataError, ProviderError
from .pipeline import IndexSet, SearchConfig, run_search

log = logging.getLogger(__name__)

ALLOWED_OVERRIDES = ("top_k", "final_k", "rerank")
MAX_BODY = 1 << 20


class BadRequest(Exception):
    pass


def apply_overrides(config: SearchConfig, overrides: Any) -> SearchConfig:
    if overrides is None:
        return config
    if not isinstance(overrides, dict):
        raise BadRequest("overrides must be an object")
    unknown = set(overrides) - set(ALLOWED_OVERRIDES)
    if unknown:
        raise BadRequest(f"unsupported overrides: {sorted(unknown)}")
    changes: dict[str, Any] = {}
    for key in ("top_k", "final_k"):
        if key in overrides:
            value = overrides[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise BadRequest(f"{key} must be an integer")
            changes[key] = value
    if "rerank" in overrides:
        if not isinstance(overrides["rerank"], bool):
            raise BadRequest("rerank must be a boolean")
        changes["rerank"] = replace(config.rerank, enabled=overrides["rerank"])
    if "top_k" in changes and "final_k" not in changes:
        changes["final_k"] = min(config.final_k, changes["top_k"])
    try:
        return replace(config, **changes)
    except ConfigError as exc:
        raise BadRequest(str(exc)) from None


class SearchService:
    def __init__(self, config: SearchConfig, indices: IndexSet):
        self.config = config
        self.indices = indices

    def handle_search(self, body: bytes) -> dict[str, Any]:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise BadRequest("body must be JSON") from None
        if not isinstance(payload, dict):
            raise BadRequest("body must be a JSON object")
        query = payload.get("query")
        if not isinstance(query, str) or not query.strip():
            raise BadRequest("query must be a non-blank string")
        config = apply_overrides(self.config, payload.get("overrides"))
        try:
            outcome = run_search(config, self.indices, query, payload.get("query_id"))
        except ConfigError as exc:
            raise BadRequest(str(exc)) from None
        return outcome.to_json()


def _make_handler(service: SearchService):
    class Handler(BaseHTTPRequestHandler):
        server_version = "eclass-search"

        def log_message(self, fmt: str, *args: Any) -> None:
            log.info("%s " + fmt, self.address_string(), *args)

        def _send(self, status: int, body: bytes, ctype: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _json(self, status: int, obj: Any) -> None:
            self._send(status, json.dumps(obj, ensure_ascii=False).encode("utf-8"), "application/json")

        def do_GET(self) -> None:
            if self.path == "/health":
                self._send(HTTPStatus.OK, b"ok", "text/plain; charset=utf-8")
            else:
                self._json(HTTPStatus.NOT_FOUND, {"error": "not found"})

        def do_POST(self) -> None:
            if self.path != "/search":
                self._json(HTTPStatus.NOT_FOUND, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                length = -1
            if not 0 <= length <= MAX_BODY:
                self._json(HTTPStatus.BAD_REQUEST, {"error": "invalid Content-Length"})
                return
            try:
                self._json(HTTPStatus.OK, service.handle_search(self.rfile.read(length)))
            except BadRequest as exc:
                self._json(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
            except DataError as exc:
                self._json(HTTPStatus.UNPROCESSABLE_ENTITY, {"error": str(exc)})
            except ProviderError as exc:
                self._json(HTTPStatus.BAD_GATEWAY, {"error": str(exc)})

    return Handler


class SearchServer(ThreadingHTTPServer):
    daemon_threads = False
    # server_close() joins request threads, so in-flight searches finish
    block_on_close = True


def make_server(service: SearchService, host: str = "127.0.0.1", port: int = 8080) -> SearchServer:
    return SearchServer((host, port), _make_handler(service))
