"""HTTP endpoint of the reference server (stdlib ``http.server``)."""

from __future__ import annotations

import json
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .. import gqlcore
from ..datagen import generate, read_metadata
from ..model import Dataset
from .datasource import DataSource, DataSourceConfig
from .executor import ExecutionMode, ExecutionStats, Executor

RECENT_STATS = 1000


class QueryService:
    """Parses, validates and executes wire requests; keeps cumulative stats."""

    def __init__(self, dataset: Dataset, mode: ExecutionMode | str = ExecutionMode.NAIVE,
                 config: DataSourceConfig | None = None):
        self.config = config or DataSourceConfig()
        self.source = DataSource(dataset, self.config)
        self.executor = Executor(self.source, mode)
        self.mode = self.executor.mode
        self.schema = self.executor.schema
        self._lock = threading.Lock()
        self._recent: deque = deque(maxlen=RECENT_STATS)
        self._totals = ExecutionStats()
        self._queries = 0
        self._errors = 0

    def handle(self, query: str, variables: dict | None, operation_name: str | None = None) -> dict:
        """Run one request and return the response envelope."""
        try:
            doc = gqlcore.parse(query)
            problems = gqlcore.validate(doc, self.schema)
            if problems:
                return self._failed([p.message for p in problems])
            if operation_name and doc.operation_name and operation_name != doc.operation_name:
                return self._failed([f"unknown operation {operation_name!r}"])
            data, stats = self.executor.execute(doc, variables)
        except gqlcore.GqlError as exc:
            return self._failed([str(exc)])
        with self._lock:
            self._queries += 1
            for name in ("backend_requests", "cache_hits", "batched_keys", "demands"):
                setattr(self._totals, name, getattr(self._totals, name) + getattr(stats, name))
            self._recent.append(stats.as_dict())
        return {"data": data}

    def _failed(self, messages: list[str]) -> dict:
        with self._lock:
            self._errors += 1
        return {"errors": [{"message": m} for m in messages]}

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "mode": self.mode.value,
                "poolSize": self.config.pool_size,
                "latencyMs": self.config.latency_ms,
                "totalQueries": self._queries,
                "totalErrors": self._errors,
                "totalBackendRequests": self._totals.backend_requests,
                "totalCacheHits": self._totals.cache_hits,
                "totalBatchedKeys": self._totals.batched_keys,
                "totalDemands": self._totals.demands,
                "sourceRequests": self.source.total_requests,
                "maxInFlight": self.source.max_in_flight,
                "recent": list(self._recent),
            }

    def reset(self) -> None:
        with self._lock:
            self._totals = ExecutionStats()
            self._queries = 0
            self._errors = 0
            self._recent.clear()
            self.source.reset()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    server: "_Server"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def do_GET(self):
        if self.path.rstrip("/") == "/stats":
            self._send(200, self.server.service.snapshot())
        else:
            self._send(404, {"errors": [{"message": f"no such path {self.path}"}]})

    def do_POST(self):
        path = self.path.split("?", 1)[0].rstrip("/")
        raw = self._body()
        if path == "/stats/reset":
            self.server.service.reset()
            self._send(200, self.server.service.snapshot())
            return
        if path != "/graphql":
            self._send(404, {"errors": [{"message": f"no such path {self.path}"}]})
            return
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send(400, {"errors": [{"message": f"malformed JSON body: {exc}"}]})
            return
        if not isinstance(body, dict) or not isinstance(body.get("query"), str):
            self._send(400, {"errors": [{"message": "body must be an object with a string 'query'"}]})
            return
        variables = body.get("variables") or {}
        if not isinstance(variables, dict):
            self._send(400, {"errors": [{"message": "'variables' must be an object"}]})
            return
        self._send(200, self.server.service.handle(body["query"], variables, body.get("operationName")))


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128
    allow_reuse_address = True

    def __init__(self, address, service: QueryService):
        super().__init__(address, _Handler)
        self.service = service


class RefServer:
    """Reference GraphQL server running in a background thread."""

    def __init__(self, dataset: Dataset, mode: ExecutionMode | str = ExecutionMode.NAIVE,
                 config: DataSourceConfig | None = None, host: str = "127.0.0.1", port: int = 0):
        self.service = QueryService(dataset, mode, config)
        self._httpd = _Server((host, port), self.service)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}/graphql"

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "RefServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="refserver", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "RefServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def load_dataset(path: str | Path | None = None, sf: int | None = None, seed: int = 0) -> Dataset:
    """Dataset from a generated directory (via its metadata header) or (sf, seed).

    Generation is deterministic, so regenerating from the recorded scale
    factor and seed reproduces the dumped dataset exactly.
    """
    if path is not None:
        p = Path(path)
        meta_file = p / "metadata.txt" if p.is_dir() else p
        if not meta_file.exists():
            raise FileNotFoundError(f"no dataset metadata at {meta_file}")
        meta = read_metadata(meta_file)
        return generate(meta.scale_factor, meta.seed)
    if sf is None:
        raise ValueError("either a dataset path or a scale factor is required")
    return generate(sf, seed)
