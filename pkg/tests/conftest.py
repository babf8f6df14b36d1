import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from gqlbench.datagen import emit_metadata, generate

SEED = 42


@pytest.fixture(scope="session")
def ds1():
    return generate(1, SEED)


@pytest.fixture(scope="session")
def meta1(ds1):
    return emit_metadata(ds1)


@pytest.fixture(scope="session")
def ds5():
    return generate(5, SEED)


@pytest.fixture(scope="session")
def meta5(ds5):
    return emit_metadata(ds5)


@pytest.fixture
def acceptance(request):
    """Record the verdict line of one acceptance criterion."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        verdict = "PASS" if passed else "FAIL"
        lines.append((number, f"criterion {number:2d} {verdict}  {title}" + (f"  [{detail}]" if detail else "")))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


def hold_until(t: float) -> None:
    """Wait until ``t`` on the perf counter; sleep alone overshoots by a tick."""
    remaining = t - time.perf_counter()
    if remaining > 0.001:
        time.sleep(remaining - 0.001)
    while time.perf_counter() < t:
        pass


class StubEndpoint:
    """GraphQL-shaped HTTP endpoint answering a fixed time after each request arrives.

    Records the variables of every request in arrival order. A request whose
    variables carry ``"fail": true`` gets an errors envelope.
    """

    def __init__(self, delay_s: float = 0.0):
        self.delay_s = delay_s
        self.received: list[dict] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            disable_nagle_algorithm = True

            def log_message(self, *args):
                pass

            def do_POST(self):
                answer_at = time.perf_counter() + stub.delay_s
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                variables = body.get("variables") or {}
                with stub._lock:
                    stub.received.append(variables)
                if stub.delay_s:
                    hold_until(answer_at)
                payload = {"errors": [{"message": "boom"}]} if variables.get("fail") else {"data": {"ok": 1}}
                raw = json.dumps(payload).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._httpd.daemon_threads = True
        self.url = "http://127.0.0.1:%d/graphql" % self._httpd.server_address[1]
        threading.Thread(target=self._httpd.serve_forever, daemon=True).start()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture
def stub():
    """Factory for stub endpoints, closed after the test."""
    made = []

    def make(delay_s: float = 0.0) -> StubEndpoint:
        s = StubEndpoint(delay_s)
        made.append(s)
        return s

    yield make
    for s in made:
        s.close()
