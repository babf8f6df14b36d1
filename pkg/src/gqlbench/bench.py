"""Throughput and latency drivers for any GraphQL HTTP endpoint."""

from __future__ import annotations

import http.client
import itertools
import json
import socket
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import urlsplit

from .metrics import (
    MeasurementRecord,
    MetricReport,
    throughput_report,
    write_records,
    write_reports,
    write_summary,
)
from .workload import QueryInstance

OK, TRANSPORT_ERROR, TIMEOUT, GRAPHQL_ERROR = 0, 1, 2, 3
DEFAULT_TIMEOUT_S = 30.0


class EndpointUnreachable(RuntimeError):
    pass


@dataclass(frozen=True)
class Endpoint:
    host: str
    port: int
    path: str

    @classmethod
    def parse(cls, url: str) -> "Endpoint":
        parts = urlsplit(url)
        if parts.scheme != "http" or not parts.hostname:
            raise ValueError(f"expected an http:// endpoint URL, got {url!r}")
        return cls(parts.hostname, parts.port or 80, parts.path or "/")


def preflight(url: str, timeout: float = 5.0) -> Endpoint:
    """Fail fast with a diagnostic if nothing listens at ``url``."""
    ep = Endpoint.parse(url)
    try:
        with socket.create_connection((ep.host, ep.port), timeout=timeout):
            pass
    except OSError as exc:
        raise EndpointUnreachable(f"cannot connect to {url}: {exc}") from None
    return ep


class Client:
    """One persistent HTTP connection issuing queries sequentially."""

    def __init__(self, endpoint: Endpoint, client_id: int = 0, timeout: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint
        self.client_id = client_id
        self.timeout = timeout
        self._conn: http.client.HTTPConnection | None = None

    def _connection(self) -> http.client.HTTPConnection:
        if self._conn is None:
            conn = http.client.HTTPConnection(self.endpoint.host, self.endpoint.port, timeout=self.timeout)
            conn.connect()
            conn.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._conn = conn
        return self._conn

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def send(self, q: QueryInstance) -> MeasurementRecord:
        body = json.dumps(q.payload()).encode("utf-8")
        headers = {"Content-Type": "application/json", "Content-Length": str(len(body))}
        start = time.perf_counter()
        qrt = None
        try:
            conn = self._connection()
            conn.request("POST", self.endpoint.path, body, headers)
            resp = conn.getresponse()
            qrt = time.perf_counter()
            raw = resp.read()
            end = time.perf_counter()
            code = OK
            if resp.status != 200:
                code = GRAPHQL_ERROR if resp.status < 500 else TRANSPORT_ERROR
            else:
                try:
                    if json.loads(raw).get("errors"):
                        code = GRAPHQL_ERROR
                except (ValueError, AttributeError):
                    code = TRANSPORT_ERROR
        except socket.timeout:
            end = time.perf_counter()
            code = TIMEOUT
            self.close()
        except (OSError, http.client.HTTPException):
            end = time.perf_counter()
            code = TRANSPORT_ERROR
            self.close()
        qet_ms = (end - start) * 1000.0
        qrt_ms = (qrt - start) * 1000.0 if qrt is not None else qet_ms
        return MeasurementRecord(q.instance_id, q.template_id, self.client_id, qet_ms, qrt_ms, code)


# --------------------------------------------------------------------------
# throughput
# --------------------------------------------------------------------------


@dataclass
class ThroughputRun:
    index: int
    warmup: bool
    duration_s: float
    clients: int
    records: list[MeasurementRecord] = field(default_factory=list)
    abandoned: int = 0

    @property
    def completed(self) -> int:
        return sum(1 for r in self.records if r.ok)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.records if not r.ok)

    def per_template(self) -> dict[str, tuple[int, int]]:
        ok = Counter(r.template_id for r in self.records if r.ok)
        bad = Counter(r.template_id for r in self.records if not r.ok)
        return {t: (ok[t], bad[t]) for t in set(ok) | set(bad)}


@dataclass
class ThroughputResult:
    runs: list[ThroughputRun]
    report: MetricReport

    @property
    def measured(self) -> list[ThroughputRun]:
        return [r for r in self.runs if not r.warmup]


def partition(workload: Sequence[QueryInstance], clients: int) -> list[list[QueryInstance]]:
    """Round-robin split: client i gets queries i, i+k, i+2k, ..."""
    return [list(workload[i::clients]) for i in range(clients)]


def _client_loop(client: Client, sequence: list[QueryInstance], deadline: float,
                 results: list, stop: threading.Event) -> None:
    # records stay thread-local until the run ends so collecting them never
    # competes with the clients for the CPU
    try:
        for q in itertools.cycle(sequence):
            if stop.is_set() or time.perf_counter() >= deadline:
                break
            rec = client.send(q)
            # a result that arrives after the deadline is abandoned
            results.append(rec if time.perf_counter() <= deadline else None)
    finally:
        client.close()


def throughput_run(endpoint: str | Endpoint, workload: Sequence[QueryInstance], clients: int = 1,
                   duration_s: float = 60.0, index: int = 0, warmup: bool = False,
                   timeout: float = DEFAULT_TIMEOUT_S) -> ThroughputRun:
    """One timed run: ``clients`` threads cycle through their share until the deadline."""
    if clients < 1:
        raise ValueError("clients must be >= 1")
    if not workload:
        raise ValueError("workload is empty")
    ep = endpoint if isinstance(endpoint, Endpoint) else Endpoint.parse(endpoint)
    shares = [s for s in partition(workload, clients) if s]
    stop = threading.Event()
    run = ThroughputRun(index, warmup, duration_s, clients)
    deadline = time.perf_counter() + duration_s
    results: list[list] = [[] for _ in shares]
    threads = [threading.Thread(target=_client_loop, args=(Client(ep, i, timeout), share, deadline, results[i], stop),
                                name=f"bench-client-{i}", daemon=True)
               for i, share in enumerate(shares)]
    for t in threads:
        t.start()
    grace = deadline + timeout + 1.0
    for t in threads:
        t.join(max(0.0, grace - time.perf_counter()))
    stop.set()
    for t, got in zip(threads, results):
        # a client still blocked past the grace period loses its in-flight query
        run.abandoned += t.is_alive()
        for item in list(got):
            if item is None:
                run.abandoned += 1
            else:
                run.records.append(item)
    return run


def run_throughput(endpoint: str, workload: Sequence[QueryInstance], clients: int = 1,
                   duration_s: float = 60.0, runs: int = 6, warmup_runs: int = 1,
                   kind: str = "aTPt", group: str = "all", timeout: float = DEFAULT_TIMEOUT_S,
                   output_dir: str | Path | None = None,
                   on_run: Callable[[ThroughputRun], None] | None = None) -> ThroughputResult:
    """Repeated runs of one workload; the first ``warmup_runs`` are not averaged."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not 0 <= warmup_runs < runs:
        raise ValueError("warmup_runs must be in [0, runs)")
    ep = preflight(endpoint)
    done = []
    for i in range(runs):
        run = throughput_run(ep, workload, clients, duration_s, i, i < warmup_runs, timeout)
        done.append(run)
        if output_dir is not None:
            _write_run(Path(output_dir), run, endpoint, group)
        if on_run:
            on_run(run)
    report = throughput_report(kind, [r.completed for r in done if not r.warmup], group, duration_s)
    result = ThroughputResult(done, report)
    if output_dir is not None:
        write_reports([report], Path(output_dir) / f"metrics-{group}.json")
    return result


def run_distinct_workloads(endpoint: str, workloads: Sequence[Sequence[QueryInstance]], clients: int = 1,
                           duration_s: float = 60.0, timeout: float = DEFAULT_TIMEOUT_S,
                           output_dir: str | Path | None = None) -> ThroughputResult:
    """Run each mixed workload once and average their throughputs (aTPm)."""
    ep = preflight(endpoint)
    done = []
    for i, wl in enumerate(workloads):
        run = throughput_run(ep, wl, clients, duration_s, i, False, timeout)
        done.append(run)
        if output_dir is not None:
            _write_run(Path(output_dir), run, endpoint, "mixed")
    report = throughput_report("aTPm", [r.completed for r in done], "mixed", duration_s)
    if output_dir is not None:
        write_reports([report], Path(output_dir) / "metrics-mixed.json")
    return ThroughputResult(done, report)


def _write_run(out: Path, run: ThroughputRun, endpoint: str, group: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{group}-run{run.index + 1}"
    write_records(run.records, out / f"records-{stem}.csv")
    write_summary(out / f"summary-{stem}.csv", run.per_template(), {
        "run": run.index + 1, "warmup": str(run.warmup).lower(), "duration_s": run.duration_s,
        "clients": run.clients, "endpoint": endpoint, "completed": run.completed,
        "failed": run.failed, "abandoned": run.abandoned,
    })


# --------------------------------------------------------------------------
# latency
# --------------------------------------------------------------------------


def round_robin(groups: Sequence[Sequence[QueryInstance]]) -> list[QueryInstance]:
    """First instance of every template, then the second of every template, ..."""
    out = []
    for i in range(max((len(g) for g in groups), default=0)):
        for g in groups:
            if i < len(g):
                out.append(g[i])
    return out


def run_latency(endpoint: str, groups: Sequence[Sequence[QueryInstance]], inter_query_wait_ms: float = 1000.0,
                repetitions: int = 1, timeout: float = DEFAULT_TIMEOUT_S,
                output_dir: str | Path | None = None) -> list[MeasurementRecord]:
    """Issue instances round-robin across templates, pausing after each response."""
    if not groups or any(len(g) == 0 for g in groups):
        raise ValueError("every selected template needs at least one instance")
    ep = preflight(endpoint)
    client = Client(ep, 0, timeout)
    order = round_robin(groups)
    records = []
    try:
        for _ in range(repetitions):
            for q in order:
                records.append(client.send(q))
                if inter_query_wait_ms > 0:
                    time.sleep(inter_query_wait_ms / 1000.0)
    finally:
        client.close()
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / "records-latency.csv")
    return records
