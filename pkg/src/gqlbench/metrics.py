"""Benchmark metrics computed from measurement records and run counts.

``aQETq``/``aQRTq`` are per-query means over repeated executions, ``QETt``
is the per-template QET distribution, and ``aTPt``/``aTPw``/``aTPm`` are
mean run throughputs (completed queries per run) for single-template,
repeated mixed, and distinct mixed workloads.
"""

from __future__ import annotations

import csv
import json
import statistics
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

QUERY_METRICS = ("aQETq", "aQRTq")
THROUGHPUT_METRICS = ("aTPt", "aTPw", "aTPm")
METRIC_KINDS = QUERY_METRICS + ("QETt",) + THROUGHPUT_METRICS
QUANTILES = (0, 25, 50, 75, 100)

RECORD_FIELDS = ("instance_id", "template_id", "client_id", "qet_ms", "qrt_ms", "error_code")


@dataclass
class MeasurementRecord:
    instance_id: str
    template_id: str
    client_id: int
    qet_ms: float
    qrt_ms: float
    error_code: int = 0

    @property
    def ok(self) -> bool:
        return self.error_code == 0

    def row(self) -> list:
        return [self.instance_id, self.template_id, self.client_id,
                f"{self.qet_ms:.3f}", f"{self.qrt_ms:.3f}", self.error_code]


@dataclass
class MetricReport:
    kind: str
    group: str
    value: float
    stddev: float | None
    n: int
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (0 for one value)."""
    if not values:
        raise ValueError("no values")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def throughput_report(kind: str, run_counts: Sequence[int], group: str = "all",
                      duration_s: float | None = None) -> MetricReport:
    if kind not in THROUGHPUT_METRICS:
        raise ValueError(f"not a throughput metric: {kind}")
    mean, std = mean_std([float(c) for c in run_counts])
    extra: dict = {"runCounts": list(run_counts)}
    if duration_s:
        extra["perSecond"] = mean / duration_s
    return MetricReport(kind, group, mean, std, len(run_counts), extra)


def _grouped(records: Iterable[MeasurementRecord], key) -> dict[str, list[MeasurementRecord]]:
    out: dict[str, list[MeasurementRecord]] = {}
    for r in records:
        if r.ok:
            out.setdefault(key(r), []).append(r)
    return out


def compute_metrics(records: Sequence[MeasurementRecord], grouping: str = "query",
                    warn=None) -> list[MetricReport]:
    """Per-query (``aQETq``/``aQRTq``) or per-template (``QETt``) reports.

    Only successful records contribute. Groups without successes are left
    out and reported through ``warn``.
    """
    warn = warn or (lambda msg: print(msg, file=sys.stderr))
    reports: list[MetricReport] = []
    if grouping == "query":
        groups = _grouped(records, lambda r: r.instance_id)
        for gid in sorted({r.instance_id for r in records} - set(groups)):
            warn(f"no successful executions of query {gid}; report omitted")
        for gid, rs in groups.items():
            for kind, attr in (("aQETq", "qet_ms"), ("aQRTq", "qrt_ms")):
                mean, std = mean_std([getattr(r, attr) for r in rs])
                reports.append(MetricReport(kind, gid, mean, std, len(rs), {"template": rs[0].template_id}))
    elif grouping == "template":
        groups = _grouped(records, lambda r: r.template_id)
        for gid in sorted({r.template_id for r in records} - set(groups)):
            warn(f"no successful executions of template {gid}; report omitted")
        for gid, rs in groups.items():
            values = [r.qet_ms for r in rs]
            qs = np.percentile(values, QUANTILES).tolist()
            mean, std = mean_std(values)
            extra = {f"p{q}": v for q, v in zip(QUANTILES, qs)}
            extra["values"] = values
            reports.append(MetricReport("QETt", gid, qs[2], std, len(values), extra | {"mean": mean}))
    else:
        raise ValueError(f"unknown grouping {grouping!r}; expected 'query' or 'template'")
    return reports


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------


def write_records(records: Iterable[MeasurementRecord], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow(r.row())
            n += 1
    return n


def read_records(path: str | Path) -> list[MeasurementRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [MeasurementRecord(row["instance_id"], row["template_id"], int(row["client_id"]),
                                  float(row["qet_ms"]), float(row["qrt_ms"]), int(row["error_code"]))
                for row in reader]


def write_summary(path: str | Path, counts: dict[str, tuple[int, int]], meta: dict) -> None:
    """Per-template success/failure counts with ``# key=value`` run metadata."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("template_id", "succeeded", "failed"))
        for tid in sorted(counts):
            w.writerow((tid, *counts[tid]))


def read_summary(path: str | Path) -> tuple[dict[str, tuple[int, int]], dict]:
    meta: dict = {}
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition("=")
                meta[k] = v
            else:
                lines.append(line)
    counts = {row["template_id"]: (int(row["succeeded"]), int(row["failed"]))
              for row in csv.DictReader(lines)}
    return counts, meta


def write_reports(reports: Iterable[MetricReport], path: str | Path) -> None:
    Path(path).write_text(json.dumps([r.as_dict() for r in reports], indent=2) + "\n", encoding="utf-8")


def read_reports(path: str | Path) -> list[MetricReport]:
    return [MetricReport(**d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]
