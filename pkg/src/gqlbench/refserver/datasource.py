"""Simulated backend store: indexed in-memory tables behind a bounded pool.

Every call to :meth:`DataSource.fetch` is one backend request. It holds a
pool slot for its whole duration and a database-worker slot while the
simulated latency elapses, so the number of concurrent requests never
exceeds the pool size and the backend serves at most ``db_workers``
requests at a time.
"""

from __future__ import annotations

import json
import threading
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Sequence

from ..model import Dataset

GRADUATE_STUDENT_ATTRS = {
    "id": "id", "emailAddress": "email_address", "telephone": "telephone",
    "age": "age", "ugDegreeYear": "ug_degree_year", "name": "name",
}
PUBLICATION_ATTRS = {"id": "id", "title": "title", "abstract": "abstract", "date": "date"}


@dataclass(frozen=True)
class DataSourceConfig:
    latency_ms: float = 1.0
    pool_size: int = 10
    # concurrent requests the backend itself can work on
    db_workers: int = 2

    def __post_init__(self):
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.db_workers < 1:
            raise ValueError("db_workers must be >= 1")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")


def args_key(args: dict | None) -> str:
    """Canonical, hashable form of fetch arguments."""
    return json.dumps(args or {}, sort_keys=True, separators=(",", ":"))


def sort_rows(rows: list, order: Sequence[dict] | dict | None, attrs: dict[str, str]) -> list:
    """Sort by the order spec; ties always break by ascending id."""
    out = sorted(rows, key=lambda r: r.id)
    if not order:
        return out
    if isinstance(order, dict):
        order = [order]
    for spec in reversed(order):
        attr = attrs[spec.get("field") or "id"]
        out.sort(key=lambda r: getattr(r, attr), reverse=(spec.get("direction") or "ASC") == "DESC")
    return out


def page(rows: list, offset: int | None, limit: int | None) -> list:
    start = max(0, offset or 0)
    return rows[start:] if limit is None else rows[start:start + max(0, limit)]


def _matches(text: str, criterion: str, pattern: str) -> bool:
    if criterion == "CONTAINS":
        return pattern in text
    if criterion == "START_WITH":
        return text.startswith(pattern)
    if criterion == "END_WITH":
        return text.endswith(pattern)
    if criterion == "EQUALS":
        return text == pattern
    raise ValueError(f"unknown string criterion {criterion}")


class DataSource:
    """Read-only store over a :class:`Dataset` with request accounting."""

    def __init__(self, dataset: Dataset, config: DataSourceConfig | None = None):
        self.dataset = dataset
        self.config = config or DataSourceConfig()
        self._pool = threading.BoundedSemaphore(self.config.pool_size)
        self._workers = threading.BoundedSemaphore(self.config.db_workers)
        self._lock = threading.Lock()
        self.total_requests = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self._build_indexes(dataset)

    def _build_indexes(self, ds: Dataset) -> None:
        self.rows = {kind: {r.id: r for r in rows} for kind, rows in (
            ("University", ds.universities), ("Department", ds.departments),
            ("ResearchGroup", ds.research_groups), ("Faculty", ds.faculty),
            ("Course", ds.courses), ("GraduateStudent", ds.graduate_students),
            ("UndergraduateStudent", ds.undergraduate_students), ("Publication", ds.publications))}

        def group(rows, attr):
            out = defaultdict(list)
            for r in rows:
                key = getattr(r, attr)
                if key is not None:
                    out[key].append(r)
            return out

        courses = self.rows["Course"]
        self.children = {
            "University.departments": group(ds.departments, "university_id"),
            "University.undergraduateDegreeObtainedByFaculty": group(ds.faculty, "undergraduate_degree_from"),
            "University.mastersDegreeObtainers": group(ds.faculty, "masters_degree_from"),
            "University.doctoralDegreeObtainers": group(ds.faculty, "doctoral_degree_from"),
            "University.undergraduateDegreeObtainedBystudent": group(ds.graduate_students, "undergraduate_degree_from"),
            "Department.faculty": group(ds.faculty, "department_nr"),
            "Department.graduateStudents": group(ds.graduate_students, "department_nr"),
            "Department.undergraduateStudents": group(ds.undergraduate_students, "department_nr"),
            "Department.researchGroups": group(ds.research_groups, "department_nr"),
            "Department.courses": group(ds.courses, "department_nr"),
            "Faculty.publications": group(ds.publications, "author_id"),
            "Faculty.courses": group(ds.courses, "teacher_id"),
            "GraduateStudent.takeCourses": {s.id: [courses[c] for c in s.courses] for s in ds.graduate_students},
            "UndergraduateStudent.takeCourses": {
                s.id: [courses[c] for c in s.courses] for s in ds.undergraduate_students},
        }
        self.graduate_students = sorted(ds.graduate_students, key=lambda r: r.id)
        self.publications = sorted(ds.publications, key=lambda r: r.id)

    # ------------------------------------------------------------------

    def fetch(self, kind: str, target: str, keys: Sequence, args: dict | None = None) -> list:
        """One backend request resolving every key in ``keys``.

        ``kind`` is ``row`` (entity by id), ``list`` (1:N children of the
        parents in ``keys``, ``target`` naming ``Type.field``), ``search``
        (publication text search) or ``scan`` (all graduate students).
        """
        with self._pool:
            with self._lock:
                self.total_requests += 1
                self.in_flight += 1
                if self.in_flight > self.max_in_flight:
                    self.max_in_flight = self.in_flight
            try:
                with self._workers:
                    if self.config.latency_ms > 0:
                        time.sleep(self.config.latency_ms / 1000.0)
                    return [self._resolve(kind, target, k, args or {}) for k in keys]
            finally:
                with self._lock:
                    self.in_flight -= 1

    def _resolve(self, kind: str, target: str, key, args: dict) -> Any:
        if kind == "row":
            return self.rows[target].get(key)
        if kind == "list":
            rows = self.children[target].get(key, [])
            attrs = PUBLICATION_ATTRS if target == "Faculty.publications" else GRADUATE_STUDENT_ATTRS
            rows = sort_rows(rows, args.get("order"), attrs)
            if "limit" in args or "offset" in args:
                rows = page(rows, args.get("offset"), args.get("limit"))
            return rows
        if kind == "search":
            attr = PUBLICATION_ATTRS[args["field"]]
            return [p for p in self.publications
                    if _matches(getattr(p, attr), args["criterion"], args["pattern"])]
        if kind == "scan":
            rows = sort_rows(self.graduate_students, args.get("order"), GRADUATE_STUDENT_ATTRS)
            return page(rows, args.get("offset"), args.get("limit"))
        raise ValueError(f"unknown fetch kind {kind}")

    def reset(self) -> None:
        with self._lock:
            self.total_requests = 0
            self.max_in_flight = self.in_flight
