"""Level-wise query execution in four modes.

All modes walk the query breadth-first and share one resolver model; they
differ only in how the fetch demands of a level reach the data source:

* ``Naive``: one request per demand.
* ``Cache``: one request per demand not already answered within this query.
* ``Batch``: demands of the same fetch kind and arguments are coalesced into
  one request per level, with duplicate keys merged.
* ``BatchCache``: like ``Batch`` after dropping keys answered earlier in the
  query.

Root lookups and 1:N fields always fetch. An N:1 field whose selection only
reads ``id`` and 1:N children of the target is answered from the foreign key
on the parent row in the batching modes; the other modes load the target
row, like a per-field resolver that fetches its object.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any

from .. import gqlcore
from ..gqlcore import Field, QueryDoc, Schema
from .datasource import DataSource, args_key, page

SCALAR_ATTRS = {"emailAddress": "email_address", "ugDegreeYear": "ug_degree_year"}

# (type, field) -> (target type, foreign-key attribute on the parent row)
REFERENCES = {
    ("Department", "subOrganizationOf"): ("University", "university_id"),
    ("ResearchGroup", "subOrganizationOf"): ("Department", "department_nr"),
    ("Faculty", "worksFor"): ("Department", "department_nr"),
    ("Faculty", "undergraduateDegreeFrom"): ("University", "undergraduate_degree_from"),
    ("Faculty", "mastersDegreeFrom"): ("University", "masters_degree_from"),
    ("Faculty", "doctoralDegreeFrom"): ("University", "doctoral_degree_from"),
    ("GraduateStudent", "memberOf"): ("Department", "department_nr"),
    ("GraduateStudent", "undergraduateDegreeFrom"): ("University", "undergraduate_degree_from"),
    ("GraduateStudent", "advisor"): ("Faculty", "advisor_id"),
    ("UndergraduateStudent", "memberOf"): ("Department", "department_nr"),
    ("UndergraduateStudent", "advisor"): ("Faculty", "advisor_id"),
    ("Course", "offeredBy"): ("Department", "department_nr"),
    ("Course", "teacher"): ("Faculty", "teacher_id"),
    ("Publication", "mainAuthor"): ("Faculty", "author_id"),
}

ROOT_LOOKUPS = {"university": "University", "department": "Department", "researchGroup": "ResearchGroup",
                "faculty": "Faculty", "graduateStudent": "GraduateStudent",
                "undergraduateStudent": "UndergraduateStudent", "course": "Course",
                "publication": "Publication"}

AGGREGATES = {("University", "undergraduateDegreeObtainedBystudentAggregate"):
              "University.undergraduateDegreeObtainedBystudent"}


class ExecutionMode(str, enum.Enum):
    NAIVE = "Naive"
    CACHE = "Cache"
    BATCH = "Batch"
    BATCH_CACHE = "BatchCache"

    @property
    def batches(self) -> bool:
        return self in (ExecutionMode.BATCH, ExecutionMode.BATCH_CACHE)

    @property
    def caches(self) -> bool:
        return self in (ExecutionMode.CACHE, ExecutionMode.BATCH_CACHE)

    @classmethod
    def parse(cls, value: "str | ExecutionMode") -> "ExecutionMode":
        if isinstance(value, cls):
            return value
        for m in cls:
            if m.value.lower() == str(value).lower() or m.name.lower() == str(value).lower():
                return m
        raise ValueError(f"unknown execution mode {value!r}; expected one of {[m.value for m in cls]}")


@dataclass
class ExecutionStats:
    # a demand is one load handed to the fetch layer: a single key in the
    # unbatched modes, one coalesced key group per level when batching
    backend_requests: int = 0
    cache_hits: int = 0
    batched_keys: int = 0
    demands: int = 0

    def as_dict(self) -> dict:
        return {"backendRequests": self.backend_requests, "cacheHits": self.cache_hits,
                "batchedKeys": self.batched_keys, "demands": self.demands}


@dataclass
class _Obj:
    out: dict
    type: str
    key: Any
    row: Any
    selections: tuple[Field, ...]


@dataclass
class _Demand:
    kind: str
    target: str
    key: Any
    args: dict
    on_result: Any  # callable(result)
    batchable: bool = True


@dataclass
class _Level:
    demands: list[_Demand] = field(default_factory=list)
    # objects whose own fields get resolved at the next level
    ready: list[_Obj] = field(default_factory=list)


def _attr(field_name: str) -> str:
    return SCALAR_ATTRS.get(field_name, field_name)


def _scalar(obj: _Obj, name: str):
    if name == "id":
        return str(obj.key)
    value = getattr(obj.row, _attr(name))
    return value


class Executor:
    """Executes parsed queries against a :class:`DataSource`."""

    def __init__(self, source: DataSource, mode: ExecutionMode | str = ExecutionMode.NAIVE,
                 schema: Schema | None = None):
        self.source = source
        self.mode = ExecutionMode.parse(mode)
        self.schema = schema or gqlcore.default_schema()

    def execute(self, doc: QueryDoc | str, variables: dict | None = None) -> tuple[dict, ExecutionStats]:
        """Run ``doc`` and return its ``data`` tree with request statistics.

        ``doc`` must already have passed validation.
        """
        if isinstance(doc, str):
            doc = gqlcore.parse(doc)
        values = gqlcore.coerce_variables(doc, variables, self.schema)
        return _Run(self, values).run(doc)


class _Run:
    def __init__(self, executor: Executor, variables: dict):
        self.ex = executor
        self.mode = executor.mode
        self.schema = executor.schema
        self.source = executor.source
        self.variables = variables
        self.stats = ExecutionStats()
        self.memo: dict[tuple, Any] = {}

    # -- fetching -----------------------------------------------------

    def _request(self, kind, target, keys, args):
        self.stats.backend_requests += 1
        self.stats.batched_keys += len(keys)
        return self.source.fetch(kind, target, keys, args)

    def fetch_now(self, kind, target, key, args):
        """Issue a single-key demand immediately (filter follow-ups)."""
        self.stats.demands += 1
        memo_key = (kind, target, key, args_key(args))
        if self.mode.caches and memo_key in self.memo:
            self.stats.cache_hits += 1
            return self.memo[memo_key]
        result = self._request(kind, target, [key], args)[0]
        if self.mode.caches:
            self.memo[memo_key] = result
        return result

    def dispatch(self, demands: list[_Demand]) -> None:
        if not self.mode.batches:
            for d in demands:
                d.on_result(self.fetch_now(d.kind, d.target, d.key, d.args))
            return
        groups: OrderedDict[tuple, list[_Demand]] = OrderedDict()
        for d in demands:
            groups.setdefault((d.kind, d.target, args_key(d.args)), []).append(d)
        for (kind, target, akey), group in groups.items():
            self.stats.demands += 1
            results: dict = {}
            missing: dict = {}
            for d in group:
                memo_key = (kind, target, d.key, akey)
                if d.key in results or d.key in missing:
                    continue
                if self.mode.caches and memo_key in self.memo:
                    results[d.key] = self.memo[memo_key]
                    self.stats.cache_hits += 1
                else:
                    missing[d.key] = None
            if missing:
                fetched = self._request(kind, target, list(missing), group[0].args)
                for k, r in zip(missing, fetched):
                    results[k] = r
                    if self.mode.caches:
                        self.memo[(kind, target, k, akey)] = r
            for d in group:
                d.on_result(results[d.key])

    # -- resolution ---------------------------------------------------

    def needs_row(self, type_name: str, selections) -> bool:
        if not self.mode.batches:
            return True
        for f in selections:
            fdef = self.schema.field(type_name, f.name)
            if self.schema.is_object(fdef.type.name):
                if (type_name, f.name) in REFERENCES:
                    return True
            elif f.name != "id":
                return True
        return False

    def args(self, type_name: str, f: Field) -> dict:
        return gqlcore.field_arguments(f, self.schema.field(type_name, f.name), self.variables, self.schema)

    def run(self, doc: QueryDoc) -> tuple[dict, ExecutionStats]:
        data: dict = {}
        level = _Level()
        for f in doc.selections:
            data[f.name] = None
            self.root_field(f, data, level)
        while level.demands or level.ready:
            self.dispatch(level.demands)
            nxt = _Level()
            for obj in level.ready:
                self.resolve_object(obj, nxt)
            level = nxt
        return data, self.stats

    def _new_obj(self, type_name, key, row, f: Field, out_container, slot, level: _Level) -> None:
        """Place an object for ``f`` at ``out_container[slot]`` and queue it."""
        out: dict = {}
        out_container[slot] = out
        obj = _Obj(out, type_name, key, row, f.selections)
        if row is None and self.needs_row(type_name, f.selections):
            def loaded(r, obj=obj):
                if r is None:
                    out_container[slot] = None
                    return
                obj.row = r
                level_ready.append(obj)
            level_ready = level.ready
            level.demands.append(_Demand("row", type_name, key, {}, loaded))
        else:
            level.ready.append(obj)

    def root_field(self, f: Field, data: dict, level: _Level) -> None:
        args = self.args(self.schema.query_type, f)
        if f.name in ROOT_LOOKUPS:
            type_name = ROOT_LOOKUPS[f.name]
            key = args.get("nr")
            if key is None:
                return

            def loaded(r, f=f, type_name=type_name):
                if r is not None:
                    data[f.name] = {}
                    level.ready.append(_Obj(data[f.name], type_name, r.id, r, f.selections))
            level.demands.append(_Demand("row", type_name, key, {}, loaded))
        elif f.name == "graduateStudents":
            src_args = {k: args[k] for k in ("order", "limit", "offset") if args.get(k) is not None}
            level.demands.append(_Demand("scan", "GraduateStudent", None, src_args,
                                         lambda rows, f=f: self._fill_list(data, f.name, "GraduateStudent",
                                                                           rows, f, level)))
        elif f.name == "publicationSearch":
            search = {k: args[k] for k in ("field", "criterion", "pattern")}
            level.demands.append(_Demand("search", "Publication", None, search,
                                         lambda rows, f=f: self._fill_list(data, f.name, "Publication",
                                                                           rows, f, level)))
        else:
            raise gqlcore.GqlError(f"no resolver for root field {f.name}")

    def _fill_list(self, out: dict, name: str, type_name: str, rows: list, f: Field, level: _Level) -> None:
        items: list = []
        out[name] = items
        for r in rows:
            child: dict = {}
            items.append(child)
            level.ready.append(_Obj(child, type_name, r.id, r, f.selections))

    def resolve_object(self, obj: _Obj, level: _Level) -> None:
        for f in obj.selections:
            obj.out[f.name] = None
        for f in obj.selections:
            fdef = self.schema.field(obj.type, f.name)
            target = fdef.type.name
            if not self.schema.is_object(target):
                obj.out[f.name] = _scalar(obj, f.name)
            elif (obj.type, f.name) in REFERENCES:
                ref_type, fk = REFERENCES[(obj.type, f.name)]
                key = getattr(obj.row, fk)
                if key is not None:
                    self._new_obj(ref_type, key, None, f, obj.out, f.name, level)
            elif (obj.type, f.name) in AGGREGATES:
                self.aggregate(obj, f, level)
            else:
                self.list_field(obj, f, level)

    def _source_args(self, args: dict, filtered: bool) -> dict:
        keep = ("order",) if filtered else ("order", "limit", "offset")
        return {k: args[k] for k in keep if args.get(k) is not None}

    def list_field(self, obj: _Obj, f: Field, level: _Level) -> None:
        args = self.args(obj.type, f)
        where = args.get("where")
        target = f"{obj.type}.{f.name}"
        child_type = self.schema.field(obj.type, f.name).type.name
        out = obj.out

        def loaded(rows, f=f, args=args, where=where):
            if where:
                rows = [r for r in rows if self.passes(child_type, r, where)]
                rows = page(rows, args.get("offset"), args.get("limit"))
            self._fill_list(out, f.name, child_type, rows, f, level)

        level.demands.append(_Demand("list", target, obj.key, self._source_args(args, bool(where)), loaded))

    def aggregate(self, obj: _Obj, f: Field, level: _Level) -> None:
        args = self.args(obj.type, f)
        where = args.get("where")
        target = AGGREGATES[(obj.type, f.name)]
        out = obj.out

        def loaded(rows, f=f, where=where):
            if where:
                rows = [r for r in rows if self.passes("GraduateStudent", r, where)]
            out[f.name] = _aggregate(rows, f)

        level.demands.append(_Demand("list", target, obj.key, {}, loaded))

    # -- filters ------------------------------------------------------

    def passes(self, type_name: str, row, where: dict) -> bool:
        if type_name == "GraduateStudent":
            uni = where.get("memberOfUniversity")
            if uni is not None:
                dept = self.fetch_now("row", "Department", row.department_nr, {})
                if dept is None or dept.university_id != uni:
                    return False
            pub_filter = where.get("advisorPublication")
            if pub_filter:
                pubs = self.fetch_now("list", "Faculty.publications", row.advisor_id, {})
                if not any(_publication_matches(p, pub_filter) for p in pubs):
                    return False
            return True
        if type_name == "Faculty":
            pub_filter = where.get("publication")
            if pub_filter:
                pubs = self.fetch_now("list", "Faculty.publications", row.id, {})
                return any(_publication_matches(p, pub_filter) for p in pubs)
            return True
        raise gqlcore.GqlError(f"no filter support for {type_name}")


def _publication_matches(p, flt: dict) -> bool:
    if flt.get("titleContains") is not None and flt["titleContains"] not in p.title:
        return False
    if flt.get("abstractContains") is not None and flt["abstractContains"] not in p.abstract:
        return False
    if flt.get("dateAfter") is not None and not p.date > flt["dateAfter"]:
        return False
    if flt.get("dateBefore") is not None and not p.date < flt["dateBefore"]:
        return False
    return True


def _aggregate(rows: list, f: Field) -> dict:
    out: dict = {}
    for sub in f.selections:
        if sub.name == "count":
            out["count"] = len(rows)
        elif sub.name == "age":
            ages = [r.age for r in rows]
            stats = {
                "sum": float(sum(ages)) if ages else None,
                "avg": sum(ages) / len(ages) if ages else None,
                "min": float(min(ages)) if ages else None,
                "max": float(max(ages)) if ages else None,
            }
            out["age"] = {s.name: stats[s.name] for s in sub.selections}
    return out
