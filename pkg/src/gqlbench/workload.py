"""Query templates, duplicate-free instantiation and mixed workloads."""

from __future__ import annotations

import datetime as _dt
import json
import math
import zlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import gqlcore
from .datagen import DatasetMetadata

#: Domains up to this size are enumerated and shuffled; larger ones are
#: sampled by rejection.
ENUMERATION_LIMIT = 10**6


class UnknownTemplateError(KeyError):
    pass


class TemplateFormatError(ValueError):
    pass


class EmptyDomainError(ValueError):
    pass


@dataclass(frozen=True)
class PlaceholderSpec:
    """A template variable and the set of values it ranges over.

    Domain spec forms: ``entity:<pool>``, ``enum:<Enum>`` or
    ``enum:<Enum>[a,b]``, ``int:(lo,hi]``, ``words:title|abstract`` and
    ``date:(YYYY-MM-DD,YYYY-MM-DD]``.
    """

    name: str
    domain: str

    @cached_property
    def kind(self) -> str:
        return self.domain.split(":", 1)[0]

    @cached_property
    def arg(self) -> str:
        return self.domain.split(":", 1)[1]

    def _interval(self) -> tuple[str, str]:
        body = self.arg
        if not (body.startswith("(") and body.endswith("]")):
            raise TemplateFormatError(f"placeholder {self.name}: expected half-open interval (lo,hi], got {body}")
        lo, hi = body[1:-1].split(",")
        return lo.strip(), hi.strip()

    def values(self, meta: DatasetMetadata) -> Sequence:
        """The domain as an indexable sequence."""
        if self.kind == "entity":
            return meta.pool(self.arg)
        if self.kind == "enum":
            name, _, subset = self.arg.partition("[")
            members = gqlcore.default_schema().enums[name]
            if subset:
                chosen = [s.strip() for s in subset.rstrip("]").split(",")]
                unknown = set(chosen) - set(members)
                if unknown:
                    raise TemplateFormatError(f"placeholder {self.name}: {sorted(unknown)} not in enum {name}")
                return tuple(m for m in members if m in chosen)
            return members
        if self.kind == "int":
            lo, hi = self._interval()
            return range(int(lo) + 1, int(hi) + 1)
        if self.kind == "words":
            if self.arg == "title":
                return meta.title_words
            if self.arg == "abstract":
                return meta.abstract_words
            raise TemplateFormatError(f"placeholder {self.name}: unknown word pool {self.arg}")
        if self.kind == "date":
            lo, hi = (_dt.date.fromisoformat(x) for x in self._interval())
            return _DateRange(lo.toordinal() + 1, hi.toordinal() + 1)
        raise TemplateFormatError(f"placeholder {self.name}: unknown domain kind {self.kind}")

    def size(self, meta: DatasetMetadata) -> int:
        return len(self.values(meta))


@dataclass(frozen=True)
class _DateRange:
    start: int
    stop: int

    def __len__(self) -> int:
        return max(0, self.stop - self.start)

    def __getitem__(self, i: int) -> str:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return _dt.date.fromordinal(self.start + i).isoformat()

    def __contains__(self, value: str) -> bool:
        return self.start <= _dt.date.fromisoformat(value).toordinal() < self.stop


@dataclass(frozen=True)
class QueryTemplate:
    template_id: str
    text: str
    placeholders: tuple[PlaceholderSpec, ...]
    choke_points: frozenset[str]
    distinct: tuple[tuple[str, ...], ...] = ()

    @cached_property
    def doc(self) -> gqlcore.QueryDoc:
        return gqlcore.parse(self.text)

    def placeholder(self, name: str) -> PlaceholderSpec:
        for p in self.placeholders:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class QueryInstance:
    instance_id: str
    template_id: str
    query: str
    variables: dict = field(hash=False, compare=True)

    @property
    def substitutions(self) -> dict:
        return self.variables

    def payload(self) -> dict:
        return {"query": self.query, "variables": self.variables}


def parse_template(text: str) -> QueryTemplate:
    head, sep, query = text.partition("\n---\n")
    if not sep:
        raise TemplateFormatError("template lacks the '---' separator")
    template_id = None
    chokepoints: frozenset[str] = frozenset()
    placeholders = []
    distinct = []
    for line in head.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        if key == "id":
            template_id = value
        elif key == "chokepoints":
            chokepoints = frozenset(v.strip() for v in value.split(",") if v.strip())
        elif key == "placeholder":
            name, _, domain = value.partition(":")
            placeholders.append(PlaceholderSpec(name.strip(), domain.strip()))
        elif key == "distinct":
            distinct.append(tuple(v.strip() for v in value.split(",")))
        else:
            raise TemplateFormatError(f"unknown template header key {key!r}")
    if not template_id:
        raise TemplateFormatError("template lacks an id line")
    names = [p.name for p in placeholders]
    for group in distinct:
        missing = set(group) - set(names)
        if missing:
            raise TemplateFormatError(f"{template_id}: distinct names unknown placeholders {sorted(missing)}")
        domains = {next(p.domain for p in placeholders if p.name == n) for n in group}
        if len(domains) != 1:
            raise TemplateFormatError(f"{template_id}: distinct placeholders must share a domain")
    return QueryTemplate(template_id, query.strip() + "\n", tuple(placeholders), chokepoints, tuple(distinct))


def _template_key(template_id: str) -> tuple:
    digits = "".join(ch for ch in template_id if ch.isdigit())
    return (int(digits) if digits else 0, template_id)


@lru_cache(maxsize=1)
def _registry() -> dict[str, QueryTemplate]:
    out = {}
    for entry in resources.files("gqlbench").joinpath("templates").iterdir():
        if entry.name.endswith(".tmpl"):
            t = parse_template(entry.read_text(encoding="utf-8"))
            out[t.template_id] = t
    return dict(sorted(out.items(), key=lambda kv: _template_key(kv[0])))


def templates() -> list[QueryTemplate]:
    """All shipped templates, QT1 to QT16."""
    return list(_registry().values())


def get_template(template: str | QueryTemplate) -> QueryTemplate:
    if isinstance(template, QueryTemplate):
        return template
    try:
        return _registry()[template]
    except KeyError:
        raise UnknownTemplateError(f"unknown template {template!r}") from None


# --------------------------------------------------------------------------
# counting and decoding
# --------------------------------------------------------------------------


def _slots(t: QueryTemplate) -> list[tuple[str, ...]]:
    """Placeholders grouped into independent slots, in declaration order."""
    grouped = {n: g for g in t.distinct for n in g}
    out, done = [], set()
    for p in t.placeholders:
        if p.name in done:
            continue
        group = grouped.get(p.name, (p.name,))
        out.append(group)
        done.update(group)
    return out


def _falling(n: int, k: int) -> int:
    return math.perm(n, k) if n >= k else 0


def count_instances(template: str | QueryTemplate, meta: DatasetMetadata) -> int:
    """Number of distinct instances of ``template`` over ``meta``."""
    t = get_template(template)
    total = 1
    for group in _slots(t):
        total *= _falling(t.placeholder(group[0]).size(meta), len(group))
    return total


def _decode(t: QueryTemplate, meta: DatasetMetadata, index: int, domains: dict) -> dict:
    values = {}
    for group in reversed(_slots(t)):
        dom = domains[group[0]]
        n = len(dom)
        k = len(group)
        radix = _falling(n, k)
        index, local = divmod(index, radix)
        # Lehmer code for an ordered selection of k distinct items
        remaining = list(range(n)) if k > 1 else None
        for j, name in enumerate(group):
            if k == 1:
                values[name] = dom[local]
                break
            base = _falling(n - j - 1, k - j - 1)
            pos, local = divmod(local, base)
            values[name] = dom[remaining.pop(pos)]
    return {p.name: _plain(values[p.name]) for p in t.placeholders}


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def _rng(template_id: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & ((1 << 64) - 1), zlib.crc32(template_id.encode())])


def instantiate(template: str | QueryTemplate, meta: DatasetMetadata, n: int, seed: int = 0) -> list[QueryInstance]:
    """Draw ``min(n, count_instances)`` distinct instances uniformly at random."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = get_template(template)
    domains = {p.name: p.values(meta) for p in t.placeholders}
    for name, dom in domains.items():
        if len(dom) == 0:
            raise EmptyDomainError(f"{t.template_id}: placeholder {name} has an empty domain")
    total = count_instances(t, meta)
    take = min(n, total)
    rng = _rng(t.template_id, seed)
    if total <= ENUMERATION_LIMIT:
        indices = rng.permutation(total)[:take].tolist()
    else:
        seen: dict[int, None] = {}
        while len(seen) < take:
            for i in rng.integers(0, total, size=take - len(seen)).tolist():
                seen.setdefault(i)
                if len(seen) == take:
                    break
        indices = list(seen)
    width = max(4, len(str(take)))
    return [
        QueryInstance(f"{t.template_id}-{k + 1:0{width}d}", t.template_id, t.text, _decode(t, meta, i, domains))
        for k, i in enumerate(indices)
    ]


def compose_mixed(template_list: Iterable[str | QueryTemplate], per_template: int, meta: DatasetMetadata,
                  seed: int = 0, instance_seed: int = 0) -> list[QueryInstance]:
    """Instances of every template, shuffled into one sequence.

    ``instance_seed`` fixes which instances are drawn, ``seed`` only their
    order.
    """
    if per_template < 1:
        raise ValueError("per_template must be >= 1")
    pool: list[QueryInstance] = []
    for t in template_list:
        pool.extend(instantiate(t, meta, per_template, instance_seed))
    order = np.random.default_rng([int(seed) & ((1 << 64) - 1), 0x6D6978]).permutation(len(pool))
    return [pool[i] for i in order.tolist()]


# --------------------------------------------------------------------------
# workload files
# --------------------------------------------------------------------------


def _one_line(query: str) -> str:
    return gqlcore.print_query(gqlcore.parse(query), compact=True)


def write_workload(instances: Iterable[QueryInstance], path: str | Path) -> int:
    n = 0
    compact: dict[str, str] = {}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in instances:
            text = compact.get(q.query)
            if text is None:
                text = compact[q.query] = _one_line(q.query)
            fh.write(f"{q.instance_id}\t{q.template_id}\t{text}\t{json.dumps(q.variables, sort_keys=True)}\n")
            n += 1
    return n


def read_workload(path: str | Path) -> list[QueryInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            out.append(QueryInstance(parts[0], parts[1], parts[2], json.loads(parts[3])))
    return out
