"""Deterministic, monotonic generator for university datasets.

Every generated university draws from its own random stream keyed by
``(seed, university index)``, and entity ids are assigned densely in
generation order. Generating at a larger scale factor therefore reproduces
the smaller dataset verbatim and appends to it.

Degree-granting universities are assigned from "decks": for the n-th holder
of a degree kind, the deck for round ``n // 1000`` is a seeded permutation of
the 1000 referenced universities and the holder takes position ``n % 1000``.
Each pick is uniform over the pool, and no university receives more than
``ceil(holders / 1000)`` holders of one degree kind.
"""

from __future__ import annotations

import datetime as _dt
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .model import (
    REFERENCED_UNIVERSITIES,
    Course,
    Dataset,
    Department,
    FacultyMember,
    GraduateStudent,
    Publication,
    ResearchGroup,
    ScaleFactor,
    UndergraduateStudent,
    University,
    primary_key,
)
from .words import WORDS

_WORDS_ARR = np.array(WORDS, dtype=object)
_MASK64 = (1 << 64) - 1

# faculty per department by rank, and publications per faculty member by rank
_RANK_COUNTS = {
    "FullProfessor": (7, 10),
    "AssociateProfessor": (10, 14),
    "AssistantProfessor": (8, 11),
    "Lecturer": (5, 7),
}
_PUBLICATIONS_BY_RANK = {
    "FullProfessor": (15, 20),
    "AssociateProfessor": (10, 18),
    "AssistantProfessor": (5, 10),
    "Lecturer": (0, 5),
}
RESEARCH_GROUPS_PER_DEPARTMENT = (10, 20)
COURSES_TAKEN_PER_STUDENT = (2, 4)
TITLE_WORDS = (3, 10)
ABSTRACT_WORDS = (50, 150)
UNDERGRAD_ADVISOR_PROBABILITY = 0.2
PUBLICATION_DATES = (_dt.date(2000, 1, 1), _dt.date(2020, 12, 31))

_STREAM_UNIVERSITY = 1
_DECK_CODES = {"grad_ug": 11, "faculty_ug": 12, "faculty_ms": 13, "faculty_phd": 14}


def _as_seed(seed: int) -> int:
    return int(seed) & _MASK64


class _Deck:
    """Assigns degree-granting universities to the n-th degree holder."""

    def __init__(self, seed: int, code: int, pool: int = REFERENCED_UNIVERSITIES):
        self.seed = seed
        self.code = code
        self.pool = pool
        self._rounds: dict[int, np.ndarray] = {}

    def _round(self, r: int) -> np.ndarray:
        perm = self._rounds.get(r)
        if perm is None:
            perm = np.random.default_rng([self.seed, self.code, r]).permutation(self.pool)
            self._rounds[r] = perm
        return perm

    def take(self, start: int, n: int) -> list[int]:
        out = []
        for i in range(start, start + n):
            r, pos = divmod(i, self.pool)
            out.append(int(self._round(r)[pos]))
        return out


def _between(rng: np.random.Generator, bounds: tuple[int, int], size=None):
    lo, hi = bounds
    return rng.integers(lo, hi + 1, size=size)


def _phones(rng: np.random.Generator, n: int) -> list[str]:
    out = []
    for v in rng.integers(0, 10**10, size=n).tolist():
        a, rest = divmod(v, 10**7)
        b, c = divmod(rest, 10**4)
        out.append(f"{a:03d}-{b:03d}-{c:04d}")
    return out


def _pick_courses(rng: np.random.Generator, pool: list[int], n_students: int) -> list[tuple[int, ...]]:
    counts = _between(rng, COURSES_TAKEN_PER_STUDENT, n_students)
    order = rng.random((n_students, len(pool))).argsort(axis=1)[:, : COURSES_TAKEN_PER_STUDENT[1]]
    return [tuple(sorted(pool[j] for j in row[:k])) for row, k in zip(order.tolist(), counts.tolist())]


def _join_words(indices: np.ndarray, lengths: np.ndarray) -> list[str]:
    words = _WORDS_ARR[indices].tolist()
    out = []
    pos = 0
    for n in lengths.tolist():
        out.append(" ".join(words[pos:pos + n]))
        pos += n
    return out


@dataclass
class _Counters:
    department: int = 0
    research_group: int = 0
    faculty: int = 0
    course: int = 0
    grad: int = 0
    ugrad: int = 0
    publication: int = 0


def _generate_university(k: int, seed: int, ds: Dataset, decks: dict[str, _Deck], ids: _Counters) -> None:
    rng = np.random.default_rng([seed, _STREAM_UNIVERSITY, k])
    n_departments = int(_between(rng, (15, 25)))
    pub_authors: list[int] = []
    pub_ranks: list[str] = []

    for _ in range(n_departments):
        nr = ids.department
        ids.department += 1
        ds.departments.append(Department(nr, f"Department{nr}", k))
        domain = f"Department{nr}.University{k}.edu"

        for _ in range(int(_between(rng, RESEARCH_GROUPS_PER_DEPARTMENT))):
            ds.research_groups.append(ResearchGroup(ids.research_group, nr))
            ids.research_group += 1

        ranks: list[str] = []
        for rank, bounds in _RANK_COUNTS.items():
            ranks.extend([rank] * int(_between(rng, bounds)))
        n_faculty = len(ranks)
        first_faculty = ids.faculty
        faculty_ids = list(range(first_faculty, first_faculty + n_faculty))
        ids.faculty += n_faculty
        phones = _phones(rng, n_faculty)
        ug = decks["faculty_ug"].take(first_faculty, n_faculty)
        ms = decks["faculty_ms"].take(first_faculty, n_faculty)
        phd = decks["faculty_phd"].take(first_faculty, n_faculty)
        for i, fid in enumerate(faculty_ids):
            name = f"{ranks[i]}{fid}"
            ds.faculty.append(FacultyMember(
                fid, name, ranks[i], phones[i], f"{name}@{domain}", nr, ug[i], ms[i], phd[i]))
            n_pubs = int(_between(rng, _PUBLICATIONS_BY_RANK[ranks[i]]))
            pub_authors.extend([fid] * n_pubs)
            pub_ranks.extend([ranks[i]] * n_pubs)
        professors = [fid for fid, rank in zip(faculty_ids, ranks) if rank != "Lecturer"]

        ug_courses: list[int] = []
        grad_courses: list[int] = []
        for fid in faculty_ids:
            for level, bucket in (("undergraduate", ug_courses), ("graduate", grad_courses)):
                for _ in range(int(_between(rng, (1, 2)))):
                    cid = ids.course
                    ids.course += 1
                    prefix = "GraduateCourse" if level == "graduate" else "Course"
                    ds.courses.append(Course(cid, f"{prefix}{cid}", level, nr, fid))
                    bucket.append(cid)

        n_grad = int(rng.integers(3 * n_faculty, 4 * n_faculty + 1))
        first_grad = ids.grad
        ids.grad += n_grad
        degree_from = decks["grad_ug"].take(first_grad, n_grad)
        advisors = rng.integers(0, len(professors), size=n_grad).tolist()
        ages = rng.integers(22, 36, size=n_grad).tolist()
        years = rng.integers(1995, 2021, size=n_grad).tolist()
        phones = _phones(rng, n_grad)
        taken = _pick_courses(rng, grad_courses, n_grad)
        for i in range(n_grad):
            gid = first_grad + i
            name = f"GraduateStudent{gid}"
            ds.graduate_students.append(GraduateStudent(
                gid, name, f"{name}@{domain}", phones[i], ages[i], years[i], nr,
                degree_from[i], professors[advisors[i]], taken[i]))

        n_ugrad = int(rng.integers(8 * n_faculty, 14 * n_faculty + 1))
        first_ugrad = ids.ugrad
        ids.ugrad += n_ugrad
        has_advisor = (rng.random(n_ugrad) < UNDERGRAD_ADVISOR_PROBABILITY).tolist()
        advisors = rng.integers(0, len(professors), size=n_ugrad).tolist()
        ages = rng.integers(17, 26, size=n_ugrad).tolist()
        phones = _phones(rng, n_ugrad)
        taken = _pick_courses(rng, ug_courses, n_ugrad)
        for i in range(n_ugrad):
            sid = first_ugrad + i
            name = f"UndergraduateStudent{sid}"
            advisor = professors[advisors[i]] if has_advisor[i] else None
            ds.undergraduate_students.append(UndergraduateStudent(
                sid, name, f"{name}@{domain}", phones[i], ages[i], nr, advisor, taken[i]))

    n_pubs = len(pub_authors)
    title_len = _between(rng, TITLE_WORDS, n_pubs)
    abstract_len = _between(rng, ABSTRACT_WORDS, n_pubs)
    titles = _join_words(rng.integers(0, len(WORDS), size=int(title_len.sum())), title_len)
    abstracts = _join_words(rng.integers(0, len(WORDS), size=int(abstract_len.sum())), abstract_len)
    d0, d1 = (d.toordinal() for d in PUBLICATION_DATES)
    dates = [_dt.date.fromordinal(o).isoformat() for o in rng.integers(d0, d1 + 1, size=n_pubs).tolist()]
    for i in range(n_pubs):
        ds.publications.append(Publication(ids.publication, titles[i], abstracts[i], dates[i], pub_authors[i]))
        ids.publication += 1


def generate(sf: ScaleFactor | int, seed: int = 0) -> Dataset:
    """Generate the dataset for ``sf`` universities.

    The result is a pure function of ``(sf, seed)``; for a fixed seed every
    entity of ``generate(sf)`` appears unchanged in ``generate(sf2)`` for any
    ``sf2 > sf``.
    """
    if not isinstance(sf, ScaleFactor):
        sf = ScaleFactor(sf)
    seed = _as_seed(seed)
    ds = Dataset(scale_factor=sf, seed=seed)
    n_universities = max(REFERENCED_UNIVERSITIES, sf.value)
    ds.universities = [University(i, f"University{i}") for i in range(n_universities)]
    decks = {name: _Deck(seed, code) for name, code in _DECK_CODES.items()}
    ids = _Counters()
    for k in range(sf.value):
        _generate_university(k, seed, ds, decks, ids)
    return ds


# --------------------------------------------------------------------------
# SQL dump
# --------------------------------------------------------------------------

DIALECTS = ("postgres", "mysql")
INSERT_CHUNK = 500


@dataclass(frozen=True)
class _Column:
    name: str
    kind: str  # "int" | "text" | "date"
    nullable: bool = False
    references: str | None = None


def _c(name, kind="int", nullable=False, references=None):
    return _Column(name, kind, nullable, references)


# (table, primary key columns, columns) in dependency order
_TABLES: list[tuple[str, tuple[str, ...], tuple[_Column, ...]]] = [
    ("university", ("id",), (_c("id"), _c("name", "text"))),
    ("department", ("nr",), (_c("nr"), _c("name", "text"), _c("university_id", references="university"))),
    ("research_group", ("nr",), (_c("nr"), _c("department_nr", references="department"))),
    ("faculty", ("id",), (
        _c("id"), _c("name", "text"), _c("rank", "text"), _c("telephone", "text"),
        _c("email_address", "text"), _c("department_nr", references="department"),
        _c("undergraduate_degree_from", references="university"),
        _c("masters_degree_from", references="university"),
        _c("doctoral_degree_from", references="university"))),
    ("course", ("id",), (
        _c("id"), _c("name", "text"), _c("level", "text"),
        _c("department_nr", references="department"), _c("teacher_id", references="faculty"))),
    ("graduate_student", ("id",), (
        _c("id"), _c("name", "text"), _c("email_address", "text"), _c("telephone", "text"),
        _c("age"), _c("ug_degree_year"), _c("department_nr", references="department"),
        _c("undergraduate_degree_from", references="university"),
        _c("advisor_id", references="faculty"))),
    ("undergraduate_student", ("id",), (
        _c("id"), _c("name", "text"), _c("email_address", "text"), _c("telephone", "text"),
        _c("age"), _c("department_nr", references="department"),
        _c("advisor_id", nullable=True, references="faculty"))),
    ("publication", ("id",), (
        _c("id"), _c("title", "text"), _c("abstract", "text"), _c("date", "date"),
        _c("main_author_id", references="faculty"))),
    ("graduate_student_takes_course", ("graduate_student_id", "course_id"), (
        _c("graduate_student_id", references="graduate_student"), _c("course_id", references="course"))),
    ("undergraduate_student_takes_course", ("undergraduate_student_id", "course_id"), (
        _c("undergraduate_student_id", references="undergraduate_student"),
        _c("course_id", references="course"))),
]

_PK_OF = {name: pk[0] for name, pk, _ in _TABLES}


def _rows(ds: Dataset, table: str) -> Iterable[tuple]:
    if table == "university":
        return ((u.id, u.name) for u in ds.universities)
    if table == "department":
        return ((d.nr, d.name, d.university_id) for d in ds.departments)
    if table == "research_group":
        return ((g.nr, g.department_nr) for g in ds.research_groups)
    if table == "faculty":
        return ((f.id, f.name, f.rank, f.telephone, f.email_address, f.department_nr,
                 f.undergraduate_degree_from, f.masters_degree_from, f.doctoral_degree_from)
                for f in ds.faculty)
    if table == "course":
        return ((c.id, c.name, c.level, c.department_nr, c.teacher_id) for c in ds.courses)
    if table == "graduate_student":
        return ((s.id, s.name, s.email_address, s.telephone, s.age, s.ug_degree_year,
                 s.department_nr, s.undergraduate_degree_from, s.advisor_id)
                for s in ds.graduate_students)
    if table == "undergraduate_student":
        return ((s.id, s.name, s.email_address, s.telephone, s.age, s.department_nr, s.advisor_id)
                for s in ds.undergraduate_students)
    if table == "publication":
        return ((p.id, p.title, p.abstract, p.date, p.author_id) for p in ds.publications)
    if table == "graduate_student_takes_course":
        return ((s.id, c) for s in ds.graduate_students for c in s.courses)
    if table == "undergraduate_student_takes_course":
        return ((s.id, c) for s in ds.undergraduate_students for c in s.courses)
    raise KeyError(table)


class _Dialect:
    def __init__(self, name: str):
        if name not in DIALECTS:
            raise ValueError(f"unsupported SQL dialect {name!r}; expected one of {DIALECTS}")
        self.name = name

    def ident(self, name: str) -> str:
        return f"`{name}`" if self.name == "mysql" else f'"{name}"'

    def literal(self, value) -> str:
        if value is None:
            return "NULL"
        if isinstance(value, int):
            return str(value)
        s = str(value)
        if self.name == "mysql":
            s = s.replace("\\", "\\\\")
        return "'" + s.replace("'", "''") + "'"

    def column_type(self, col: _Column) -> str:
        base = {"int": "INTEGER" if self.name == "postgres" else "INT",
                "text": "TEXT", "date": "DATE"}[col.kind]
        return base if col.nullable else base + " NOT NULL"


def emit_sql(dataset: Dataset, dialect: str = "postgres") -> Iterator[str]:
    """Yield the SQL dump of ``dataset`` in chunks.

    One table per entity type plus the two enrollment link tables; rows are
    inserted in primary-key order, ``INSERT_CHUNK`` rows per statement, one
    row per line.
    """
    d = _Dialect(dialect)
    yield (f"-- university benchmark dataset: scale factor {dataset.scale_factor.value}, "
           f"seed {dataset.seed}, dialect {d.name}\n")
    if d.name == "mysql":
        yield "SET NAMES utf8mb4;\n"
    for table, _, _ in reversed(_TABLES):
        yield f"DROP TABLE IF EXISTS {d.ident(table)};\n"
    for table, pk, cols in _TABLES:
        lines = [f"  {d.ident(c.name)} {d.column_type(c)}" for c in cols]
        lines.append(f"  PRIMARY KEY ({', '.join(d.ident(c) for c in pk)})")
        for c in cols:
            if c.references:
                lines.append(f"  FOREIGN KEY ({d.ident(c.name)}) REFERENCES "
                             f"{d.ident(c.references)} ({d.ident(_PK_OF[c.references])})")
        yield f"CREATE TABLE {d.ident(table)} (\n" + ",\n".join(lines) + "\n);\n"
    for table, _, cols in _TABLES:
        head = (f"INSERT INTO {d.ident(table)} ({', '.join(d.ident(c.name) for c in cols)}) VALUES\n")
        chunk: list[str] = []
        for row in _rows(dataset, table):
            chunk.append("(" + ", ".join(d.literal(v) for v in row) + ")")
            if len(chunk) == INSERT_CHUNK:
                yield head + ",\n".join(chunk) + ";\n"
                chunk = []
        if chunk:
            yield head + ",\n".join(chunk) + ";\n"


def write_sql(dataset: Dataset, path: str | Path, dialect: str = "postgres") -> int:
    """Write the dump to ``path``; returns the number of inserted rows."""
    rows = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for chunk in emit_sql(dataset, dialect):
            fh.write(chunk)
            if chunk.startswith("INSERT"):
                rows += chunk.count("\n(")
    return rows


def count_insert_rows(chunks: Iterable[str]) -> int:
    """Count the value tuples of INSERT statements in an emitted dump."""
    n = 0
    for chunk in chunks:
        for line in chunk.splitlines():
            if line.startswith("("):
                n += 1
    return n


# --------------------------------------------------------------------------
# metadata
# --------------------------------------------------------------------------

_ID_SECTIONS = ("University", "Department", "ResearchGroup", "FacultyMember", "Course",
                "GraduateStudent", "UndergraduateStudent", "Publication")


@dataclass
class DatasetMetadata:
    """Values the query generator substitutes into templates."""

    scale_factor: int
    seed: int
    ids: dict[str, list[int]] = field(default_factory=dict)
    referenced_universities: list[int] = field(default_factory=list)
    title_words: list[str] = field(default_factory=list)
    abstract_words: list[str] = field(default_factory=list)

    def pool(self, name: str) -> list:
        if name == "ReferencedUniversity":
            return self.referenced_universities
        if name == "titleWords":
            return self.title_words
        if name == "abstractWords":
            return self.abstract_words
        return self.ids[name]

    def to_text(self) -> str:
        out = [f"scaleFactor={self.scale_factor}", f"seed={self.seed}"]
        for name in _ID_SECTIONS:
            out += [f"[{name}]", ",".join(map(str, self.ids.get(name, [])))]
        out += ["[ReferencedUniversity]", ",".join(map(str, self.referenced_universities))]
        out += ["[titleWords]", ",".join(self.title_words)]
        out += ["[abstractWords]", ",".join(self.abstract_words)]
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DatasetMetadata":
        header: dict[str, str] = {}
        sections: dict[str, str] = {}
        current = None
        for line in text.splitlines():
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = ""
            elif current is None:
                if line.strip():
                    key, _, value = line.partition("=")
                    header[key.strip()] = value.strip()
            else:
                sections[current] += line

        def ints(name):
            raw = sections.get(name, "")
            return [int(x) for x in raw.split(",")] if raw else []

        def strs(name):
            raw = sections.get(name, "")
            return raw.split(",") if raw else []

        try:
            meta = cls(int(header["scaleFactor"]), int(header["seed"]))
        except KeyError as exc:
            raise ValueError(f"metadata header lacks {exc.args[0]}") from None
        meta.ids = {name: ints(name) for name in _ID_SECTIONS}
        meta.referenced_universities = ints("ReferencedUniversity")
        meta.title_words = strs("titleWords")
        meta.abstract_words = strs("abstractWords")
        return meta


def _words_in_order(texts: Iterable[str], limit: int) -> list[str]:
    seen: dict[str, None] = {}
    for text in texts:
        for w in text.split():
            seen.setdefault(w)
        if len(seen) >= limit:
            break
    return list(seen)


def emit_metadata(dataset: Dataset) -> DatasetMetadata:
    """Collect id pools and vocabulary of ``dataset``.

    Word lists are in order of first appearance, so metadata of a smaller
    scale factor is a prefix of the larger one's under the same seed.
    """
    meta = DatasetMetadata(dataset.scale_factor.value, dataset.seed if dataset.seed is not None else 0)
    for name, rows in dataset.tables().items():
        meta.ids[name] = [primary_key(r) for r in rows]
    meta.referenced_universities = [u.id for u in dataset.universities if u.id < REFERENCED_UNIVERSITIES]
    meta.title_words = _words_in_order((p.title for p in dataset.publications), len(WORDS))
    meta.abstract_words = _words_in_order((p.abstract for p in dataset.publications), len(WORDS))
    return meta


def write_metadata(dataset_or_meta, path: str | Path) -> DatasetMetadata:
    meta = dataset_or_meta if isinstance(dataset_or_meta, DatasetMetadata) else emit_metadata(dataset_or_meta)
    Path(path).write_text(meta.to_text(), encoding="utf-8")
    return meta


def read_metadata(path: str | Path) -> DatasetMetadata:
    return DatasetMetadata.from_text(Path(path).read_text(encoding="utf-8"))


def crc(text: str) -> int:
    """Stable 32-bit hash used to derive sub-seeds from names."""
    return zlib.crc32(text.encode("utf-8"))
