"""Entity types of the university dataset and dataset-level validation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Iterator

#: Size of the pool of universities that degree references are drawn from.
REFERENCED_UNIVERSITIES = 1000

FACULTY_RANKS = ("FullProfessor", "AssociateProfessor", "AssistantProfessor", "Lecturer")

DEPARTMENTS_PER_UNIVERSITY = (15, 25)
FULL_PROFESSORS_PER_DEPARTMENT = (7, 10)
GRAD_FACULTY_RATIO = (3, 4)
UNDERGRAD_FACULTY_RATIO = (8, 14)
DEGREES_PER_UNIVERSITY_PER_SF = 7


@dataclass(frozen=True, order=True)
class ScaleFactor:
    """Number of universities that get generated."""

    value: int

    def __post_init__(self):
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise TypeError(f"scale factor must be an int, got {self.value!r}")
        if self.value < 1:
            raise ValueError(f"scale factor must be >= 1, got {self.value}")

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True, slots=True)
class University:
    id: int
    name: str


@dataclass(frozen=True, slots=True)
class Department:
    nr: int
    name: str
    university_id: int

    @property
    def id(self) -> int:
        return self.nr


@dataclass(frozen=True, slots=True)
class ResearchGroup:
    nr: int
    department_nr: int

    @property
    def id(self) -> int:
        return self.nr


@dataclass(frozen=True, slots=True)
class FacultyMember:
    id: int
    name: str
    rank: str
    telephone: str
    email_address: str
    department_nr: int
    undergraduate_degree_from: int
    masters_degree_from: int
    doctoral_degree_from: int


@dataclass(frozen=True, slots=True)
class GraduateStudent:
    # id, email_address, telephone, age, ug_degree_year and name are the
    # six sortable scalars exposed through GraduateStudentField.
    id: int
    name: str
    email_address: str
    telephone: str
    age: int
    ug_degree_year: int
    department_nr: int
    undergraduate_degree_from: int
    advisor_id: int
    courses: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class UndergraduateStudent:
    id: int
    name: str
    email_address: str
    telephone: str
    age: int
    department_nr: int
    advisor_id: int | None
    courses: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class Course:
    id: int
    name: str
    level: str
    department_nr: int
    teacher_id: int


@dataclass(frozen=True, slots=True)
class Publication:
    id: int
    title: str
    abstract: str
    date: str
    author_id: int


ENTITY_TYPES = {
    "University": University,
    "Department": Department,
    "ResearchGroup": ResearchGroup,
    "FacultyMember": FacultyMember,
    "Course": Course,
    "GraduateStudent": GraduateStudent,
    "UndergraduateStudent": UndergraduateStudent,
    "Publication": Publication,
}

GRADUATE_STUDENT_SORT_FIELDS = ("id", "emailAddress", "telephone", "age", "ugDegreeYear", "name")


def primary_key(entity) -> int:
    return entity.nr if isinstance(entity, (Department, ResearchGroup)) else entity.id


@dataclass
class Dataset:
    """A generated university world.

    Tables are lists of frozen entities sorted by primary key. ``seed`` is
    ``None`` for hand-built datasets.
    """

    scale_factor: ScaleFactor
    seed: int | None = None
    universities: list[University] = field(default_factory=list)
    departments: list[Department] = field(default_factory=list)
    research_groups: list[ResearchGroup] = field(default_factory=list)
    faculty: list[FacultyMember] = field(default_factory=list)
    courses: list[Course] = field(default_factory=list)
    graduate_students: list[GraduateStudent] = field(default_factory=list)
    undergraduate_students: list[UndergraduateStudent] = field(default_factory=list)
    publications: list[Publication] = field(default_factory=list)

    def tables(self) -> dict[str, list]:
        return {
            "University": self.universities,
            "Department": self.departments,
            "ResearchGroup": self.research_groups,
            "FacultyMember": self.faculty,
            "Course": self.courses,
            "GraduateStudent": self.graduate_students,
            "UndergraduateStudent": self.undergraduate_students,
            "Publication": self.publications,
        }

    def entity_count(self) -> int:
        return sum(len(rows) for rows in self.tables().values())

    def link_count(self) -> int:
        """Rows of the course-enrollment link tables."""
        return sum(len(s.courses) for s in self.graduate_students) + sum(
            len(s.courses) for s in self.undergraduate_students
        )

    def row_count(self) -> int:
        return self.entity_count() + self.link_count()

    def iter_entities(self) -> Iterator[tuple[str, object]]:
        for kind, rows in self.tables().items():
            for row in rows:
                yield kind, row

    def generated_university_ids(self) -> range:
        return range(self.scale_factor.value)


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    observed: object

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule} (observed {self.observed})"


def _check_range(out, entity, what, value, lo, hi):
    if value < lo:
        out.append(Violation(entity, f"{what} below {lo}", value))
    elif value > hi:
        out.append(Violation(entity, f"{what} above {hi}", value))


def validate(dataset: Dataset, word_pool: frozenset[str] | None = None) -> list[Violation]:
    """Check cardinality ranges and referential integrity.

    Returns an empty list iff every invariant holds. When ``word_pool`` is
    given, publication titles and abstracts must only use words from it.
    """
    out: list[Violation] = []
    if not dataset.universities:
        out.append(Violation("Dataset", "no universities", 0))
        return out

    university_ids = {u.id for u in dataset.universities}
    dept_ids = {d.nr for d in dataset.departments}
    faculty_ids = {f.id for f in dataset.faculty}
    course_ids = {c.id for c in dataset.courses}

    def ref(entity, what, target_id, pool):
        if target_id not in pool:
            out.append(Violation(entity, f"dangling {what}", target_id))

    depts_per_uni = Counter(d.university_id for d in dataset.departments)
    for uid in dataset.generated_university_ids():
        _check_range(out, f"University {uid}", "departments-per-university",
                     depts_per_uni.get(uid, 0), *DEPARTMENTS_PER_UNIVERSITY)
    for d in dataset.departments:
        ref(f"Department {d.nr}", "subOrganizationOf", d.university_id, university_ids)
    for g in dataset.research_groups:
        ref(f"ResearchGroup {g.nr}", "subOrganizationOf", g.department_nr, dept_ids)

    full_profs = Counter(f.department_nr for f in dataset.faculty if f.rank == "FullProfessor")
    faculty_per_dept = Counter()
    for f in dataset.faculty:
        name = f"FacultyMember {f.id}"
        faculty_per_dept[f.department_nr] += 1
        if f.rank not in FACULTY_RANKS:
            out.append(Violation(name, "unknown rank", f.rank))
        ref(name, "worksFor", f.department_nr, dept_ids)
        for what in ("undergraduate_degree_from", "masters_degree_from", "doctoral_degree_from"):
            ref(name, what, getattr(f, what), university_ids)

    grads_per_dept = Counter()
    degree_counts = Counter()
    for s in dataset.graduate_students:
        name = f"GraduateStudent {s.id}"
        grads_per_dept[s.department_nr] += 1
        degree_counts[s.undergraduate_degree_from] += 1
        ref(name, "memberOf", s.department_nr, dept_ids)
        ref(name, "undergraduateDegreeFrom", s.undergraduate_degree_from, university_ids)
        ref(name, "advisor", s.advisor_id, faculty_ids)
        for c in s.courses:
            ref(name, "takesCourse", c, course_ids)

    ugrads_per_dept = Counter()
    for s in dataset.undergraduate_students:
        name = f"UndergraduateStudent {s.id}"
        ugrads_per_dept[s.department_nr] += 1
        ref(name, "memberOf", s.department_nr, dept_ids)
        if s.advisor_id is not None:
            ref(name, "advisor", s.advisor_id, faculty_ids)
        for c in s.courses:
            ref(name, "takesCourse", c, course_ids)

    for c in dataset.courses:
        ref(f"Course {c.id}", "offeredBy", c.department_nr, dept_ids)
        ref(f"Course {c.id}", "teacher", c.teacher_id, faculty_ids)

    for p in dataset.publications:
        name = f"Publication {p.id}"
        ref(name, "author", p.author_id, faculty_ids)
        if word_pool is not None:
            for text_field in ("title", "abstract"):
                unknown = set(getattr(p, text_field).split()) - word_pool
                if unknown:
                    out.append(Violation(name, f"{text_field} word outside pool", sorted(unknown)[0]))

    for d in dataset.departments:
        name = f"Department {d.nr}"
        _check_range(out, name, "full-professors-per-department",
                     full_profs.get(d.nr, 0), *FULL_PROFESSORS_PER_DEPARTMENT)
        n_faculty = faculty_per_dept.get(d.nr, 0)
        if n_faculty == 0:
            out.append(Violation(name, "no faculty", 0))
            continue
        _check_range(out, name, "graduate-student/faculty ratio",
                     grads_per_dept.get(d.nr, 0) / n_faculty, *GRAD_FACULTY_RATIO)
        _check_range(out, name, "undergraduate-student/faculty ratio",
                     ugrads_per_dept.get(d.nr, 0) / n_faculty, *UNDERGRAD_FACULTY_RATIO)

    cap = DEGREES_PER_UNIVERSITY_PER_SF * dataset.scale_factor.value
    for uid, n in sorted(degree_counts.items()):
        if n > cap:
            out.append(Violation(f"University {uid}", f"undergraduate-degree holders above {cap}", n))
    return out


def entity_fields(kind: str) -> tuple[str, ...]:
    return tuple(f.name for f in fields(ENTITY_TYPES[kind]))
