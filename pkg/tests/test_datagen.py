import sqlite3
from collections import Counter
from dataclasses import astuple

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gqlbench.datagen import (
    DatasetMetadata,
    count_insert_rows,
    emit_metadata,
    emit_sql,
    generate,
    read_metadata,
    write_metadata,
    write_sql,
)
from gqlbench.model import REFERENCED_UNIVERSITIES, Publication, validate
from gqlbench.words import WORD_SET

seeds = st.integers(min_value=0, max_value=2**64 - 1)


def test_single_university_department_range(ds1):
    assert 15 <= len(ds1.departments) <= 25


def test_generation_is_deterministic(ds1):
    again = generate(1, 42)
    for name, rows in ds1.tables().items():
        assert again.tables()[name] == rows


def test_dump_is_byte_identical(ds1):
    assert "".join(emit_sql(ds1)) == "".join(emit_sql(generate(1, 42)))


def test_different_seeds_differ(ds1):
    other = generate(1, 43)
    assert other.faculty != ds1.faculty


def test_insert_rows_match_in_memory_tally(ds1):
    for dialect in ("postgres", "mysql"):
        assert count_insert_rows(emit_sql(ds1, dialect)) == ds1.row_count()


def test_dump_imports_into_sqlite(ds1, tmp_path):
    path = tmp_path / "d.sql"
    rows = write_sql(ds1, path, "postgres")
    assert rows == ds1.row_count()
    con = sqlite3.connect(":memory:")
    con.executescript(path.read_text(encoding="utf-8"))
    counts = {
        "department": len(ds1.departments),
        "faculty": len(ds1.faculty),
        "graduate_student": len(ds1.graduate_students),
        "undergraduate_student": len(ds1.undergraduate_students),
        "publication": len(ds1.publications),
        "university": len(ds1.universities),
    }
    for table, n in counts.items():
        assert con.execute(f'SELECT COUNT(*) FROM "{table}"').fetchone()[0] == n
    # foreign keys resolve
    con.execute("PRAGMA foreign_keys = ON")
    assert con.execute("PRAGMA foreign_key_check").fetchall() == []
    # rows come back in primary-key order with the in-memory values
    p = ds1.publications[7]
    assert con.execute('SELECT id, title, abstract, date, main_author_id FROM "publication" WHERE id = 7').fetchone() \
        == (p.id, p.title, p.abstract, p.date, p.author_id)


def test_unsupported_dialect(ds1):
    with pytest.raises(ValueError, match="dialect"):
        next(emit_sql(ds1, "oracle"))


def test_mysql_escapes_backslash_and_quote():
    ds = generate(1, 42)
    ds.publications = [Publication(0, "it's a \\ test", "x", "2010-01-01", 0)]
    mysql = "".join(emit_sql(ds, "mysql"))
    pg = "".join(emit_sql(ds, "postgres"))
    assert "'it''s a \\\\ test'" in mysql
    assert "'it''s a \\ test'" in pg
    assert "`publication`" in mysql and '"publication"' in pg


def test_metadata_lists_equal_dump_ids(ds1, meta1):
    assert meta1.ids["Department"] == [d.nr for d in ds1.departments]
    assert meta1.ids["GraduateStudent"] == sorted(s.id for s in ds1.graduate_students)
    assert 15 <= len(meta1.ids["Department"]) <= 25


def test_referenced_pool_is_1000(meta1, meta5):
    assert len(meta1.referenced_universities) == REFERENCED_UNIVERSITIES == 1000
    assert meta5.referenced_universities == list(range(1000))


def test_metadata_roundtrip(meta1, tmp_path):
    path = tmp_path / "metadata.txt"
    write_metadata(meta1, path)
    back = read_metadata(path)
    assert back == meta1
    text = path.read_text()
    assert text.startswith("scaleFactor=1\nseed=42\n[University]\n")


def test_metadata_header_required():
    with pytest.raises(ValueError, match="scaleFactor"):
        DatasetMetadata.from_text("seed=1\n[University]\n0\n")


def test_word_lists_come_from_publications(ds1, meta1):
    assert set(meta1.title_words) == {w for p in ds1.publications for w in p.title.split()}
    assert set(meta1.title_words) <= WORD_SET and set(meta1.abstract_words) <= WORD_SET


def test_metadata_prefix_across_scale(meta1, meta5):
    for name, ids in meta1.ids.items():
        if name != "University":
            assert meta5.ids[name][:len(ids)] == ids
    assert meta5.title_words[:len(meta1.title_words)] == meta1.title_words


def test_monotone_subset(ds1, ds5):
    for name, rows in ds1.tables().items():
        bigger = ds5.tables()[name]
        assert bigger[:len(rows)] == rows, name


def test_degree_holders_bounded(ds5):
    for kind in ("undergraduate_degree_from",):
        c = Counter(getattr(s, kind) for s in ds5.graduate_students)
        assert max(c.values()) <= 7 * 5


@pytest.mark.slow
def test_department_counts_look_uniform():
    ds = generate(100, 7)
    per_uni = Counter(d.university_id for d in ds.departments)
    observed = np.bincount([per_uni[u] for u in range(100)], minlength=26)[15:26]
    expected = 100 / 11
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    # df = 10, p = 0.001 critical value
    assert chi2 < 29.59, observed


def test_seed_is_masked_to_64_bits():
    assert generate(1, 2**64 + 5).seed == 5


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_any_seed_yields_valid_dataset(seed):
    assert validate(generate(1, seed), WORD_SET) == []


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_any_seed_is_deterministic(seed):
    a, b = generate(1, seed), generate(1, seed)
    assert [astuple(f) for f in a.faculty] == [astuple(f) for f in b.faculty]
    assert a.publications == b.publications


@settings(max_examples=4, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=2))
def test_any_seed_is_monotone(seed, sf):
    small, big = generate(sf, seed), generate(sf + 1, seed)
    for name, rows in small.tables().items():
        if name != "University":
            assert big.tables()[name][:len(rows)] == rows
    ms, mb = emit_metadata(small), emit_metadata(big)
    assert mb.ids["Department"][:len(ms.ids["Department"])] == ms.ids["Department"]
