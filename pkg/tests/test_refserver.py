import http.client
import json
import statistics
import threading
from urllib.parse import urlsplit

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gqlbench.gqlcore import count_leaf_nodes
from gqlbench.refserver import DataSource, DataSourceConfig, ExecutionMode, Executor, RefServer
from gqlbench.refserver.datasource import GRADUATE_STUDENT_ATTRS, sort_rows
from gqlbench.workload import instantiate

MODES = list(ExecutionMode)
ALL = [f"QT{i}" for i in range(1, 17)]


def request(url, method="POST", body=None, raw=None):
    parts = urlsplit(url)
    conn = http.client.HTTPConnection(parts.hostname, parts.port, timeout=30)
    try:
        data = raw if raw is not None else (json.dumps(body).encode() if body is not None else None)
        conn.request(method, parts.path, data, {"Content-Type": "application/json"})
        resp = conn.getresponse()
        return resp.status, json.loads(resp.read())
    finally:
        conn.close()


def post(server, q):
    return request(server.url, body=q.payload())


@pytest.fixture(scope="module")
def executors(ds1):
    source = DataSource(ds1, DataSourceConfig(latency_ms=0))
    return {m: Executor(source, m) for m in MODES}


@pytest.fixture(scope="module")
def naive_server(ds1):
    with RefServer(ds1, "Naive", DataSourceConfig(latency_ms=0)) as server:
        yield server


def run(ex, q):
    return ex.execute(q.query, q.variables)


# --------------------------------------------------------------------------
# request accounting
# --------------------------------------------------------------------------


def test_qt3_naive_issues_four_requests(executors, meta1):
    for q in instantiate("QT3", meta1, 30, 0):
        data, stats = run(executors[ExecutionMode.NAIVE], q)
        assert stats.backend_requests == 4
        assert count_leaf_nodes(data) == 1


def test_qt5_batch_is_constant_and_small(executors, meta1):
    counts = {run(executors[ExecutionMode.BATCH], q)[1].backend_requests for q in instantiate("QT5", meta1, 50)}
    assert len(counts) == 1 and counts.pop() <= 4


def test_qt5_naive_over_batch_ratio_at_sf5(ds5, meta5):
    source = DataSource(ds5, DataSourceConfig(latency_ms=0))
    naive, batch = Executor(source, "Naive"), Executor(source, "Batch")
    for q in instantiate("QT5", meta5, 10, 0):
        assert run(naive, q)[1].backend_requests >= 10 * run(batch, q)[1].backend_requests


def test_cache_scope(executors, meta1):
    for q in instantiate("QT5", meta1, 20, 0):
        data, naive = run(executors[ExecutionMode.NAIVE], q)
        _, cache = run(executors[ExecutionMode.CACHE], q)
        if count_leaf_nodes(data) > 2:
            assert cache.backend_requests < naive.backend_requests
    for q in instantiate("QT3", meta1, 20, 0):
        assert run(executors[ExecutionMode.CACHE], q)[1].backend_requests == 4


@pytest.mark.parametrize("tid", ALL)
def test_modes_agree(tid, executors, meta1):
    for q in instantiate(tid, meta1, 10, 1):
        results = {m: run(executors[m], q) for m in MODES}
        trees = [json.dumps(r[0], sort_keys=True) for r in results.values()]
        assert len(set(trees)) == 1
        naive = results[ExecutionMode.NAIVE][1].backend_requests
        assert results[ExecutionMode.BATCH][1].backend_requests <= naive
        assert results[ExecutionMode.CACHE][1].backend_requests <= naive
        for _, stats in results.values():
            assert stats.backend_requests + stats.cache_hits >= stats.demands


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(ALL), st.integers(min_value=0, max_value=10**6))
def test_modes_agree_property(executors, meta1, tid, seed):
    (q,) = instantiate(tid, meta1, 1, seed)
    trees = {json.dumps(run(executors[m], q)[0], sort_keys=True) for m in MODES}
    assert len(trees) == 1


def fan_out(tree) -> int:
    """Largest list whose items resolve nested objects of their own."""
    if isinstance(tree, dict):
        return max((fan_out(v) for v in tree.values()), default=0)
    if isinstance(tree, list):
        nested = [x for x in tree if isinstance(x, dict) and any(isinstance(v, (dict, list)) for v in x.values())]
        return max([len(nested)] + [fan_out(x) for x in tree])
    return 0


def test_batching_strictly_helps_fanout(executors, meta1):
    for tid in ("QT2", "QT5", "QT6", "QT7", "QT9"):
        for q in instantiate(tid, meta1, 20, 0):
            data, naive = run(executors[ExecutionMode.NAIVE], q)
            _, batch = run(executors[ExecutionMode.BATCH], q)
            assert batch.backend_requests <= naive.backend_requests
            if fan_out(data) > 1:
                assert batch.backend_requests < naive.backend_requests, (tid, q.variables)


# --------------------------------------------------------------------------
# semantics against brute-force oracles
# --------------------------------------------------------------------------


def test_unknown_id_is_null(executors):
    data, _ = executors[ExecutionMode.NAIVE].execute("query { department(nr: 999999) { id name } }")
    assert data == {"department": None}


def test_ordering_and_limit(executors, ds1, meta1):
    for q in instantiate("QT8", meta1, 10, 0):
        v = q.variables
        data, _ = run(executors[ExecutionMode.BATCH], q)
        a1, a2 = (GRADUATE_STUDENT_ATTRS[v[k]] for k in ("attrGStudent1", "attrGStudent2"))
        expected = sorted(ds1.graduate_students, key=lambda s: (getattr(s, a1), getattr(s, a2), s.id))
        assert [r["id"] for r in data["graduateStudents"]] == [str(s.id) for s in expected[:v["cnt"]]]


def test_sort_rows_descending_breaks_ties_by_id(ds1):
    rows = sort_rows(ds1.graduate_students, {"field": "age", "direction": "DESC"}, GRADUATE_STUDENT_ATTRS)
    keys = [(-s.age, s.id) for s in rows]
    assert keys == sorted(keys)


def test_paging_by_id(executors, ds1):
    dept = ds1.departments[0].nr
    text = "query($o: Int) { department(nr: %d) { graduateStudents(limit: 10, offset: $o) { id } } }" % dept
    ids = sorted(s.id for s in ds1.graduate_students if s.department_nr == dept)
    data, _ = executors[ExecutionMode.NAIVE].execute(text, {"o": 5})
    assert [r["id"] for r in data["department"]["graduateStudents"]] == [str(i) for i in ids[5:15]]


def test_filter_memberof_university(executors, ds1, meta1):
    depts = {d.nr: d for d in ds1.departments}
    for q in instantiate("QT11", meta1, 30, 0):
        u = q.variables["universityID"]
        expected = [depts[s.department_nr].name for s in sorted(ds1.graduate_students, key=lambda s: s.id)
                    if s.undergraduate_degree_from == u and depts[s.department_nr].university_id == u]
        data, _ = run(executors[ExecutionMode.CACHE], q)
        got = [r["memberOf"]["name"] for r in data["university"]["undergraduateDegreeObtainedBystudent"]]
        assert got == expected


def test_aggregates(executors, ds1):
    for u in (0, 17, 500):
        ages = [s.age for s in ds1.graduate_students if s.undergraduate_degree_from == u]
        text = "query { university(nr: %d) { undergraduateDegreeObtainedBystudentAggregate " \
               "{ count age { sum avg min max } } } }" % u
        data, _ = executors[ExecutionMode.NAIVE].execute(text)
        agg = data["university"]["undergraduateDegreeObtainedBystudentAggregate"]
        assert agg["count"] == len(ages)
        if ages:
            assert agg["age"] == {"sum": sum(ages), "avg": pytest.approx(statistics.fmean(ages)),
                                  "min": min(ages), "max": max(ages)}


def test_search(executors, ds1, meta1):
    word = meta1.title_words[3]
    text = 'query { publicationSearch(field: title, criterion: CONTAINS, pattern: "%s") { id } }' % word
    data, stats = executors[ExecutionMode.NAIVE].execute(text)
    assert [r["id"] for r in data["publicationSearch"]] == [str(p.id) for p in ds1.publications if word in p.title]
    assert stats.backend_requests == 1


# --------------------------------------------------------------------------
# HTTP layer
# --------------------------------------------------------------------------


def test_stats_after_one_qt3(naive_server, meta1):
    request(naive_server.base_url + "/stats/reset")
    (q,) = instantiate("QT3", meta1, 1, 0)
    status, body = post(naive_server, q)
    assert status == 200 and "data" in body
    _, stats = request(naive_server.base_url + "/stats", "GET")
    assert stats["totalBackendRequests"] == 4 and stats["totalQueries"] == 1
    assert stats["recent"][-1]["backendRequests"] == 4


def test_stats_linear_and_reset(naive_server, meta1):
    request(naive_server.base_url + "/stats/reset")
    qs = instantiate("QT3", meta1, 7, 0)
    for q in qs:
        post(naive_server, q)
    _, stats = request(naive_server.base_url + "/stats", "GET")
    assert stats["totalBackendRequests"] == 4 * len(qs)
    _, after = request(naive_server.base_url + "/stats/reset")
    assert after["totalBackendRequests"] == after["totalQueries"] == after["totalErrors"] == 0
    assert after["recent"] == [] and after["sourceRequests"] == 0


def test_bad_json_is_400(naive_server):
    status, body = request(naive_server.url, raw=b"{not json")
    assert status == 400 and body["errors"]
    status, _ = request(naive_server.url, body={"variables": {}})
    assert status == 400


def test_validation_error_is_200_with_errors(naive_server):
    status, body = request(naive_server.url, body={"query": "query { departmen(nr: 1) { id } }"})
    assert status == 200
    assert body["errors"] and "data" not in body
    assert "departmen" in body["errors"][0]["message"]


def test_bad_variable_is_error_envelope(naive_server):
    status, body = request(naive_server.url, body={
        "query": "query($d: ID) { department(nr: $d) { id } }", "variables": {"d": True}})
    assert status == 200 and body["errors"]


def test_unknown_path_is_404(naive_server):
    status, _ = request(naive_server.base_url + "/nope", "GET")
    assert status == 404


def test_http_leaf_count_in_bounds(naive_server, meta1):
    for q in instantiate("QT5", meta1, 5, 0):
        _, body = post(naive_server, q)
        assert 0 <= count_leaf_nodes(body["data"]) <= 49


def test_pool_bound_under_fifty_clients(ds1, meta1):
    config = DataSourceConfig(latency_ms=1.0, pool_size=3, db_workers=3)
    qs = instantiate("QT5", meta1, 25, 0)
    with RefServer(ds1, "Naive", config) as server:
        errors = []

        def client(i):
            try:
                for q in (qs[i % len(qs)], qs[(i + 1) % len(qs)]):
                    status, body = post(server, q)
                    if status != 200 or "errors" in body:
                        errors.append(body)
            except Exception as exc:  # noqa: BLE001 - surfaced through the assertion below
                errors.append(exc)

        threads = [threading.Thread(target=client, args=(i,)) for i in range(50)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        snap = server.service.snapshot()
    assert errors == []
    assert snap["totalQueries"] == 100
    assert 1 < snap["maxInFlight"] <= 3


def test_config_validation():
    with pytest.raises(ValueError):
        DataSourceConfig(pool_size=0)
    with pytest.raises(ValueError):
        ExecutionMode.parse("Turbo")
    assert ExecutionMode.parse("batchcache") is ExecutionMode.BATCH_CACHE
