"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
written straight to the terminal so they show without ``-s``.
"""

import math
import os
import random
import re
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from helpers import CORRUPTIONS, HEADER, write_line_list
from oracles import chained_join, check_sharding, count_partitions, key_bytes, set_partitions
from polygate.bench import BenchSpec, generate_records, report_csv, run_bench, summarize
from polygate.capacity import (
    HdfsSizingInput,
    PartitionSpec,
    ShardSizingInput,
    cluster_assignment_count,
    hdfs_node_storage,
    max_collection_size,
    max_splits,
    partition_size,
    partition_value_count,
)
from polygate.cli import main as cli_main
from polygate.cost import CostCoefficients, CostVector, average_time, ingestion_rate, plan_cost, total_cost
from polygate.dialect import EngineKind, default_corpus, detect_engine, reference_statements, tokenize
from polygate.engines import Document, ShardedCluster
from polygate.ingest import kmeans_mapreduce, kmeans_sequential, parse_line_list
from polygate.ingest.records import Status
from polygate.query import JoinPlan, compare_plans, compute_stats, execute_join, synthetic_join_tables

REFERENCE_TEXT = Path(__file__).resolve().parents[1] / "paper.md"


@pytest.fixture
def verdict(capsys, request):
    """Yield a dict for detail text; print PASS/FAIL for the criterion afterwards."""
    number, title = request.node.get_closest_marker("criterion").args
    info = {"detail": ""}
    yield info
    report = getattr(request.node, "rep_call", None)
    status = "PASS" if report is not None and report.passed else "FAIL"
    with capsys.disabled():
        print(f"\n{status} criterion {number}: {title}  {info['detail']}".rstrip())


# -- 1 ---------------------------------------------------------------------


def _normalized(text):
    return re.sub(r"\s+", "", text).lower()


@pytest.mark.criterion(1, "dialect routing fidelity")
def test_routing_fidelity(verdict, capsys):
    statements = reference_statements()
    assert len(statements) >= 24
    source = _normalized(REFERENCE_TEXT.read_text(encoding="utf-8"))
    for _, _, text in statements:
        # every line is quoted from the source figures
        for line in text.splitlines():
            assert _normalized(line) in source, line

    corpus = default_corpus()
    start = time.perf_counter()
    routed = [detect_engine(tokenize(text), corpus) for _, _, text in statements]
    elapsed = time.perf_counter() - start
    assert routed == [engine for engine, _, _ in statements]
    assert elapsed < 1.0

    # the CLI path prints the same engine names
    start = time.perf_counter()
    for engine, _, text in statements:
        assert cli_main(["route", text]) == 0
        assert capsys.readouterr().out == f"{engine.value}\n"
    cli_elapsed = time.perf_counter() - start
    assert cli_elapsed < 1.0

    # generic SELECT/INSERT shared with the wide-column dialect go to Relational
    collisions = ["SELECT * FROM People;", "INSERT INTO People (custid, branch, status) VALUES ('appl01', 'main', 'A');"]
    for text in collisions:
        assert detect_engine(text, corpus) is EngineKind.RELATIONAL
        assert corpus.priority_of(EngineKind.RELATIONAL) < corpus.priority_of(EngineKind.WIDE_COLUMN)
    verdict["detail"] = f"({len(statements)}/{len(statements)} statements, {elapsed * 1e3:.2f} ms detect, {cli_elapsed * 1e3:.1f} ms via CLI)"


# -- 2 ---------------------------------------------------------------------


@pytest.mark.criterion(2, "formula oracles")
def test_formula_oracles(verdict):
    # HDFS node storage, real results, hand values
    for (C, R, S, I), want in [((1, 1, 1.2, 0), 1.0), ((1, 3, 100, 0.25), 300 / (0.75 * 1.2)), ((1, 3, 1, 1 / 3), 3.75)]:
        got = hdfs_node_storage(HdfsSizingInput(C=C, R=R, S=S, I=I))
        assert math.isclose(got, want, rel_tol=1e-9), (C, R, S, I, got)
    # max splits and max collection size, integer results
    for avg, c, m, mb in [(512, 67108864, 32768, 1099511627776), (64, 67108864, 262144, 8796093022208), (16777216, 2, 1, 1)]:
        inp = ShardSizingInput(avg=avg, c=c)
        assert max_splits(inp) == m and max_collection_size(inp) == mb
        assert max_splits(inp) == 16777216 // avg
    # partition value count and partition size
    assert partition_value_count(PartitionSpec(Nr=0, Nc=3, Npk=1)) == 0
    assert partition_value_count(PartitionSpec(Nr=10, Nc=5, Npk=2, Ns=1)) == 21
    assert partition_value_count(PartitionSpec(Nr=1, Nc=4, Npk=1)) == 3
    table = dict(ck_sizes=[8], cr_sizes=[4, 4], cc_sizes=[8], t_avg=8, Nc=4, Npk=2, Ns=0)
    assert partition_size(PartitionSpec(Nr=0, **table)) == 8
    assert partition_size(PartitionSpec(Nr=100, **table)) == 8 + 100 * 16 + 8 * 200
    assert partition_size(PartitionSpec(Nr=1, Nc=3, Npk=1, Ns=1, ck_sizes=[4], cs_sizes=[16], cr_sizes=[4])) == 24
    # cluster assignment count against brute-force enumeration
    checked = 0
    for n in range(1, 11):
        counts = {}
        for p in set_partitions(range(n)):
            counts[len(p)] = counts.get(len(p), 0) + 1
        for k in range(1, n + 1):
            assert cluster_assignment_count(n, k) == counts[k], (n, k)
            checked += 1
    assert count_partitions(4, 2) == 7
    verdict["detail"] = f"(assignment count brute-forced for {checked} (N, K) pairs)"


# -- 3 ---------------------------------------------------------------------


@pytest.mark.criterion(3, "cost-model identities")
def test_cost_identities(verdict):
    rng = random.Random(3)
    for _ in range(2000):
        coef = CostCoefficients(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10))
        vec = CostVector(rng.uniform(0, 1e4), rng.uniform(0, 1e4), rng.uniform(0, 1e4))
        unit = CostCoefficients(1.0, coef.alpha, coef.beta, coef.gamma)
        assert total_cost(coef, vec) == plan_cost(unit, vec)
    assert plan_cost(CostCoefficients(1, 1, 1, 1), CostVector(10, 20, 5)) == 35
    assert average_time(35, 7) == 5
    assert ingestion_rate(1000, 5) == 200
    assert math.isclose(ingestion_rate(1_000_000, 340), 2941.176470588235, rel_tol=1e-12)

    trials = 0
    for seed in range(60):
        r = random.Random(seed)
        names = [f"t{i}" for i in range(r.choice([3, 4, 5]))]
        rows = r.randint(1, 40)
        tables = synthetic_join_tables(len(names), rows, r.randint(rows, 3 * rows), seed)
        tables = dict(zip(names, tables.values()))
        plans = [JoinPlan.linear(names, "k"), JoinPlan.star(names, "k"), JoinPlan.linear(names[::-1], "k"), JoinPlan.star(names[::-1], "k")]
        coef = CostCoefficients(r.uniform(0.1, 5), r.random(), r.random(), r.random())
        base = [rp.plan for rp in compare_plans(plans, coef, tables)]
        for factor in (1e-3, 0.5, 10, 1e4):
            assert [rp.plan for rp in compare_plans(plans, coef.scaled(factor), tables)] == base
        trials += 1
    verdict["detail"] = f"({trials} ranking trials, 4 scale factors each)"


# -- 4 ---------------------------------------------------------------------


@pytest.mark.criterion(4, "MapReduce/sequential k-means equivalence")
def test_kmeans_equivalence(verdict):
    pool = generate_records(10_000, seed=2024)
    rng = np.random.default_rng(4)
    trials = 0
    worst = 0.0
    iterations = []
    for t in range(100):
        n = int(np.exp(rng.uniform(np.log(20), np.log(10_000))))
        start = int(rng.integers(0, len(pool) - n + 1))
        recs = pool[start : start + n]
        k = int(rng.integers(1, 9))
        n_blocks = int(rng.integers(1, 17))
        cuts = np.sort(rng.integers(0, n + 1, size=n_blocks - 1))
        blocks = [[recs[i] for i in part] for part in np.split(np.arange(n), cuts)]
        seed = int(rng.integers(0, 2**63))
        seq = kmeans_sequential(recs, k, seed=seed)
        mr = kmeans_mapreduce(blocks, k, seed=seed)
        assert np.array_equal(seq.assignments, mr.assignments), t
        diff = float(np.abs(seq.centroids - mr.centroids).max())
        assert diff <= 1e-9, (t, diff)
        worst = max(worst, diff)
        for hist in (seq.sse_history, mr.sse_history):
            for a, b in zip(hist, hist[1:]):
                assert b <= a * (1 + 1e-12) + 1e-12, (t, a, b)
        iterations.append(seq.iterations)
        trials += 1
    verdict["detail"] = f"({trials} trials, max centroid diff {worst:.1e}, median {statistics.median(iterations)} iterations)"


# -- 5 ---------------------------------------------------------------------


def _tiles(coll):
    chunks = coll.chunks
    assert chunks[0].low == b"" and chunks[-1].high is None
    assert all(a.high == b.low and a.low < a.high for a, b in zip(chunks, chunks[1:]))


@pytest.mark.criterion(5, "sharding invariants")
def test_sharding_invariants(verdict):
    rng = random.Random(5)
    total_docs = 0
    splits = 0
    for run, (n, chunk_size) in enumerate([(10_000, 4096), (10_000, 1500), (4_000, 300)]):
        cl = ShardedCluster(shards=[f"s{i}" for i in range(4)], chunk_size=chunk_size, primary_shard="s2")
        cl.create_collection("cases", sharded=True, shard_key="_id")
        docs = bytes_ = 0
        for i in range(n):
            if run == 1:
                key = f"k{rng.randrange(3000):05d}"  # repeated string keys
            else:
                key = rng.randrange(-(2**40), 2**40) if rng.random() < 0.9 else rng.randrange(20)
            doc = Document(key, {"_id": key, "seq": i, "pad": "x" * rng.randrange(0, 80)})
            report = cl.insert_document("cases", doc)
            docs += 1
            bytes_ += doc.byte_size
            _tiles(cl.collections["cases"])
            if report.splits:
                splits += len(report.splits)
                check_sharding(cl, "cases", expected_docs=docs, expected_bytes=bytes_)
        check_sharding(cl, "cases", expected_docs=docs, expected_bytes=bytes_)
        for k in (rng.randrange(-(2**40), 2**40) for _ in range(500)):
            route = cl.route_key("cases", k)
            assert route.chunk.contains(key_bytes(k))
        total_docs += docs

        # unsharded collection in the same cluster stays on the primary shard
        plain = 0
        for i in range(1000):
            doc = Document(i, {"_id": i, "v": "y" * (i % 50)})
            assert cl.insert_document("plain", doc).shard == "s2"
            plain += doc.byte_size
        chunk_bytes = {s: 0 for s in cl.shards}
        for c in cl.collections["cases"].chunks:
            chunk_bytes[c.owner] += c.byte_size
        load = cl.shard_bytes()
        for s in cl.shards:
            assert load[s] - chunk_bytes[s] == (plain if s == "s2" else 0)
        assert cl.route_key("plain", 5).to_primary
    assert total_docs >= 10_000
    verdict["detail"] = f"({total_docs} documents, {splits} splits checked by full scan)"


# -- 6 ---------------------------------------------------------------------


@pytest.mark.criterion(6, "join correctness")
def test_join_correctness(verdict):
    rng = random.Random(6)
    instances = 0
    linear_cheaper = star_cheaper = ties = 0
    coef = CostCoefficients(1, 1, 1, 1)
    for i in range(120):
        joins = rng.choice([3, 5, 7, 9])
        rows = int(math.exp(rng.uniform(0, math.log(1000))))
        domain = max(1, int(rows * rng.uniform(0.5, 10)))
        tables = synthetic_join_tables(joins + 1, rows, domain, seed=i)
        if rng.random() < 0.05:
            tables[f"t{rng.randrange(joins + 1)}"] = []
        names = [f"t{j}" for j in range(joins + 1)]
        expected = chained_join(tables, names, "k")
        lin = execute_join(JoinPlan.linear(names, "k"), tables)
        star = execute_join(JoinPlan.star(names, "k"), tables)
        assert lin.multiset() == expected, (i, joins, rows)
        assert star.multiset() == expected, (i, joins, rows)
        assert lin.multiset() == star.multiset()
        cl, cs = plan_cost(coef, lin.cost), plan_cost(coef, star.cost)
        linear_cheaper += cl < cs
        star_cheaper += cs < cl
        ties += cl == cs
        instances += 1
    assert instances >= 100
    verdict["detail"] = (
        f"({instances} instances; measured cost: linear cheaper {linear_cheaper}, "
        f"star cheaper {star_cheaper}, tie {ties})"
    )


# -- 7 ---------------------------------------------------------------------


def _hand_stats(records):
    total = len(records)
    by_status = {s: sum(1 for r in records if r.status is s) for s in Status}
    ages = [r.age for r in records if r.status is Status.DEAD and r.age is not None]
    return total, by_status, (sum(ages) / len(ages) if ages else None)


def _check_stats(records):
    s = compute_stats(records)
    total, by_status, avg = _hand_stats(records)
    assert s.total == total == s.active + s.recovered + s.deaths
    assert (s.active, s.recovered, s.deaths) == (by_status[Status.ACTIVE], by_status[Status.RECOVERED], by_status[Status.DEAD])
    assert s.deaths == sum(s.deaths_by_sex.values())
    assert sum(s.cases_by_age_band.values()) == sum(1 for r in records if r.age is not None)
    if avg is None:
        assert s.avg_age_of_deaths is None
    else:
        assert math.isclose(s.avg_age_of_deaths, avg, rel_tol=1e-12)


@pytest.mark.criterion(7, "statistics identities")
def test_statistics_identities(verdict, tmp_path):
    fixtures = 0
    for seed in range(30):
        mix = (random.Random(seed).random(), random.Random(seed + 1).random(), random.Random(seed + 2).random() + 0.01)
        _check_stats(generate_records(random.Random(seed).randint(0, 3000), seed=seed, status_mix=mix))
        fixtures += 1
    for seed in range(10):
        path = tmp_path / f"f{seed}.csv"
        write_line_list(path, 500, 0.2, seed=seed)
        _check_stats(parse_line_list(path).records)
        fixtures += 1
    _check_stats([])
    fixtures += 1

    public = []
    # Optional: POLYGATE_LINELISTS="profile=path:profile=path" runs on real files.
    for entry in filter(None, os.environ.get("POLYGATE_LINELISTS", "").split(os.pathsep)):
        profile, _, path = entry.partition("=")
        _check_stats(parse_line_list(path, profile).records)
        public.append(Path(path).name)
    extra = f", public files: {', '.join(public)}" if public else ", no public line lists supplied"
    verdict["detail"] = f"({fixtures} generated fixtures{extra})"


# -- 8 ---------------------------------------------------------------------


def _structure(rows):
    return [(r.workload, r.engine, r.scale, r.join_count, r.repetition, r.t_cpu, r.t_io, r.t_conn) for r in rows]


@pytest.mark.criterion(8, "benchmark shape")
def test_benchmark_shape(verdict):
    spec = BenchSpec("ingest", [1_000, 10_000, 100_000], engines=["DocumentStore"], repetitions=3, seed=8)
    rows = run_bench(spec)
    assert len(rows) == 9
    big = [r.elapsed_ms for r in rows if r.scale == 100_000]
    assert max(big) < 10_000, big
    summary = summarize(rows)
    medians = [e["median_elapsed_ms"] for e in summary]
    assert [e["scale"] for e in summary] == [1_000, 10_000, 100_000]
    assert all(a <= b for a, b in zip(medians, medians[1:])), medians

    joins = BenchSpec("joins", [200], engines=["Relational", "DocumentStore", "WideColumn"], repetitions=1, seed=8)
    jrows = run_bench(joins)
    for engine in ("Relational", "DocumentStore", "WideColumn"):
        assert [r.join_count for r in jrows if r.engine == engine] == [3, 5, 7, 9]
    jsum = [e for e in summarize(jrows) if e["engine"] == "DocumentStore"]
    assert [e["join_count"] for e in jsum] == [3, 5, 7, 9]
    csv_lines = report_csv(jrows).splitlines()
    assert len(csv_lines) == 1 + len(jrows)

    again = run_bench(joins)
    assert _structure(again) == _structure(jrows)
    small = BenchSpec("ingest", [100, 500], engines=["DocumentStore", "WideColumn"], repetitions=2, seed=8)
    assert _structure(run_bench(small)) == _structure(run_bench(small))
    verdict["detail"] = (
        f"(100k ingest median {medians[-1] / 1e3:.2f} s; medians ms "
        f"{', '.join(f'{m:.1f}' for m in medians)})"
    )


# -- 9 ---------------------------------------------------------------------


@pytest.mark.criterion(9, "parser totality")
def test_parser_totality(verdict, tmp_path, capsys):
    checked = 0
    for seed in range(5):
        path = tmp_path / f"corrupt{seed}.csv"
        n, valid, reasons = write_line_list(path, 2000, 0.4, seed=seed)
        res = parse_line_list(path)
        assert res.row_count == n
        assert len(res.records) + len(res.rejections) == n
        assert len(res.records) == valid
        got = {}
        for r in res.rejections:
            got[r.reason] = got.get(r.reason, 0) + 1
        assert got == reasons
        assert set(reasons) == set(CORRUPTIONS)
        checked += n
        assert cli_main(["ingest", str(path), "--k", "2"]) == 0
        capsys.readouterr()

    # byte-level damage: invalid UTF-8 and NUL characters
    raw = tmp_path / "bytes.csv"
    good = b"%d,30,male,Egypt,,2020-03-01,died,\n"
    body = [good % i for i in range(50)]
    body[7] = b"7,3\xff0,male,Egypt,,2020-03-01,died,\n"
    body[20] = b"20,30,male,Eg\x00ypt,,2020-03-01,died,\n"
    body[33] = b"\xfe\xfe\xfe\n"
    raw.write_bytes((",".join(HEADER) + "\n").encode() + b"".join(body))
    res = parse_line_list(raw)
    assert res.row_count == 50
    assert len(res.records) + len(res.rejections) == 50
    checked += 50
    verdict["detail"] = f"({checked} rows, every one a record or a rejection)"
