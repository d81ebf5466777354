"""Desk-scale benchmark harness.

Workloads: ``ingest`` (timed inserts, ingestion rate), ``retrieve`` (full
scan plus a status filter), ``joins`` (multi-way joins per join count) and
``stats`` (scan plus summary statistics). Elapsed times are wall-clock
milliseconds; t_cpu/t_io/t_conn are abstract counts taken from the engines.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cost import CostVector, average_time, ingestion_rate
from .engines.document import DEFAULT_CHUNK_SIZE, Document, ShardedCluster
from .engines.relational import RelationalStore
from .engines.widecolumn import TokenRing, WideColumnStore
from .ingest.records import CaseRecord, IngestError, Sex, Status, parse_line_list
from .query import JoinPlan, compute_stats, execute_join, synthetic_join_tables

CSV_COLUMNS = (
    "workload",
    "engine",
    "scale",
    "join_count",
    "repetition",
    "elapsed_ms",
    "t_cpu",
    "t_io",
    "t_conn",
    "ingestion_rate",
    "external_baseline",
)
UNITS = {
    "elapsed_ms": "milliseconds, wall clock",
    "t_cpu": "abstract count: predicate evaluations, hash probes and key comparisons",
    "t_io": "abstract count: rows read or written",
    "t_conn": "abstract count: engine dispatches",
    "ingestion_rate": "records per second",
}
BENCH_ENGINES = ("Relational", "DocumentStore", "WideColumn")
TABLE = "cases"


class Workload(str, enum.Enum):
    INGEST = "ingest"
    RETRIEVE = "retrieve"
    JOINS = "joins"
    STATS = "stats"


class BenchError(ValueError):
    pass


@dataclass
class BenchSpec:
    workload: Workload
    scales: list[int]
    engines: list[str] = field(default_factory=lambda: ["DocumentStore"])
    dataset: Optional[str] = None  # CSV path; synthetic records when None
    profile: str = "generic"
    seed: int = 0
    repetitions: int = 5
    join_counts: list[int] = field(default_factory=lambda: [3, 5, 7, 9])
    join_shape: str = "linear"
    status_mix: tuple[float, float, float] = (0.80, 0.15, 0.05)
    chunk_size: int = DEFAULT_CHUNK_SIZE
    node_count: int = 3
    replication: int = 1
    parallel: bool = False

    def __post_init__(self):
        self.workload = Workload(self.workload)
        self.scales = [int(s) for s in self.scales]
        self.join_counts = [int(j) for j in self.join_counts]
        self.status_mix = tuple(float(x) for x in self.status_mix)
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise BenchError("scales must be strictly increasing")
        if any(s < 0 for s in self.scales):
            raise BenchError("scales must be >= 0")
        if self.repetitions < 1:
            raise BenchError("repetitions must be >= 1")
        if any(j < 1 for j in self.join_counts):
            raise BenchError("join counts must be >= 1")
        unknown = [e for e in self.engines if e not in BENCH_ENGINES]
        if unknown or not self.engines:
            raise BenchError(f"engines must be a non-empty subset of {BENCH_ENGINES}; got {unknown}")
        if self.join_shape not in ("linear", "star"):
            raise BenchError("join_shape must be linear or star")
        if len(self.status_mix) != 3 or min(self.status_mix) < 0 or sum(self.status_mix) <= 0:
            raise BenchError("status_mix needs three non-negative weights (active, recovered, dead)")
        if not 1 <= self.replication <= self.node_count:
            raise BenchError("replication must lie in [1, node_count]")

    @classmethod
    def from_json(cls, doc: dict) -> "BenchSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise BenchError(f"unknown bench spec field(s): {', '.join(sorted(extra))}")
        return cls(**doc)


@dataclass
class BenchRow:
    workload: str
    engine: str
    scale: int
    join_count: Optional[int]
    repetition: int
    elapsed_ms: float
    t_cpu: float
    t_io: float
    t_conn: float
    ingestion_rate: Optional[float] = None
    external_baseline: Optional[float] = None

    def group(self) -> tuple:
        return (self.workload, self.engine, self.scale, self.join_count)


def generate_records(
    n: int,
    seed: int = 0,
    status_mix: Sequence[float] = (0.80, 0.15, 0.05),
    start: dt.date = dt.date(2020, 1, 22),
    days: int = 120,
) -> list[CaseRecord]:
    """Seeded synthetic line-list records.

    About 5% of records have no age and about 10% link to an earlier case.
    """
    rng = np.random.default_rng(seed)
    p = np.asarray(status_mix, dtype=float)
    statuses = rng.choice(3, size=n, p=p / p.sum())
    ages = rng.integers(0, 100, size=n)
    no_age = rng.random(n) < 0.05
    sexes = rng.choice(3, size=n, p=[0.48, 0.48, 0.04])
    offsets = rng.integers(0, days, size=n)
    countries = rng.choice(["China", "Italy", "Iran", "Korea", "Spain", "Germany"], size=n)
    linked = rng.random(n) < 0.10
    link_to = rng.integers(0, np.maximum(np.arange(n), 1))
    status_of = [Status.ACTIVE, Status.RECOVERED, Status.DEAD]
    sex_of = [Sex.MALE, Sex.FEMALE, Sex.UNKNOWN]
    out = []
    for i in range(n):
        out.append(
            CaseRecord(
                id=f"c{i:07d}",
                date_confirmed=start + dt.timedelta(days=int(offsets[i])),
                status=status_of[statuses[i]],
                country=str(countries[i]),
                age=None if no_age[i] else float(ages[i]),
                sex=sex_of[sexes[i]],
                linked_id=f"c{int(link_to[i]):07d}" if linked[i] and i > 0 else None,
            )
        )
    return out


# -- engine adapters -------------------------------------------------------

_COLUMNS = ("id", "age", "sex", "country", "province", "date_confirmed", "status", "linked_id")


class BenchEngine:
    """Uniform create/insert/scan/filter surface over the three engines."""

    def __init__(self, kind: str, spec: BenchSpec):
        self.kind = kind
        if kind == "Relational":
            self.store = RelationalStore()
        elif kind == "DocumentStore":
            self.store = ShardedCluster(
                shards=[f"shard{i}" for i in range(spec.node_count)], chunk_size=spec.chunk_size
            )
        else:
            ring = TokenRing(spec.node_count, spec.replication, seed=spec.seed)
            self.store = WideColumnStore(ring)

    def create(self, name: str, columns: Sequence[str], key: str) -> None:
        if self.kind == "Relational":
            self.store.create_table(name, columns)
        elif self.kind == "DocumentStore":
            self.store.create_collection(name, sharded=True, shard_key=key)
        else:
            self.store.create_table(name, key, columns)

    def insert(self, name: str, row: dict, key: str) -> None:
        if self.kind == "Relational":
            self.store.insert(name, row)
        elif self.kind == "DocumentStore":
            self.store.insert_document(name, Document.from_body(row, key))
        else:
            self.store.put(name, row)

    def scan(self, name: str) -> list[dict]:
        if self.kind == "DocumentStore":
            return self.store.find(name).rows
        return self.store.scan(name)

    def dead_cases(self) -> CostVector:
        if self.kind == "Relational":
            res = self.store.execute(f"SELECT * FROM {TABLE} WHERE status = 'dead';")
        elif self.kind == "DocumentStore":
            res = self.store.find(TABLE, {"status": "dead"})
        else:
            res = self.store.execute(f"SELECT * FROM {TABLE} WHERE status = 'dead' ALLOW FILTERING;")
        return CostVector(res.comparisons, res.rows_read, 1)


def load_cases(engine: BenchEngine, rows: list[dict]) -> None:
    engine.create(TABLE, _COLUMNS, "id")
    for row in rows:
        engine.insert(TABLE, row, "id")


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - start) * 1e3


def _dataset(spec: BenchSpec) -> list[CaseRecord]:
    top = spec.scales[-1] if spec.scales else 0
    if spec.dataset is None:
        return generate_records(top, spec.seed, spec.status_mix)
    try:
        return parse_line_list(spec.dataset, spec.profile).records
    except IngestError as exc:
        raise BenchError(f"dataset {spec.dataset}: {exc}") from None


def _engine_rows(kind: str, spec: BenchSpec, records: list[CaseRecord]) -> list[BenchRow]:
    rows: list[BenchRow] = []
    w = spec.workload.value
    for scale in spec.scales:
        sample = records[:scale]
        n = len(sample)
        dicts = [r.to_dict() for r in sample]
        if spec.workload is Workload.JOINS:
            tables = synthetic_join_tables(max(spec.join_counts) + 1, scale, max(scale, 1), spec.seed)
            for jc in spec.join_counts:
                names = [f"t{i}" for i in range(jc + 1)]
                plan = (JoinPlan.linear if spec.join_shape == "linear" else JoinPlan.star)(names, "k")
                for rep in range(spec.repetitions):
                    engine = BenchEngine(kind, spec)
                    for name in names:
                        engine.create(name, ("id", "k", "age", "status"), "id")
                        for row in tables[name]:
                            engine.insert(name, row, "id")
                    res, ms = _timed(lambda: execute_join(plan, engine))
                    c = res.cost
                    rows.append(BenchRow(w, kind, scale, jc, rep, ms, c.t_cpu, c.t_io, c.t_conn))
            continue
        for rep in range(spec.repetitions):
            engine = BenchEngine(kind, spec)
            if spec.workload is Workload.INGEST:
                _, ms = _timed(lambda: load_cases(engine, dicts))
                rate = ingestion_rate(n, max(ms, 1e-6) / 1e3) if n else 0.0
                rows.append(BenchRow(w, kind, n, None, rep, ms, 0, n, n, rate))
                continue
            load_cases(engine, dicts)
            if spec.workload is Workload.RETRIEVE:
                cost, ms = _timed(engine.dead_cases)
            else:
                def stats_run():
                    got = engine.scan(TABLE)
                    compute_stats([CaseRecord.from_dict(d) for d in got])
                    return CostVector(0, len(got), 1)

                cost, ms = _timed(stats_run)
            rows.append(BenchRow(w, kind, n, None, rep, ms, cost.t_cpu, cost.t_io, cost.t_conn))
    return rows


def run_bench(spec: BenchSpec) -> list[BenchRow]:
    """Run every (engine, scale, [join count,] repetition) cell of ``spec``.

    Rows come back in engine order (Relational, DocumentStore, WideColumn),
    then scale, then join count, then repetition.
    """
    records = [] if spec.workload is Workload.JOINS else _dataset(spec)
    kinds = [e for e in BENCH_ENGINES if e in spec.engines]
    if spec.parallel and len(kinds) > 1:
        with ThreadPoolExecutor(len(kinds)) as pool:
            parts = list(pool.map(lambda k: _engine_rows(k, spec, records), kinds))
    else:
        parts = [_engine_rows(k, spec, records) for k in kinds]
    return [row for part in parts for row in part]


# -- reporting -------------------------------------------------------------


def summarize(rows: Sequence[BenchRow]) -> list[dict]:
    """Per-group medians plus the average-time and ingestion-rate aggregates.

    ``avg_ms_per_join`` divides the median elapsed time by the join count;
    ``ingestion_rate`` divides the scale by the median elapsed time in seconds.
    """
    groups: dict[tuple, list[BenchRow]] = {}
    for r in rows:
        groups.setdefault(r.group(), []).append(r)
    out = []
    for (workload, engine, scale, jc), members in groups.items():
        med = statistics.median(m.elapsed_ms for m in members)
        entry = {
            "workload": workload,
            "engine": engine,
            "scale": scale,
            "join_count": jc,
            "repetitions": len(members),
            "median_elapsed_ms": med,
            "median_t_cpu": statistics.median(m.t_cpu for m in members),
            "median_t_io": statistics.median(m.t_io for m in members),
            "median_t_conn": statistics.median(m.t_conn for m in members),
        }
        if jc is not None:
            entry["avg_ms_per_join"] = average_time(med, jc)
        if workload == Workload.INGEST.value:
            entry["ingestion_rate"] = ingestion_rate(scale, max(med, 1e-6) / 1e3) if scale else 0.0
        out.append(entry)
    return out


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = asdict(r)
        w.writerow([_cell(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def report_json(rows: Sequence[BenchRow]) -> str:
    doc = {
        "units": UNITS,
        "columns": list(CSV_COLUMNS),
        "rows": [asdict(r) for r in rows],
        "summary": summarize(rows),
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def emit_report(
    rows: Sequence[BenchRow], path: str | Path, fmt: str = "csv", allow_empty: bool = False
) -> list[Path]:
    """Write the report and return the files written.

    CSV output gets a companion ``<name>.summary.json`` holding units and the
    per-group summary; JSON output carries both in one document.
    """
    if not rows and not allow_empty:
        raise BenchError("no rows to report (pass allow_empty to write an empty report)")
    path = Path(path)
    try:
        if fmt == "csv":
            path.write_text(report_csv(rows), encoding="utf-8")
            side = path.with_suffix(".summary.json")
            side.write_text(
                json.dumps({"units": UNITS, "summary": summarize(rows)}, indent=2) + "\n",
                encoding="utf-8",
            )
            return [path, side]
        if fmt == "json":
            path.write_text(report_json(rows), encoding="utf-8")
            return [path]
    except OSError as exc:
        raise BenchError(f"cannot write report {path}: {exc}") from None
    raise BenchError(f"unknown report format {fmt!r}")
