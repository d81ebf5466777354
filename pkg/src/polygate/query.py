"""Query processing: dialect routing, multi-way joins and case statistics."""

from __future__ import annotations

import csv
import io
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .cost import CostCoefficients, CostVector, plan_cost
from .dialect import EngineKind, QueryStatement, SignatureCorpus, detect_engine, tokenize
from .engines.base import EngineError, ExecResult
from .ingest.records import CaseRecord, Sex, Status


@dataclass
class QueryResult:
    rows: list[dict[str, Any]]
    cost: CostVector = field(default_factory=CostVector)
    elapsed_ms: float = 0.0
    engine: Optional[EngineKind] = None

    def multiset(self) -> Counter:
        return row_multiset(self.rows)


def row_multiset(rows) -> Counter:
    return Counter(tuple(sorted(r.items())) for r in rows)


# -- routing ---------------------------------------------------------------


class RoutingError(Exception):
    """Base for failures raised by :func:`route_and_execute`."""

    def __init__(self, message: str, result: QueryResult):
        super().__init__(message)
        self.result = result


class NoEngineError(RoutingError):
    pass


class EngineNotRegistered(RoutingError):
    pass


class EngineExecutionError(RoutingError):
    def __init__(self, message: str, result: QueryResult, engine: EngineKind):
        super().__init__(message, result)
        self.engine = engine


Executor = Callable[[QueryStatement], ExecResult]


def _executor(target) -> Executor:
    return target.execute if hasattr(target, "execute") else target


def route_and_execute(
    raw: str | QueryStatement,
    corpus: SignatureCorpus,
    engines: Mapping[EngineKind, Any],
) -> QueryResult:
    """Detect the dialect of ``raw`` and run it on the matching engine.

    ``engines`` maps an engine kind to an object with ``execute(statement)``
    or to a plain callable. The returned cost vector counts predicate
    evaluations (t_cpu), rows read (t_io) and engine dispatches (t_conn).
    """
    start = time.perf_counter()
    qs = raw if isinstance(raw, QueryStatement) else tokenize(raw)
    kind = detect_engine(qs, corpus)

    def result(rows=(), vec=CostVector()):
        return QueryResult(list(rows), vec, (time.perf_counter() - start) * 1e3, kind)

    if kind is EngineKind.NO_ENGINE:
        raise NoEngineError("no engine matches the statement", result())
    target = engines.get(kind)
    if target is None:
        raise EngineNotRegistered(f"no {kind} engine registered", result())
    try:
        res = _executor(target)(qs)
    except EngineError as exc:
        raise EngineExecutionError(
            f"{kind}: {exc}", result(vec=CostVector(0, 0, 1)), kind
        ) from exc
    return result(res.rows, CostVector(res.comparisons, res.rows_read, 1))


# -- joins -----------------------------------------------------------------


class JoinError(ValueError):
    pass


@dataclass(frozen=True)
class JoinPredicate:
    left_table: str
    left_column: str
    right_table: str
    right_column: str

    @classmethod
    def parse(cls, left: str, right: str) -> "JoinPredicate":
        lt, lc = left.split(".", 1)
        rt, rc = right.split(".", 1)
        return cls(lt, lc, rt, rc)

    def to_json(self) -> dict:
        return {
            "left": f"{self.left_table}.{self.left_column}",
            "right": f"{self.right_table}.{self.right_column}",
        }


@dataclass(frozen=True)
class JoinPlan:
    shape: str
    tables: tuple[str, ...]
    predicates: tuple[JoinPredicate, ...]

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        object.__setattr__(self, "predicates", tuple(self.predicates))
        if self.shape not in ("linear", "star"):
            raise JoinError(f"unknown join shape {self.shape!r}")
        if len(self.predicates) < 1:
            raise JoinError("a join plan needs at least one join")
        if len(self.tables) != len(self.predicates) + 1:
            raise JoinError(
                f"{len(self.tables)} tables cannot carry {len(self.predicates)} joins"
            )
        if len(set(self.tables)) != len(self.tables):
            raise JoinError("table names in a plan must be distinct")
        for i, p in enumerate(self.predicates):
            left = self.tables[i] if self.shape == "linear" else self.tables[0]
            if (p.left_table, p.right_table) != (left, self.tables[i + 1]):
                raise JoinError(
                    f"join {i + 1} of a {self.shape} plan must connect {left} to {self.tables[i + 1]}"
                )

    @property
    def join_count(self) -> int:
        return len(self.predicates)

    @classmethod
    def linear(cls, tables: Sequence[str], column: str | Sequence[tuple[str, str]]) -> "JoinPlan":
        """Chain ``t0 - t1 - ... - tn``; ``column`` is a shared key name or
        a list of (left column, right column) pairs."""
        pairs = [(column, column)] * (len(tables) - 1) if isinstance(column, str) else list(column)
        preds = [
            JoinPredicate(tables[i], lc, tables[i + 1], rc) for i, (lc, rc) in enumerate(pairs)
        ]
        return cls("linear", tuple(tables), tuple(preds))

    @classmethod
    def star(cls, tables: Sequence[str], column: str | Sequence[tuple[str, str]]) -> "JoinPlan":
        """Hub ``tables[0]`` joined to every other table."""
        pairs = [(column, column)] * (len(tables) - 1) if isinstance(column, str) else list(column)
        preds = [JoinPredicate(tables[0], lc, tables[i + 1], rc) for i, (lc, rc) in enumerate(pairs)]
        return cls("star", tuple(tables), tuple(preds))

    @classmethod
    def from_json(cls, doc: Mapping) -> "JoinPlan":
        preds = [JoinPredicate.parse(p["left"], p["right"]) for p in doc["predicates"]]
        return cls(doc["shape"], tuple(doc["tables"]), tuple(preds))

    def to_json(self) -> dict:
        return {
            "shape": self.shape,
            "tables": list(self.tables),
            "predicates": [p.to_json() for p in self.predicates],
        }


def _fetch(tables, name: str) -> list[dict]:
    if hasattr(tables, "scan"):
        return tables.scan(name)
    try:
        return tables[name]
    except KeyError:
        raise JoinError(f"unknown table {name!r}") from None


def _qualify(name: str, rows: list[dict]) -> list[dict]:
    return [{f"{name}.{k}": v for k, v in r.items()} for r in rows]


def execute_join(plan: JoinPlan, tables) -> QueryResult:
    """Run ``plan`` as a left-deep sequence of pairwise hash joins.

    Output rows carry ``table.column`` keys. The smaller side of each pair is
    the build side. t_cpu counts hash probes plus key comparisons inside the
    probed bucket, t_io counts base-table rows read, t_conn counts table
    fetches.
    """
    start = time.perf_counter()
    cpu = io_rows = conn = 0

    first = _fetch(tables, plan.tables[0])
    conn += 1
    io_rows += len(first)
    acc = _qualify(plan.tables[0], first)
    for pred, name in zip(plan.predicates, plan.tables[1:]):
        right_raw = _fetch(tables, name)
        conn += 1
        io_rows += len(right_raw)
        right = _qualify(name, right_raw)
        lkey = f"{pred.left_table}.{pred.left_column}"
        rkey = f"{pred.right_table}.{pred.right_column}"
        for side, key, label in ((acc, lkey, pred.left_table), (right, rkey, name)):
            if side and key not in side[0]:
                raise JoinError(f"missing join column {key!r} in {label}")
        acc, work = _hash_join(acc, lkey, right, rkey)
        cpu += work
    elapsed = (time.perf_counter() - start) * 1e3
    return QueryResult(acc, CostVector(cpu, io_rows, conn), elapsed)


def _hash_join(left, lkey, right, rkey) -> tuple[list[dict], int]:
    build_left = len(left) <= len(right)
    build, bkey, probe, pkey = (left, lkey, right, rkey) if build_left else (right, rkey, left, lkey)
    buckets: dict = {}
    for row in build:
        k = row.get(bkey)
        if k is not None:
            buckets.setdefault(k, []).append(row)
    out = []
    work = 0
    for prow in probe:
        work += 1  # probe
        k = prow.get(pkey)
        if k is None:
            continue
        for brow in buckets.get(k, ()):
            work += 1  # key comparison
            if brow[bkey] == k:
                merged = {**brow, **prow} if build_left else {**prow, **brow}
                out.append(merged)
    return out, work


@dataclass
class RankedPlan:
    plan: JoinPlan
    result: QueryResult
    cost: float


def compare_plans(
    plans: Sequence[JoinPlan], coef: CostCoefficients, tables
) -> list[RankedPlan]:
    """Execute every plan and rank by plan cost, ascending, ties in input order."""
    if len(plans) < 2:
        raise JoinError("need at least two plans to compare")
    schemas = {frozenset(p.tables) for p in plans}
    if len(schemas) != 1:
        raise JoinError("plans do not join the same tables")
    runs = [execute_join(p, tables) for p in plans]
    cols = {frozenset(r.rows[0]) for r in runs if r.rows}
    if len(cols) > 1:
        raise JoinError("plans produce different result schemas")
    ranked = [RankedPlan(p, r, plan_cost(coef, r.cost)) for p, r in zip(plans, runs)]
    order = sorted(range(len(ranked)), key=lambda i: (ranked[i].cost, i))
    return [ranked[i] for i in order]


def result_csv(result: QueryResult) -> str:
    buf = io.StringIO()
    cols = sorted({k for r in result.rows for k in r})
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(result.rows)
    return buf.getvalue()


def cost_sidecar(result: QueryResult, plan: JoinPlan | None = None, coef: CostCoefficients | None = None) -> dict:
    doc = {"rows": len(result.rows), **result.cost.as_dict()}
    if plan is not None:
        doc["plan"] = plan.to_json()
        doc["join_count"] = plan.join_count
    if coef is not None:
        doc["plan_cost"] = plan_cost(coef, result.cost)
    return doc


def synthetic_join_tables(
    n_tables: int, rows_per_table: int, key_domain: int, seed: int = 0, prefix: str = "t"
) -> dict[str, list[dict]]:
    """Line-list shaped tables sharing a join key ``k`` from ``range(key_domain)``.

    Every table joins every other on ``k``, so a chain and a star over the
    same tables describe the same result.
    """
    rng = np.random.default_rng(seed)
    statuses = [s.value for s in Status]
    out = {}
    for t in range(n_tables):
        keys = rng.integers(0, key_domain, size=rows_per_table)
        ages = rng.integers(0, 100, size=rows_per_table)
        stat = rng.integers(0, len(statuses), size=rows_per_table)
        out[f"{prefix}{t}"] = [
            {"id": f"{prefix}{t}-{i}", "k": int(k), "age": int(a), "status": statuses[s]}
            for i, (k, a, s) in enumerate(zip(keys, ages, stat))
        ]
    return out


# -- statistics ------------------------------------------------------------

AGE_BAND_WIDTH = 10


def age_band(age: float) -> str:
    lo = min(int(age // AGE_BAND_WIDTH) * AGE_BAND_WIDTH, 120)
    return f"{lo}-{lo + AGE_BAND_WIDTH}" if lo < 120 else "120-130"


def age_band_labels() -> list[str]:
    return [age_band(a) for a in range(0, 130, AGE_BAND_WIDTH)]


@dataclass
class StatsSummary:
    total: int = 0
    active: int = 0
    recovered: int = 0
    deaths: int = 0
    avg_age_of_deaths: Optional[float] = None
    deaths_by_sex: dict[str, int] = field(default_factory=dict)
    cases_by_age_band: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "active": self.active,
            "recovered": self.recovered,
            "deaths": self.deaths,
            "avg_age_of_deaths": self.avg_age_of_deaths,
            "deaths_by_sex": self.deaths_by_sex,
            "cases_by_age_band": self.cases_by_age_band,
        }


def compute_stats(records: Sequence[CaseRecord]) -> StatsSummary:
    """Totals by status, mean age at death, deaths by sex and cases per
    decade age band ([0,10), ..., [110,120), [120,130])."""
    s = StatsSummary(
        deaths_by_sex={x.value: 0 for x in Sex},
        cases_by_age_band=dict.fromkeys(age_band_labels(), 0),
    )
    death_ages = []
    for r in records:
        s.total += 1
        if r.status is Status.ACTIVE:
            s.active += 1
        elif r.status is Status.RECOVERED:
            s.recovered += 1
        else:
            s.deaths += 1
            s.deaths_by_sex[r.sex.value] += 1
            if r.age is not None:
                death_ages.append(r.age)
        if r.age is not None:
            s.cases_by_age_band[age_band(r.age)] += 1
    if death_ages:
        s.avg_age_of_deaths = sum(death_ages) / len(death_ages)
    return s
