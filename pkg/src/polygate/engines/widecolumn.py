"""Token-partitioned wide-column store.

The 64-bit hash space is cut into ``node_count`` equal contiguous token
ranges. A partition key is hashed with :func:`stable_hash64`; the node whose
range holds the token stores the primary copy and the next ``RF - 1`` nodes
clockwise hold replicas.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from ..dialect import QueryStatement, tokenize
from .base import (
    EngineError,
    ExecResult,
    ReadWriteLock,
    UnknownColumn,
    UnknownTable,
    UnsupportedStatement,
    encode_key,
    stable_hash64,
)
from .statements import Delete, Insert, Predicate, Select, Update, parse_statement

ENGINE = "WideColumn"
HASH_SPACE = 1 << 64


@dataclass(frozen=True)
class TokenRing:
    node_count: int
    replication_factor: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if not 1 <= self.replication_factor <= self.node_count:
            raise ValueError("replication factor must lie in [1, node_count]")

    def ranges(self) -> list[tuple[int, int]]:
        """Half-open token range ``[start, end)`` owned by each node."""
        bounds = [i * HASH_SPACE // self.node_count for i in range(self.node_count + 1)]
        return list(zip(bounds[:-1], bounds[1:]))

    def token(self, key) -> int:
        return stable_hash64(encode_key(key), self.seed)

    def owner(self, token: int) -> int:
        starts = [r[0] for r in self.ranges()]
        return bisect.bisect_right(starts, token) - 1


def assign_token(ring: TokenRing, partition_key) -> tuple[int, ...]:
    """Replica set for a key: owning node first, then clockwise."""
    first = ring.owner(ring.token(partition_key))
    return tuple((first + i) % ring.node_count for i in range(ring.replication_factor))


def partition_key_for(record, strategy: str) -> bytes:
    """Placement key of a case record under vertex or edge partitioning.

    Vertex partitioning places a record by its own id. Edge partitioning
    places it by the canonical (smaller id, larger id) pair of its contact
    link, so both ends of a contact land on the same node; records without a
    link form a self-loop ``(id, id)``.
    """
    if strategy == "vertex":
        return record.id.encode("utf-8")
    if strategy == "edge":
        other = record.linked_id or record.id
        a, b = sorted((record.id, other))
        return f"{a}\x00{b}".encode("utf-8")
    raise ValueError(f"unknown partitioning strategy {strategy!r}")


@dataclass
class PartitionAssignment:
    strategy: str
    ring: TokenRing
    keys: list[bytes]
    replicas: list[tuple[int, ...]]
    nodes: dict[int, list] = field(default_factory=dict)

    def counts(self) -> dict[int, int]:
        return {n: len(recs) for n, recs in self.nodes.items()}


def partition_records(records: Sequence, strategy: str, ring: TokenRing) -> PartitionAssignment:
    if not records:
        raise ValueError("cannot partition an empty record set")
    out = PartitionAssignment(strategy, ring, [], [], {n: [] for n in range(ring.node_count)})
    for rec in records:
        key = partition_key_for(rec, strategy)
        nodes = assign_token(ring, key)
        out.keys.append(key)
        out.replicas.append(nodes)
        for n in nodes:
            out.nodes[n].append(rec)
    return out


@dataclass
class WideTable:
    name: str
    partition_key: str
    columns: list[str]
    clustering_key: Optional[str] = None
    static_columns: tuple[str, ...] = ()

    def resolve(self, column: str) -> str:
        for c in self.columns:
            if c.lower() == column.lower():
                return c
        raise UnknownColumn(f"unknown column {column!r} in table {self.name!r}", ENGINE)


class WideColumnStore:
    """Rows live in per-node storage: ``node -> table -> pk -> ck -> row``."""

    def __init__(self, ring: TokenRing, keyspace: str = "db"):
        self.ring = ring
        self.keyspace = keyspace
        self.tables: dict[str, WideTable] = {}
        self.nodes: list[dict[str, dict]] = [dict() for _ in range(ring.node_count)]
        self.lock = ReadWriteLock()

    def create_table(
        self,
        name: str,
        partition_key: str,
        columns: Iterable[str],
        clustering_key: str | None = None,
    ) -> WideTable:
        cols = list(columns)
        for c in (partition_key, clustering_key):
            if c is not None and c not in cols:
                cols.insert(0, c)
        table = WideTable(name, partition_key, cols, clustering_key)
        if name.lower() in self.tables:
            raise EngineError(f"table {name!r} already exists", ENGINE)
        self.tables[name.lower()] = table
        for node in self.nodes:
            node[table.name] = {}
        return table

    def table(self, name: str, keyspace: str | None = None) -> WideTable:
        if keyspace is not None and keyspace.lower() != self.keyspace.lower():
            raise UnknownTable(f"unknown keyspace {keyspace!r}", ENGINE)
        try:
            return self.tables[name.lower()]
        except KeyError:
            raise UnknownTable(f"unknown table {name!r}", ENGINE) from None

    # -- row level API ---------------------------------------------------

    def put(self, table: str, row: dict[str, Any]) -> tuple[int, ...]:
        with self.lock.write():
            return self._put(self.table(table), row)

    def _put(self, t: WideTable, row: dict) -> tuple[int, ...]:
        if row.get(t.partition_key) is None:
            raise EngineError(f"missing partition key {t.partition_key!r}", ENGINE)
        ck = row.get(t.clustering_key) if t.clustering_key else None
        if t.clustering_key and ck is None:
            raise EngineError(f"missing clustering key {t.clustering_key!r}", ENGINE)
        pk = row[t.partition_key]
        replicas = assign_token(self.ring, pk)
        for n in replicas:
            part = self.nodes[n][t.name].setdefault(pk, {})
            stored = part.setdefault(ck, {})
            stored.update(row)
        return replicas

    def _partition(self, t: WideTable, pk) -> Optional[dict]:
        return self.nodes[assign_token(self.ring, pk)[0]][t.name].get(pk)

    def _primary_partitions(self, t: WideTable):
        for n, node in enumerate(self.nodes):
            for pk, part in node[t.name].items():
                if assign_token(self.ring, pk)[0] == n:
                    yield pk, part

    def scan(self, table: str) -> list[dict]:
        with self.lock.read():
            t = self.table(table)
            return [dict(r) for _, part in self._primary_partitions(t) for r in part.values()]

    def node_row_counts(self, table: str) -> list[int]:
        t = self.table(table)
        return [sum(len(p) for p in node[t.name].values()) for node in self.nodes]

    def execute(self, statement: QueryStatement | str) -> ExecResult:
        return cql_exec(self, statement)

    # -- statement helpers -------------------------------------------------

    def _candidate_rows(self, t: WideTable, preds: list[Predicate], res: ExecResult):
        pk = _eq_value(preds, t.partition_key)
        if pk is not None:
            res.comparisons += 1
            part = self._partition(t, pk)
            parts = [] if part is None else [(pk, part)]
        else:
            parts = list(self._primary_partitions(t))
        for pk_value, part in parts:
            for ck, row in part.items():
                res.rows_read += 1
                yield pk_value, ck, row

    def _mutate_replicas(self, t: WideTable, pk, fn) -> None:
        for n in assign_token(self.ring, pk):
            part = self.nodes[n][t.name].get(pk)
            if part is not None:
                fn(part)
                if not part:
                    del self.nodes[n][t.name][pk]


def _eq_value(preds: list[Predicate], column: str):
    for p in preds:
        if p.column == column and p.op == "EQ":
            return p.value
    return None


def _bind(t: WideTable, preds: list[Predicate]) -> list[Predicate]:
    return [Predicate(t.resolve(p.column), p.op, p.value) for p in preds]


def _matches(row: dict, preds: list[Predicate], res: ExecResult) -> bool:
    for p in preds:
        res.comparisons += 1
        if not p.test(row):
            return False
    return True


def cql_exec(store: WideColumnStore, statement: QueryStatement | str) -> ExecResult:
    """Run one CQL CRUD statement.

    INSERT and UPDATE are upserts unless guarded by IF NOT EXISTS / IF
    EXISTS. UPDATE needs the full primary key in its WHERE clause; DELETE
    needs at least the partition key.
    """
    if isinstance(statement, str):
        statement = tokenize(statement)
    stmt = parse_statement(statement)
    res = ExecResult()

    if isinstance(stmt, Select):
        with store.lock.read():
            t = store.table(stmt.table.name, stmt.table.keyspace)
            cols = t.columns if stmt.columns is None else [t.resolve(c) for c in stmt.columns]
            preds = _bind(t, stmt.where)
            for _, _, row in store._candidate_rows(t, preds, res):
                if _matches(row, preds, res):
                    res.rows.append({c: row.get(c) for c in cols})
        return res

    with store.lock.write():
        t = store.table(stmt.table.name, stmt.table.keyspace)
        if isinstance(stmt, Insert):
            cols = t.columns if stmt.columns is None else [t.resolve(c) for c in stmt.columns]
            for values in stmt.rows:
                if len(values) != len(cols):
                    raise EngineError(f"{len(values)} values for {len(cols)} columns", ENGINE)
                row = dict(zip(cols, values))
                if stmt.if_not_exists and _existing(store, t, row) is not None:
                    continue
                store._put(t, row)
                res.rows.append(row)
        elif isinstance(stmt, Update):
            preds = _bind(t, stmt.where)
            key = {t.partition_key: _eq_value(preds, t.partition_key)}
            if t.clustering_key:
                key[t.clustering_key] = _eq_value(preds, t.clustering_key)
            if any(v is None for v in key.values()):
                raise UnsupportedStatement("UPDATE needs the full primary key", ENGINE)
            assignments = {t.resolve(c): v for c, v in stmt.assignments.items()}
            if set(assignments) & set(key):
                raise UnsupportedStatement("primary key columns cannot be updated", ENGINE)
            res.comparisons += 1
            current = _existing(store, t, key)
            res.rows_read += current is not None
            if current is None and stmt.if_exists:
                pass
            elif current is None or _matches(current, preds, res):
                store._put(t, {**key, **assignments})
                res.rows.append(dict(_existing(store, t, key)))
        elif isinstance(stmt, Delete):
            preds = _bind(t, stmt.where)
            pk = _eq_value(preds, t.partition_key)
            if pk is None:
                raise UnsupportedStatement("DELETE needs the partition key", ENGINE)
            cols = None if stmt.columns is None else [t.resolve(c) for c in stmt.columns]
            if cols and set(cols) & {t.partition_key, t.clustering_key}:
                raise UnsupportedStatement("primary key columns cannot be deleted", ENGINE)
            doomed = [
                ck
                for _, ck, row in store._candidate_rows(t, preds, res)
                if _matches(row, preds, res)
            ]

            def drop(part: dict) -> None:
                for ck in doomed:
                    if ck not in part:
                        continue
                    if cols is None:
                        del part[ck]
                    else:
                        for c in cols:
                            part[ck].pop(c, None)

            primary = store._partition(t, pk) or {}
            res.rows = [dict(primary[ck]) for ck in doomed]
            store._mutate_replicas(t, pk, drop)
        res.affected = len(res.rows)
    return res


def _existing(store: WideColumnStore, t: WideTable, row: dict) -> Optional[dict]:
    part = store._partition(t, row[t.partition_key])
    if part is None:
        return None
    return part.get(row.get(t.clustering_key) if t.clustering_key else None)
