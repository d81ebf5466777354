"""In-memory relational engine for the SQL CRUD subset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from ..dialect import QueryStatement, tokenize
from .base import (
    EngineError,
    ExecResult,
    ReadWriteLock,
    UnknownColumn,
    UnknownTable,
    UnsupportedStatement,
)
from .statements import Delete, Insert, Predicate, Select, Update, parse_statement

ENGINE = "Relational"


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def resolve(self, column: str) -> str:
        """Case-insensitive column lookup returning the declared spelling."""
        for c in self.columns:
            if c.lower() == column.lower():
                return c
        raise UnknownColumn(f"unknown column {column!r} in table {self.name!r}", ENGINE)


class RelationalStore:
    """A set of named tables guarded by one reader-writer lock."""

    def __init__(self):
        self.tables: dict[str, Table] = {}
        self.lock = ReadWriteLock()

    def create_table(self, name: str, columns: Iterable[str], rows=()) -> Table:
        key = name.lower()
        if key in self.tables:
            raise EngineError(f"table {name!r} already exists", ENGINE)
        table = Table(name, list(columns))
        for row in rows:
            table.rows.append({c: row.get(c) for c in table.columns})
        self.tables[key] = table
        return table

    def table(self, name: str) -> Table:
        try:
            return self.tables[name.lower()]
        except KeyError:
            raise UnknownTable(f"unknown table {name!r}", ENGINE) from None

    def insert(self, name: str, row: dict[str, Any]) -> None:
        """Append one row; columns missing from ``row`` are stored as NULL."""
        with self.lock.write():
            table = self.table(name)
            table.rows.append({c: row.get(c) for c in table.columns})

    def scan(self, name: str) -> list[dict[str, Any]]:
        with self.lock.read():
            return [dict(r) for r in self.table(name).rows]

    def execute(self, statement: QueryStatement | str) -> ExecResult:
        return relational_exec(self, statement)


def _bind(table: Table, preds: list[Predicate]) -> list[Predicate]:
    return [Predicate(table.resolve(p.column), p.op, p.value) for p in preds]


def _matches(row: dict, preds: list[Predicate], res: ExecResult) -> bool:
    for p in preds:
        res.comparisons += 1
        if not p.test(row):
            return False
    return True


def relational_exec(store: RelationalStore, statement: QueryStatement | str) -> ExecResult:
    """Run one SQL CRUD statement against ``store``.

    SELECT returns the selected rows; INSERT, UPDATE and DELETE return the
    affected rows (post-update for UPDATE).
    """
    if isinstance(statement, str):
        statement = tokenize(statement)
    stmt = parse_statement(statement)
    if stmt.table.keyspace is not None:
        raise UnsupportedStatement("qualified table names are not supported", ENGINE)
    res = ExecResult()

    if isinstance(stmt, Select):
        with store.lock.read():
            table = store.table(stmt.table.name)
            cols = table.columns if stmt.columns is None else [table.resolve(c) for c in stmt.columns]
            preds = _bind(table, stmt.where)
            for row in table.rows:
                res.rows_read += 1
                if _matches(row, preds, res):
                    res.rows.append({c: row[c] for c in cols})
        return res

    with store.lock.write():
        table = store.table(stmt.table.name)
        if isinstance(stmt, Insert):
            cols = table.columns if stmt.columns is None else [table.resolve(c) for c in stmt.columns]
            for values in stmt.rows:
                if len(values) != len(cols):
                    raise EngineError(
                        f"{len(values)} values for {len(cols)} columns", ENGINE
                    )
                row = dict.fromkeys(table.columns)
                row.update(zip(cols, values))
                table.rows.append(row)
                res.rows.append(dict(row))
        elif isinstance(stmt, Update):
            assignments = {table.resolve(c): v for c, v in stmt.assignments.items()}
            preds = _bind(table, stmt.where)
            for row in table.rows:
                res.rows_read += 1
                if _matches(row, preds, res):
                    row.update(assignments)
                    res.rows.append(dict(row))
        elif isinstance(stmt, Delete):
            if stmt.columns is not None:
                raise UnsupportedStatement("column deletion is not SQL", ENGINE)
            preds = _bind(table, stmt.where)
            kept = []
            for row in table.rows:
                res.rows_read += 1
                if _matches(row, preds, res):
                    res.rows.append(row)
                else:
                    kept.append(row)
            table.rows = kept
        res.affected = len(res.rows)
    return res
