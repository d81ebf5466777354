"""Parser for the SQL/CQL CRUD subset shared by the relational and
wide-column executors.

Supported shapes::

    SELECT * | col, ... FROM [ks.]table [WHERE pred AND ...] [ALLOW FILTERING]
    INSERT INTO [ks.]table [(col, ...)] VALUES (v, ...)[, (v, ...)] [IF NOT EXISTS]
    UPDATE [ks.]table [USING TTL n] SET col = v, ... WHERE pred AND ... [IF EXISTS]
    DELETE [* | col, ...] FROM [ks.]table [WHERE pred AND ...] [IF EXISTS]

A predicate is ``col op literal`` with op in ``= <> != < <= > >=``.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Any, Optional

from ..dialect import QueryStatement, Token
from .base import UnsupportedStatement

_OPS = {
    "EQ": operator.eq,
    "NE": operator.ne,
    "LT": operator.lt,
    "LE": operator.le,
    "GT": operator.gt,
    "GE": operator.ge,
}


@dataclass(frozen=True)
class Predicate:
    column: str
    op: str
    value: Any

    def test(self, row: dict) -> bool:
        return compare(row.get(self.column), self.op, self.value)


def compare(left, op: str, right) -> bool:
    if left is None or right is None:
        if op == "EQ":
            return left is None and right is None
        if op == "NE":
            return (left is None) != (right is None)
        return False
    if isinstance(left, str) != isinstance(right, str):
        # SQL-style implicit conversion of numeric text
        try:
            if isinstance(left, str):
                left = type(right)(left)
            else:
                right = type(left)(right)
        except (TypeError, ValueError):
            return op == "NE"
    return _OPS[op](left, right)


@dataclass(frozen=True)
class TableRef:
    name: str
    keyspace: Optional[str] = None


@dataclass
class Select:
    table: TableRef
    columns: Optional[list[str]]  # None means *
    where: list[Predicate] = field(default_factory=list)
    allow_filtering: bool = False


@dataclass
class Insert:
    table: TableRef
    columns: Optional[list[str]]
    rows: list[list[Any]]
    if_not_exists: bool = False


@dataclass
class Update:
    table: TableRef
    assignments: dict[str, Any]
    where: list[Predicate]
    if_exists: bool = False


@dataclass
class Delete:
    table: TableRef
    columns: Optional[list[str]]  # None deletes whole rows
    where: list[Predicate] = field(default_factory=list)
    if_exists: bool = False


class _Parser:
    def __init__(self, tokens: tuple[Token, ...]):
        toks = list(tokens)
        while toks and toks[-1].kind == "SEMI":
            toks.pop()
        self.toks = toks
        self.i = 0

    def peek(self, offset: int = 0) -> Optional[Token]:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at_kw(self, *words: str) -> bool:
        for n, w in enumerate(words):
            t = self.peek(n)
            if t is None or t.word != w:
                return False
        return True

    def accept_kw(self, *words: str) -> bool:
        if self.at_kw(*words):
            self.i += len(words)
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.accept_kw(word):
            self.fail(f"expected {word}")

    def accept(self, kind: str) -> Optional[Token]:
        t = self.peek()
        if t is not None and t.kind == kind:
            self.i += 1
            return t
        return None

    def expect(self, kind: str) -> Token:
        t = self.accept(kind)
        if t is None:
            self.fail(f"expected {kind}")
        return t

    def fail(self, msg: str):
        t = self.peek()
        where = "end of statement" if t is None else repr(t.source or t.text)
        raise UnsupportedStatement(f"{msg} at {where}")

    def name(self) -> str:
        t = self.peek()
        if t is not None and t.kind in ("IDENT", "QIDENT", "KW"):
            self.i += 1
            return t.text if t.kind == "QIDENT" else t.source or t.text
        self.fail("expected a name")

    def table(self) -> TableRef:
        first = self.name()
        if self.accept("DOT"):
            return TableRef(self.name(), first)
        return TableRef(first)

    def name_list(self) -> list[str]:
        names = [self.name()]
        while self.accept("COMMA"):
            names.append(self.name())
        return names

    def value(self):
        t = self.peek()
        if t is None:
            self.fail("expected a value")
        if t.kind == "MINUS":
            self.i += 1
            return -self.expect("NUMBER").literal
        if t.kind in ("STRING", "NUMBER", "UUID"):
            self.i += 1
            return t.literal
        if t.word in ("NULL", "TRUE", "FALSE"):
            self.i += 1
            return {"NULL": None, "TRUE": True, "FALSE": False}[t.word]
        self.fail("expected a literal")

    def predicates(self) -> list[Predicate]:
        preds = [self.predicate()]
        while self.accept_kw("AND"):
            preds.append(self.predicate())
        return preds

    def predicate(self) -> Predicate:
        col = self.name()
        t = self.peek()
        if t is None or t.kind not in _OPS:
            self.fail("expected a comparison operator")
        self.i += 1
        return Predicate(col, t.kind, self.value())

    def done(self) -> None:
        if self.peek() is not None:
            self.fail("unexpected trailing input")

    def parse(self):
        if self.accept_kw("SELECT"):
            return self.select()
        if self.accept_kw("INSERT"):
            return self.insert()
        if self.accept_kw("UPDATE"):
            return self.update()
        if self.accept_kw("DELETE"):
            return self.delete()
        self.fail("expected SELECT, INSERT, UPDATE or DELETE")

    def select(self) -> Select:
        cols = None if self.accept("STAR") else self.name_list()
        self.expect_kw("FROM")
        stmt = Select(self.table(), cols)
        if self.accept_kw("WHERE"):
            stmt.where = self.predicates()
        stmt.allow_filtering = self.accept_kw("ALLOW", "FILTERING")
        self.done()
        return stmt

    def insert(self) -> Insert:
        self.expect_kw("INTO")
        table = self.table()
        cols = None
        if self.accept("LPAREN"):
            cols = self.name_list()
            self.expect("RPAREN")
        self.expect_kw("VALUES")
        rows = [self.tuple()]
        while self.accept("COMMA"):
            rows.append(self.tuple())
        stmt = Insert(table, cols, rows)
        stmt.if_not_exists = self.accept_kw("IF", "NOT", "EXISTS")
        self.done()
        return stmt

    def tuple(self) -> list:
        self.expect("LPAREN")
        vals = [self.value()]
        while self.accept("COMMA"):
            vals.append(self.value())
        self.expect("RPAREN")
        return vals

    def update(self) -> Update:
        table = self.table()
        if self.accept_kw("USING"):
            self.name()
            self.value()
        self.expect_kw("SET")
        assignments = {}
        while True:
            col = self.name()
            self.expect("EQ")
            assignments[col] = self.value()
            if not self.accept("COMMA"):
                break
        self.expect_kw("WHERE")
        stmt = Update(table, assignments, self.predicates())
        stmt.if_exists = self.accept_kw("IF", "EXISTS")
        self.done()
        return stmt

    def delete(self) -> Delete:
        cols = None
        if self.accept("STAR"):
            pass
        elif not self.at_kw("FROM"):
            cols = self.name_list()
        self.expect_kw("FROM")
        stmt = Delete(self.table(), cols)
        if self.accept_kw("USING"):
            self.name()
            self.value()
        if self.accept_kw("WHERE"):
            stmt.where = self.predicates()
        stmt.if_exists = self.accept_kw("IF", "EXISTS")
        self.done()
        return stmt


def parse_statement(qs: QueryStatement):
    """Parse a tokenized statement into Select/Insert/Update/Delete."""
    return _Parser(qs.tokens).parse()
