"""Executor for document-store shell statements such as
``db.People.find({age: {$gt: 30}})``.

Arguments are JavaScript-style object literals: unquoted keys, single or
double quoted strings, numbers, ``true``/``false``/``null``, arrays.
"""

from __future__ import annotations

import re
from typing import Any

from ..dialect import QueryStatement
from .base import ExecResult, UnsupportedStatement
from .document import Document, ShardedCluster

ENGINE = "DocumentStore"

_CALL_RE = re.compile(r"^\s*db\s*\.\s*([A-Za-z_$][\w$]*)\s*\.\s*([A-Za-z_]\w*)\s*\((.*)\)\s*;?\s*$", re.DOTALL)

_LEX_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<str>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<num>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_$][\w$]*)
  | (?P<punct>[{}\[\]:,])
    """,
    re.VERBOSE,
)


def _lex(text: str) -> list[tuple[str, str]]:
    out, pos = [], 0
    while pos < len(text):
        m = _LEX_RE.match(text, pos)
        if m is None:
            raise UnsupportedStatement(f"cannot parse {text[pos:pos + 20]!r}", ENGINE)
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group()))
        pos = m.end()
    return out


class _Literal:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        kind, text = self.peek()
        if kind is None or (value is not None and text != value):
            raise UnsupportedStatement(f"expected {value or 'a value'}", ENGINE)
        self.i += 1
        return kind, text

    def value(self) -> Any:
        kind, text = self.peek()
        if text == "{":
            return self.obj()
        if text == "[":
            return self.array()
        self.take()
        if kind == "str":
            return re.sub(r"\\(.)", r"\1", text[1:-1])
        if kind == "num":
            return float(text) if re.search(r"[.eE]", text) else int(text)
        if kind == "name":
            consts = {"true": True, "false": False, "null": None}
            if text in consts:
                return consts[text]
        raise UnsupportedStatement(f"unexpected {text!r}", ENGINE)

    def obj(self) -> dict:
        self.take("{")
        out = {}
        while self.peek()[1] != "}":
            kind, text = self.take()
            key = text[1:-1] if kind == "str" else text
            self.take(":")
            out[key] = self.value()
            if self.peek()[1] == ",":
                self.take(",")
        self.take("}")
        return out

    def array(self) -> list:
        self.take("[")
        out = []
        while self.peek()[1] != "]":
            out.append(self.value())
            if self.peek()[1] == ",":
                self.take(",")
        self.take("]")
        return out

    def arguments(self) -> list:
        args = []
        while self.peek()[0] is not None:
            args.append(self.value())
            if self.peek()[1] == ",":
                self.take(",")
        return args


def parse_call(raw: str) -> tuple[str, str, list]:
    """Split a shell statement into (collection, lower-cased method, args)."""
    m = _CALL_RE.match(raw)
    if m is None:
        raise UnsupportedStatement("not a db.<collection>.<method>(...) call", ENGINE)
    coll, method, args = m.groups()
    return coll, method.lower(), _Literal(_lex(args)).arguments()


def shell_exec(cluster: ShardedCluster, statement: QueryStatement | str) -> ExecResult:
    raw = statement.raw if isinstance(statement, QueryStatement) else statement
    coll, method, args = parse_call(raw)

    if method in ("find", "findone"):
        res = cluster.find(coll, args[0] if args else {})
        if len(args) > 1 and args[1]:
            keep = [k for k, v in args[1].items() if v]
            res.rows = [{k: r[k] for k in keep if k in r} for r in res.rows]
        if method == "findone":
            res.rows = res.rows[:1]
        return res

    if method in ("insert", "insertone", "insertmany", "save"):
        if not args:
            raise UnsupportedStatement(f"{method} needs a document", ENGINE)
        bodies = args[0] if isinstance(args[0], list) else [args[0]]
        res = ExecResult()
        for body in bodies:
            with cluster.lock.write():
                c = cluster.collections.get(coll)
                key_field = c.shard_key if c is not None else "_id"
                if key_field not in body:
                    if key_field != "_id":
                        raise UnsupportedStatement(f"document lacks shard key {key_field!r}", ENGINE)
                    body = {"_id": _next_id(cluster, coll), **body}
                cluster._insert(coll, Document.from_body(body, key_field))
            res.rows.append(dict(body))
        res.affected = len(res.rows)
        return res

    if method in ("update", "updateone", "updatemany", "replaceone"):
        if len(args) < 2:
            raise UnsupportedStatement(f"{method} needs a filter and an update", ENGINE)
        opts = args[2] if len(args) > 2 and isinstance(args[2], dict) else {}
        multi = method == "updatemany" or bool(opts.get("multi"))
        return cluster.update(coll, args[0], args[1], multi=multi)

    if method in ("remove", "deletemany", "deleteone"):
        filt = args[0] if args else {}
        return cluster.delete(coll, filt, many=method != "deleteone")

    raise UnsupportedStatement(f"unsupported method {method!r}", ENGINE)


def _next_id(cluster: ShardedCluster, coll: str) -> int:
    c = cluster.collections.get(coll)
    ids = [d.body["_id"] for d in c.all_documents() if isinstance(d.body.get("_id"), int)] if c else []
    return max(ids, default=0) + 1
