"""Query dialect detection.

A statement is tokenized, then matched against a corpus of dialect
signatures. Engines are tried in priority order and the first engine with a
matching signature wins, so a generic ``SELECT * FROM t`` resolves to the
relational engine even though it is also valid CQL.

Corpus files are tab-separated, one marker per line::

    engine  priority  marker-kind  pattern  [signature]

``marker-kind`` is one of ``prefix`` (case-insensitive literal prefix of the
normalized text), ``keyword`` (space-separated word sequence that must occur
contiguously in the token stream) or ``structural`` (regular expression
searched over the normalized text, case-insensitive). Markers sharing the same
engine and signature name must all match; an engine matches when any of its
signatures does. The optional fifth column defaults to ``default``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "EngineKind",
    "Token",
    "QueryStatement",
    "Marker",
    "DialectSignature",
    "SignatureCorpus",
    "CorpusError",
    "tokenize",
    "detect_engine",
    "load_corpus",
    "default_corpus",
    "reference_statements",
]


class EngineKind(enum.Enum):
    RELATIONAL = "Relational"
    DOCUMENT_STORE = "DocumentStore"
    WIDE_COLUMN = "WideColumn"
    KEY_VALUE_STORE = "KeyValueStore"
    GRAPH_STORE = "GraphStore"
    DOCUMENT_HTTP_STORE = "DocumentHttpStore"
    NO_ENGINE = "NoEngine"

    @classmethod
    def concrete(cls) -> list["EngineKind"]:
        return [k for k in cls if k is not cls.NO_ENGINE]

    @classmethod
    def parse(cls, name: str) -> "EngineKind":
        key = name.strip().lower()
        for kind in cls:
            if key in (kind.value.lower(), kind.name.lower()):
                return kind
        alias = _ENGINE_ALIASES.get(key)
        if alias is None:
            raise ValueError(f"unknown engine {name!r}")
        return alias

    def __str__(self) -> str:
        return self.value


# Product names accepted in corpus files alongside the domain labels.
_ENGINE_ALIASES = {
    "sql": EngineKind.RELATIONAL,
    "mongo": EngineKind.DOCUMENT_STORE,
    "cassandra": EngineKind.WIDE_COLUMN,
    "riak": EngineKind.KEY_VALUE_STORE,
    "neo4j": EngineKind.GRAPH_STORE,
    "couch": EngineKind.DOCUMENT_HTTP_STORE,
}


KEYWORDS = frozenset(
    """
    SELECT FROM WHERE AND OR NOT IN IS NULL INSERT INTO VALUES UPDATE SET
    DELETE IF EXISTS USING TTL TIMESTAMP ALLOW FILTERING LIMIT ORDER BY ASC
    DESC GROUP HAVING JOIN ON AS MATCH CREATE RETURN RETURNING MERGE DETACH
    REMOVE WITH KEY VALUE DISTINCT COUNT PRIMARY TABLE KEYSPACE
    """.split()
)

_PUNCT = {
    "<=": "LE",
    ">=": "GE",
    "<>": "NE",
    "!=": "NE",
    "->": "ARROW",
    "<-": "LARROW",
    "*": "STAR",
    ";": "SEMI",
    ".": "DOT",
    ",": "COMMA",
    "(": "LPAREN",
    ")": "RPAREN",
    "{": "LBRACE",
    "}": "RBRACE",
    "[": "LBRACKET",
    "]": "RBRACKET",
    ":": "COLON",
    "=": "EQ",
    "<": "LT",
    ">": "GT",
    "-": "MINUS",
    "+": "PLUS",
    "$": "DOLLAR",
    "/": "SLASH",
    "?": "QMARK",
    "&": "AMP",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>'(?:[^'\\]|\\.|'')*'|"(?:[^"\\]|\\.)*")
  | (?P<qident>`[^`]*`)
  | (?P<uuid>[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}\b)
  | (?P<number>0[xX][0-9a-fA-F]+|\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct><=|>=|<>|!=|->|<-|[*;.,(){}\[\]:=<>\-+$/?&])
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    """One lexical token.

    ``kind`` is ``KW``, ``IDENT``, ``QIDENT``, ``STRING``, ``NUMBER``,
    ``UUID``, a punctuation name such as ``STAR``, or ``OTHER`` for anything
    the lexer does not recognise. ``text`` is upper-cased for keywords;
    ``source`` always keeps the original spelling.
    """

    kind: str
    text: str
    source: str = field(default="", compare=False, repr=False)

    def __str__(self) -> str:
        if self.kind == "KW":
            return self.text
        if self.kind in ("IDENT", "QIDENT"):
            return f"ident({self.text})"
        if self.kind == "OTHER":
            return f"opaque({self.text})"
        return self.kind

    @property
    def word(self) -> str | None:
        """Upper-cased word for keywords and identifiers, else None."""
        if self.kind in ("KW", "IDENT"):
            return self.text.upper()
        return None

    @property
    def literal(self):
        """Python value of a STRING/NUMBER/UUID token."""
        if self.kind == "STRING":
            body = self.text[1:-1]
            if self.text[0] == "'":
                body = body.replace("''", "'")
            return re.sub(r"\\(.)", r"\1", body)
        if self.kind == "UUID":
            return self.text.lower()
        if self.kind == "NUMBER":
            if self.text[:2].lower() == "0x":
                return int(self.text, 16)
            if re.fullmatch(r"\d+", self.text):
                return int(self.text)
            return float(self.text)
        raise TypeError(f"{self} is not a literal")


@dataclass(frozen=True)
class QueryStatement:
    raw: str
    tokens: tuple[Token, ...]

    @property
    def text(self) -> str:
        """Whitespace-normalized statement text used by pattern markers."""
        return _normalize(self.raw)

    def words(self) -> list[str]:
        return [str(t) if t.word is None else t.word for t in self.tokens]


def _normalize(raw: str) -> str:
    text = re.sub(r"\s*\.\s*", ".", raw.strip())
    return re.sub(r"\s+", " ", text)


def tokenize(raw: str) -> QueryStatement:
    tokens = []
    for m in _TOKEN_RE.finditer(raw):
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            continue
        if kind == "word":
            if text.upper() in KEYWORDS:
                tokens.append(Token("KW", text.upper(), text))
            else:
                tokens.append(Token("IDENT", text, text))
        elif kind == "qident":
            tokens.append(Token("QIDENT", text[1:-1], text))
        elif kind in ("string", "number", "uuid"):
            tokens.append(Token(kind.upper(), text, text))
        elif kind == "punct":
            tokens.append(Token(_PUNCT[text], text, text))
        else:
            tokens.append(Token("OTHER", text, text))
    return QueryStatement(raw=raw, tokens=tuple(tokens))


MARKER_KINDS = ("prefix", "keyword", "structural")


@dataclass(frozen=True)
class Marker:
    kind: str
    pattern: str
    _regex: re.Pattern | None = field(default=None, compare=False, repr=False)

    @classmethod
    def build(cls, kind: str, pattern: str) -> "Marker":
        if kind not in MARKER_KINDS:
            raise CorpusError(f"unknown marker kind {kind!r}")
        if not pattern:
            raise CorpusError("empty marker pattern")
        regex = None
        if kind == "structural":
            try:
                regex = re.compile(pattern, re.IGNORECASE | re.DOTALL)
            except re.error as exc:
                raise CorpusError(f"bad structural pattern {pattern!r}: {exc}") from None
        return cls(kind, pattern, regex)

    def matches(self, qs: QueryStatement, text: str, words: Sequence[str]) -> bool:
        if self.kind == "prefix":
            return text.lower().startswith(self.pattern.lower())
        if self.kind == "structural":
            return self._regex.search(text) is not None
        needle = self.pattern.upper().split()
        n = len(needle)
        return any(list(words[i : i + n]) == needle for i in range(len(words) - n + 1))


@dataclass(frozen=True)
class DialectSignature:
    engine: EngineKind
    name: str
    priority: int
    markers: tuple[Marker, ...]

    def matches(self, qs: QueryStatement, text: str | None = None, words=None) -> bool:
        text = qs.text if text is None else text
        words = qs.words() if words is None else words
        return all(m.matches(qs, text, words) for m in self.markers)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class SignatureCorpus:
    signatures: tuple[DialectSignature, ...]
    version: str = "unversioned"

    def __post_init__(self):
        _validate(self.signatures)

    def priority_of(self, engine: EngineKind) -> int:
        for sig in self.signatures:
            if sig.engine is engine:
                return sig.priority
        raise KeyError(engine)

    def engines(self) -> list[EngineKind]:
        """Engines in priority order."""
        seen = {}
        for sig in self.signatures:
            seen.setdefault(sig.engine, sig.priority)
        return sorted(seen, key=seen.__getitem__)

    def by_engine(self, engine: EngineKind) -> list[DialectSignature]:
        return [s for s in self.signatures if s.engine is engine]


def _validate(signatures: Sequence[DialectSignature]) -> None:
    if not signatures:
        raise CorpusError("corpus has no signatures")
    priorities: dict[EngineKind, int] = {}
    for sig in signatures:
        if sig.engine is EngineKind.NO_ENGINE:
            raise CorpusError("NoEngine cannot carry a signature")
        if not sig.markers:
            raise CorpusError(f"{sig.engine} signature {sig.name!r} has zero markers")
        known = priorities.setdefault(sig.engine, sig.priority)
        if known != sig.priority:
            raise CorpusError(
                f"{sig.engine} declared with priorities {known} and {sig.priority}"
            )
    owners: dict[int, EngineKind] = {}
    for engine, prio in priorities.items():
        if prio in owners:
            raise CorpusError(
                f"duplicate priority {prio} for {owners[prio]} and {engine}"
            )
        owners[prio] = engine
    missing = set(EngineKind.concrete()) - set(priorities)
    if missing:
        names = ", ".join(sorted(k.value for k in missing))
        raise CorpusError(f"no signature for engine(s): {names}")


def detect_engine(qs: QueryStatement | str, corpus: SignatureCorpus) -> EngineKind:
    if isinstance(qs, str):
        qs = tokenize(qs)
    text = qs.text
    if not text:
        return EngineKind.NO_ENGINE
    words = qs.words()
    for engine in corpus.engines():
        if any(sig.matches(qs, text, words) for sig in corpus.by_engine(engine)):
            return engine
    return EngineKind.NO_ENGINE


def parse_corpus(lines: Iterable[str], version: str = "unversioned") -> SignatureCorpus:
    grouped: dict[tuple[EngineKind, str], list] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            if line.startswith("#") and line[1:].strip().lower().startswith("version:"):
                version = line.split(":", 1)[1].strip()
            continue
        parts = line.split("\t")
        if len(parts) not in (4, 5):
            raise CorpusError(f"line {lineno}: expected 4 or 5 tab-separated fields")
        engine_name, prio_text, kind, pattern = parts[:4]
        sig_name = parts[4].strip() if len(parts) == 5 and parts[4].strip() else "default"
        try:
            engine = EngineKind.parse(engine_name)
            priority = int(prio_text)
        except ValueError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
        marker = Marker.build(kind.strip(), pattern)
        entry = grouped.setdefault((engine, sig_name), [priority, []])
        if entry[0] != priority:
            raise CorpusError(f"line {lineno}: {engine} declared with two priorities")
        entry[1].append(marker)
    signatures = tuple(
        DialectSignature(engine, name, prio, tuple(markers))
        for (engine, name), (prio, markers) in grouped.items()
    )
    return SignatureCorpus(signatures, version)


def load_corpus(path: str | Path) -> SignatureCorpus:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorpusError(f"corpus file not found: {path}") from None
    return parse_corpus(text.splitlines(), version=path.name)


_DEFAULT: SignatureCorpus | None = None


def default_corpus() -> SignatureCorpus:
    global _DEFAULT
    if _DEFAULT is None:
        ref = resources.files("polygate") / "data" / "corpus.tsv"
        _DEFAULT = parse_corpus(ref.read_text(encoding="utf-8").splitlines())
    return _DEFAULT


def reference_statements() -> list[tuple[EngineKind, str, str]]:
    """Bundled CRUD example statements as ``(engine, family, text)``.

    The expected engine is the one the statement is routed to, which for
    generic SELECT/INSERT shared with CQL is Relational.
    """
    ref = resources.files("polygate") / "data" / "statements.tsv"
    out = []
    for line in ref.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        engine, family, text = line.split("\t", 2)
        out.append((EngineKind.parse(engine), family, text.replace("\\n", "\n")))
    return out
