"""Simulated sharded document store.

Sharded collections are cut into chunks, each a half-open shard-key range
``[low, high)`` owned by one shard. When an insert pushes a chunk past the
chunk size and the chunk holds at least two distinct keys, it splits at its
median key; the upper half is handed to the least-loaded shard. Unsharded
collections live wholly on the primary shard.
"""

from __future__ import annotations

import bisect
import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

from ..capacity import MAX_BSON_DOCUMENT_SIZE
from .base import EngineError, ExecResult, ReadWriteLock, UnknownTable, encode_key

ENGINE = "DocumentStore"
DEFAULT_CHUNK_SIZE = 64 * 1024 * 1024


class OversizedDocument(EngineError):
    engine = ENGINE


class NotSharded(EngineError):
    engine = ENGINE


def body_size(body: dict) -> int:
    """Serialized size used for byte accounting (compact, key-sorted JSON)."""
    return len(json.dumps(body, sort_keys=True, separators=(",", ":"), default=str).encode())


@dataclass
class Document:
    key: Any
    body: dict[str, Any]
    byte_size: Optional[int] = None

    def __post_init__(self):
        if self.byte_size is None:
            self.byte_size = body_size(self.body)
        if self.byte_size < 0:
            raise ValueError("byte_size must be non-negative")

    @classmethod
    def from_body(cls, body: dict, shard_key: str = "_id", byte_size: int | None = None):
        if shard_key not in body:
            raise EngineError(f"document has no shard key field {shard_key!r}", ENGINE)
        return cls(body[shard_key], dict(body), byte_size)


@dataclass
class Chunk:
    low: bytes
    high: Optional[bytes]  # None is +infinity
    owner: str
    entries: list = field(default_factory=list)  # sorted (encoded key, seq, Document)
    byte_size: int = 0

    def contains(self, enc: bytes) -> bool:
        return self.low <= enc and (self.high is None or enc < self.high)

    @property
    def documents(self) -> list[Document]:
        return [e[2] for e in self.entries]

    def distinct_keys(self) -> int:
        return len({e[0] for e in self.entries})

    def add(self, enc: bytes, seq: int, doc: Document) -> None:
        bisect.insort(self.entries, (enc, seq, doc), key=lambda e: (e[0], e[1]))
        self.byte_size += doc.byte_size


@dataclass
class Collection:
    name: str
    sharded: bool
    shard_key: str
    chunks: list[Chunk] = field(default_factory=list)
    # unsharded storage; always on the primary shard
    documents: list[Document] = field(default_factory=list)

    def all_documents(self) -> Iterator[Document]:
        if self.sharded:
            for ch in self.chunks:
                yield from ch.documents
        else:
            yield from self.documents


@dataclass(frozen=True)
class Route:
    shard: str
    chunk: Optional[Chunk]

    @property
    def to_primary(self) -> bool:
        """True when the collection is unsharded and served by the primary."""
        return self.chunk is None


@dataclass
class SplitEvent:
    split_key: bytes
    lower_owner: str
    upper_owner: str


@dataclass
class PlacementReport:
    collection: str
    shard: str
    low: Optional[bytes] = None
    high: Optional[bytes] = None
    splits: list[SplitEvent] = field(default_factory=list)


class ShardedCluster:
    def __init__(
        self,
        shards: Iterable[str] = ("shard0", "shard1", "shard2"),
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        primary_shard: str | None = None,
        max_document_size: int = MAX_BSON_DOCUMENT_SIZE,
    ):
        self.shards = list(shards)
        if not self.shards:
            raise ValueError("a cluster needs at least one shard")
        if len(set(self.shards)) != len(self.shards):
            raise ValueError("shard identifiers must be unique")
        if chunk_size <= 0:
            raise ValueError("chunk_size must be > 0")
        self.chunk_size = chunk_size
        self.primary_shard = primary_shard or self.shards[0]
        if self.primary_shard not in self.shards:
            raise ValueError(f"primary shard {self.primary_shard!r} is not a shard")
        self.max_document_size = max_document_size
        self.collections: dict[str, Collection] = {}
        self.lock = ReadWriteLock()
        self._seq = itertools.count()

    # -- catalogue -----------------------------------------------------

    def create_collection(self, name: str, sharded: bool = False, shard_key: str = "_id") -> Collection:
        with self.lock.write():
            return self._create(name, sharded, shard_key)

    def _create(self, name, sharded, shard_key) -> Collection:
        if name in self.collections:
            raise EngineError(f"collection {name!r} already exists", ENGINE)
        coll = Collection(name, sharded, shard_key)
        if sharded:
            coll.chunks.append(Chunk(b"", None, self.primary_shard))
        self.collections[name] = coll
        return coll

    def collection(self, name: str) -> Collection:
        try:
            return self.collections[name]
        except KeyError:
            raise UnknownTable(f"unknown collection {name!r}", ENGINE) from None

    def shard_bytes(self) -> dict[str, int]:
        load = dict.fromkeys(self.shards, 0)
        for coll in self.collections.values():
            if coll.sharded:
                for ch in coll.chunks:
                    load[ch.owner] += ch.byte_size
            else:
                load[self.primary_shard] += sum(d.byte_size for d in coll.documents)
        return load

    # -- routing -------------------------------------------------------

    def route_key(self, collection: str, key) -> Route:
        coll = self.collection(collection)
        if not coll.sharded:
            return Route(self.primary_shard, None)
        chunk = self._chunk_for(coll, encode_key(key))
        return Route(chunk.owner, chunk)

    @staticmethod
    def _chunk_for(coll: Collection, enc: bytes) -> Chunk:
        lows = [c.low for c in coll.chunks]
        return coll.chunks[bisect.bisect_right(lows, enc) - 1]

    # -- writes --------------------------------------------------------

    def insert_document(self, collection: str, doc: Document) -> PlacementReport:
        with self.lock.write():
            return self._insert(collection, doc)

    def _insert(self, collection: str, doc: Document) -> PlacementReport:
        if doc.byte_size > self.max_document_size:
            raise OversizedDocument(
                f"document of {doc.byte_size} bytes exceeds {self.max_document_size}"
            )
        coll = self.collections.get(collection) or self._create(collection, False, "_id")
        if coll.shard_key in doc.body and doc.body[coll.shard_key] != doc.key:
            raise EngineError("document key disagrees with its shard key field", ENGINE)
        if not coll.sharded:
            coll.documents.append(doc)
            return PlacementReport(collection, self.primary_shard)
        enc = encode_key(doc.key)
        chunk = self._chunk_for(coll, enc)
        chunk.add(enc, next(self._seq), doc)
        report = PlacementReport(collection, chunk.owner)
        self._split_oversized(coll, chunk, report)
        home = self._chunk_for(coll, enc)
        report.shard, report.low, report.high = home.owner, home.low, home.high
        return report

    def _split_oversized(self, coll: Collection, chunk: Chunk, report: PlacementReport) -> None:
        pending = [chunk]
        while pending:
            ch = pending.pop()
            if ch.byte_size <= self.chunk_size or ch.distinct_keys() < 2:
                continue
            upper = self._split(coll, ch)
            report.splits.append(SplitEvent(upper.low, ch.owner, upper.owner))
            pending.extend((ch, upper))

    def _split(self, coll: Collection, ch: Chunk) -> Chunk:
        entries = ch.entries
        split_key = entries[len(entries) // 2][0]
        if split_key == entries[0][0]:
            # median equals the smallest key: move to the next distinct key
            idx = bisect.bisect_right(entries, split_key, key=lambda e: e[0])
            split_key = entries[idx][0]
        idx = bisect.bisect_left(entries, split_key, key=lambda e: e[0])
        upper = Chunk(split_key, ch.high, owner="")
        upper.entries = entries[idx:]
        upper.byte_size = sum(e[2].byte_size for e in upper.entries)
        ch.entries = entries[:idx]
        ch.byte_size -= upper.byte_size
        ch.high = split_key
        load = self.shard_bytes()
        upper.owner = min(self.shards, key=lambda s: (load[s], self.shards.index(s)))
        coll.chunks.insert(coll.chunks.index(ch) + 1, upper)
        return upper

    # -- queries -------------------------------------------------------

    def execute(self, statement) -> ExecResult:
        """Run one shell-style ``db.<collection>.<method>(...)`` statement."""
        from .shell import shell_exec

        return shell_exec(self, statement)

    def find(self, collection: str, filt: dict | None = None) -> ExecResult:
        with self.lock.read():
            coll = self.collection(collection)
            res = ExecResult()
            for doc in self._candidates(coll, filt or {}, res):
                if matches_filter(doc.body, filt or {}, res):
                    res.rows.append(dict(doc.body))
            return res

    def _candidates(self, coll: Collection, filt: dict, res: ExecResult) -> list[Document]:
        key = filt.get(coll.shard_key)
        if coll.sharded and key is not None and not isinstance(key, dict):
            # targeted query: only the owning chunk is read
            enc = encode_key(key)
            docs = [e[2] for e in self._chunk_for(coll, enc).entries if e[0] == enc]
            res.comparisons += len(coll.chunks).bit_length()
        else:
            docs = list(coll.all_documents())
        res.rows_read += len(docs)
        return docs

    def delete(self, collection: str, filt: dict | None = None, many: bool = True) -> ExecResult:
        with self.lock.write():
            coll = self.collection(collection)
            res = ExecResult()
            doomed = []
            for doc in self._candidates(coll, filt or {}, res):
                if matches_filter(doc.body, filt or {}, res):
                    doomed.append(doc)
                    if not many:
                        break
            gone = {id(d) for d in doomed}
            if coll.sharded:
                for ch in coll.chunks:
                    kept = [e for e in ch.entries if id(e[2]) not in gone]
                    if len(kept) != len(ch.entries):
                        ch.entries = kept
                        ch.byte_size = sum(e[2].byte_size for e in kept)
            else:
                coll.documents = [d for d in coll.documents if id(d) not in gone]
            res.rows = [dict(d.body) for d in doomed]
            res.affected = len(doomed)
            return res

    def update(self, collection: str, filt: dict, change: dict, multi: bool = False) -> ExecResult:
        with self.lock.write():
            coll = self.collection(collection)
            res = ExecResult()
            touched = []
            for doc in self._candidates(coll, filt or {}, res):
                if matches_filter(doc.body, filt or {}, res):
                    new_body = apply_update(doc.body, change)
                    if coll.sharded and new_body.get(coll.shard_key) != doc.key:
                        raise EngineError("the shard key of a document is immutable", ENGINE)
                    size = body_size(new_body)
                    if size > self.max_document_size:
                        raise OversizedDocument("update would exceed the maximum document size")
                    doc.body, doc.byte_size = new_body, size
                    touched.append(doc)
                    if not multi:
                        break
            if coll.sharded and touched:
                report = PlacementReport(collection, "")
                for ch in list(coll.chunks):
                    ch.byte_size = sum(e[2].byte_size for e in ch.entries)
                for ch in list(coll.chunks):
                    self._split_oversized(coll, ch, report)
            res.rows = [dict(d.body) for d in touched]
            res.affected = len(touched)
            return res

    # -- dump / load ---------------------------------------------------

    def dump(self, collection: str) -> str:
        """Serialize one collection as newline-delimited JSON.

        The first line is a header with the collection name, sharded flag,
        shard key, cluster layout and chunk boundaries; each following line
        is one document in chunk/key order.
        """
        with self.lock.read():
            coll = self.collection(collection)
            header = {
                "collection": coll.name,
                "sharded": coll.sharded,
                "shard_key": coll.shard_key,
                "shards": self.shards,
                "primary_shard": self.primary_shard,
                "chunk_size": self.chunk_size,
                "max_document_size": self.max_document_size,
                "chunks": [
                    {"low": c.low.hex(), "high": None if c.high is None else c.high.hex(), "owner": c.owner}
                    for c in coll.chunks
                ],
            }
            lines = [_dumps({"header": header})]
            if coll.sharded:
                for i, ch in enumerate(coll.chunks):
                    for _, _, doc in ch.entries:
                        lines.append(_dumps(_doc_record(doc, i)))
            else:
                lines.extend(_dumps(_doc_record(d, None)) for d in coll.documents)
            return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "ShardedCluster":
        lines = text.splitlines()
        if not lines:
            raise EngineError("empty dump", ENGINE)
        try:
            header = json.loads(lines[0])["header"]
        except (ValueError, KeyError, TypeError):
            raise EngineError("dump does not start with a header line", ENGINE) from None
        cluster = cls(
            header["shards"],
            header["chunk_size"],
            header["primary_shard"],
            header["max_document_size"],
        )
        coll = Collection(header["collection"], header["sharded"], header["shard_key"])
        for c in header["chunks"]:
            high = None if c["high"] is None else bytes.fromhex(c["high"])
            coll.chunks.append(Chunk(bytes.fromhex(c["low"]), high, c["owner"]))
        cluster.collections[coll.name] = coll
        for line in lines[1:]:
            rec = json.loads(line)
            doc = Document(_untag(rec["key"]), rec["body"], rec["byte_size"])
            if coll.sharded:
                ch = coll.chunks[rec["chunk"]]
                enc = encode_key(doc.key)
                if not ch.contains(enc):
                    raise EngineError("document key outside its chunk range", ENGINE)
                ch.entries.append((enc, next(cluster._seq), doc))
                ch.byte_size += doc.byte_size
            else:
                coll.documents.append(doc)
        for ch in coll.chunks:
            ch.entries.sort(key=lambda e: (e[0], e[1]))
        return cluster


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _tag(key):
    if isinstance(key, int) and not isinstance(key, bool):
        return {"int": key}
    if isinstance(key, str):
        return {"str": key}
    if isinstance(key, (bytes, bytearray)):
        return {"bytes": bytes(key).hex()}
    raise TypeError(f"unsupported key type {type(key).__name__}")


def _untag(tagged):
    (kind, value), = tagged.items()
    return bytes.fromhex(value) if kind == "bytes" else value


def _doc_record(doc: Document, chunk_index):
    rec = {"key": _tag(doc.key), "byte_size": doc.byte_size, "body": doc.body}
    if chunk_index is not None:
        rec["chunk"] = chunk_index
    return rec


# -- filter / update language ------------------------------------------

_CMP = {
    "$eq": lambda a, b: a == b,
    "$ne": lambda a, b: a != b,
    "$gt": lambda a, b: a is not None and _ordered(a, b) and a > b,
    "$gte": lambda a, b: a is not None and _ordered(a, b) and a >= b,
    "$lt": lambda a, b: a is not None and _ordered(a, b) and a < b,
    "$lte": lambda a, b: a is not None and _ordered(a, b) and a <= b,
    "$in": lambda a, b: a in b,
    "$nin": lambda a, b: a not in b,
}


def _ordered(a, b) -> bool:
    num = (int, float)
    return (isinstance(a, num) and isinstance(b, num)) or type(a) is type(b)


def matches_filter(body: dict, filt: dict, res: ExecResult | None = None) -> bool:
    for field_name, cond in filt.items():
        if field_name == "$and":
            if not all(matches_filter(body, f, res) for f in cond):
                return False
            continue
        if field_name == "$or":
            if not any(matches_filter(body, f, res) for f in cond):
                return False
            continue
        value = body.get(field_name)
        if isinstance(cond, dict) and cond and all(k.startswith("$") for k in cond):
            for op, operand in cond.items():
                if op not in _CMP:
                    raise EngineError(f"unsupported query operator {op}", ENGINE)
                if res is not None:
                    res.comparisons += 1
                if not _CMP[op](value, operand):
                    return False
        else:
            if res is not None:
                res.comparisons += 1
            if value != cond:
                return False
    return True


def apply_update(body: dict, change: dict) -> dict:
    if not any(k.startswith("$") for k in change):
        # replacement document keeps the _id
        new = dict(change)
        if "_id" in body:
            new["_id"] = body["_id"]
        return new
    new = dict(body)
    for op, fields_ in change.items():
        if op == "$set":
            new.update(fields_)
        elif op == "$unset":
            for f in fields_:
                new.pop(f, None)
        elif op == "$inc":
            for f, amount in fields_.items():
                new[f] = new.get(f, 0) + amount
        else:
            raise EngineError(f"unsupported update operator {op}", ENGINE)
    return new
