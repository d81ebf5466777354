"""Pieces shared by the simulated engines."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any


class EngineError(Exception):
    """Raised by an engine executor; ``engine`` names the failing engine."""

    engine = "engine"

    def __init__(self, message: str, engine: str | None = None):
        super().__init__(message)
        if engine is not None:
            self.engine = engine


class UnknownTable(EngineError):
    pass


class UnknownColumn(EngineError):
    pass


class UnsupportedStatement(EngineError):
    pass


class ReadWriteLock:
    """Many concurrent readers or a single writer.

    Writers are preferred once waiting so a steady stream of readers cannot
    starve them.
    """

    def __init__(self):
        self._cond = threading.Condition(threading.Lock())
        self._readers = 0
        self._writer = False
        self._waiting_writers = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer or self._waiting_writers:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            self._waiting_writers += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._waiting_writers -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


@dataclass
class ExecResult:
    """Rows returned by one engine call plus the work it did.

    ``comparisons`` counts predicate evaluations, key comparisons and hash
    probes; ``rows_read`` counts rows touched in engine storage.
    """

    rows: list[dict[str, Any]] = field(default_factory=list)
    comparisons: int = 0
    rows_read: int = 0
    affected: int = 0


MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def encode_key(key) -> bytes:
    """Map a shard/partition key onto an order-preserving byte string.

    Integers become 8-byte big-endian offset-binary so negative values sort
    first; text is UTF-8; bytes pass through.
    """
    if isinstance(key, bool):
        raise TypeError("boolean keys are not supported")
    if isinstance(key, int):
        if not -(1 << 63) <= key < (1 << 63):
            raise ValueError(f"integer key {key} outside signed 64-bit range")
        return (key + (1 << 63)).to_bytes(8, "big")
    if isinstance(key, str):
        return key.encode("utf-8")
    if isinstance(key, (bytes, bytearray)):
        return bytes(key)
    raise TypeError(f"unsupported key type {type(key).__name__}")


def stable_hash64(data: bytes, seed: int = 0) -> int:
    """Seeded 64-bit FNV-1a followed by the splitmix64 finalizer.

    Part of the external contract: token assignments must reproduce across
    runs and platforms, so this never uses Python's randomized ``hash``.
    """
    h = (_FNV_OFFSET ^ (seed & MASK64)) & MASK64
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & MASK64
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & MASK64
    h ^= h >> 31
    return h
