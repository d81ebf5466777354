"""Storage and partition sizing formulas.

HDFS node storage, the number of distinct k-cluster assignments of N objects
(Stirling numbers of the second kind), document-store split and collection
limits, and wide-column partition cell counts and byte sizes.

Symbols follow the usual sizing worksheets:

==========  ==============================================================
``C``       compression ratio
``R``       replication factor (3 by default)
``S``       initial amount of data moved into HDFS, bytes
``I``       intermediate data factor, usually 1/3 or 1/4
``1.2``     headroom constant; note :func:`hdfs_node_storage` *divides* by
            it, exactly as the formula is usually printed, even though the
            headroom is described as "120% more than the total size"
``md``      maximum BSON document size, 16777216 bytes
``avg``     average shard key size, bytes
``c``       chunk size, bytes
``Nr``      rows in the partition
``Nc``      total columns
``Npk``     primary key columns (partition key plus clustering columns)
``Ns``      static columns
``t_avg``   average per-cell metadata bytes (timestamps etc.)
==========  ==============================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

MAX_BSON_DOCUMENT_SIZE = 16 * 1024 * 1024
HDFS_HEADROOM = 1.2


class SizingError(ValueError):
    """Input outside a formula's domain."""


@dataclass(frozen=True)
class HdfsSizingInput:
    C: float
    S: float
    R: int = 3
    I: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise SizingError(f"compression ratio must be > 0, got {self.C}")
        if self.R < 1:
            raise SizingError(f"replication factor must be >= 1, got {self.R}")
        if self.S < 0:
            raise SizingError(f"initial data must be >= 0, got {self.S}")
        if not 0 <= self.I < 1:
            raise SizingError(f"intermediate factor must lie in [0, 1), got {self.I}")


@dataclass(frozen=True)
class ShardSizingInput:
    avg: int
    c: int = 64 * 1024 * 1024
    md: int = MAX_BSON_DOCUMENT_SIZE

    def __post_init__(self):
        if self.md <= 0:
            raise SizingError("md must be > 0")
        if self.avg <= 0:
            raise SizingError("average shard key size must be > 0")
        if self.avg > self.md:
            raise SizingError("average shard key size cannot exceed md")
        if self.c <= 0:
            raise SizingError("chunk size must be > 0")


@dataclass(frozen=True)
class PartitionSpec:
    Nr: int
    Nc: int
    Npk: int
    Ns: int = 0
    ck_sizes: Sequence[int] = field(default_factory=tuple)
    cs_sizes: Sequence[int] = field(default_factory=tuple)
    cr_sizes: Sequence[int] = field(default_factory=tuple)
    cc_sizes: Sequence[int] = field(default_factory=tuple)
    t_avg: float = 0

    def __post_init__(self):
        for name in ("ck_sizes", "cs_sizes", "cr_sizes", "cc_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.Nr < 0 or self.Ns < 0:
            raise SizingError("Nr and Ns must be non-negative")
        if self.Nc < 1 or self.Npk < 1:
            raise SizingError("Nc and Npk must be positive")
        if self.Npk + self.Ns > self.Nc:
            raise SizingError(
                f"Npk + Ns = {self.Npk + self.Ns} exceeds Nc = {self.Nc}"
            )
        sizes = self.ck_sizes + self.cs_sizes + self.cr_sizes + self.cc_sizes
        if any(s < 0 for s in sizes) or self.t_avg < 0:
            raise SizingError("column sizes and t_avg must be non-negative")
        if sizes:
            if len(sizes) != self.Nc:
                raise SizingError(f"{len(sizes)} column sizes given for Nc = {self.Nc}")
            if len(self.ck_sizes) + len(self.cc_sizes) != self.Npk:
                raise SizingError("partition key plus clustering columns must equal Npk")
            if len(self.cs_sizes) != self.Ns:
                raise SizingError("static column count must equal Ns")

    @classmethod
    def from_mapping(cls, doc: dict) -> "PartitionSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise SizingError(f"unknown partition fields: {sorted(unknown)}")
        return cls(**doc)


def hdfs_node_storage(inp: HdfsSizingInput) -> float:
    return (inp.C * inp.R * inp.S) / ((1 - inp.I) * HDFS_HEADROOM)


def cluster_assignment_count(N: int, K: int) -> int:
    """Number of ways to split N objects into K non-empty clusters.

    Evaluated with the alternating binomial sum in exact integers; the
    division by K! is done last and checked to be exact.
    """
    if not (isinstance(N, int) and isinstance(K, int)):
        raise SizingError("N and K must be integers")
    if K < 1 or K > N:
        raise SizingError(f"need 1 <= K <= N, got N={N}, K={K}")
    total = sum((-1) ** (K - k) * math.comb(K, k) * k**N for k in range(1, K + 1))
    count, rem = divmod(total, math.factorial(K))
    if rem:
        raise ArithmeticError(f"alternating sum {total} not divisible by {K}!")
    return count


def max_splits(inp: ShardSizingInput) -> int:
    return inp.md // inp.avg


def max_collection_size(inp: ShardSizingInput) -> int | float:
    # exact for even chunk sizes; odd c yields a half byte
    total = max_splits(inp) * inp.c
    return total // 2 if total % 2 == 0 else total / 2


def partition_value_count(spec: PartitionSpec) -> int:
    regular = spec.Nc - spec.Npk - spec.Ns
    if regular < 0:
        raise SizingError("Nc - Npk - Ns is negative")
    return spec.Nr * regular + spec.Ns


def partition_size(spec: PartitionSpec) -> float:
    nv = partition_value_count(spec)
    size = (
        sum(spec.ck_sizes)
        + sum(spec.cs_sizes)
        + spec.Nr * (sum(spec.cr_sizes) + sum(spec.cc_sizes))
        + spec.t_avg * nv
    )
    return size
