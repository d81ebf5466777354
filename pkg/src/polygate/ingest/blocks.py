from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .records import record_size


@dataclass(frozen=True)
class Block:
    index: int
    records: tuple
    node: int
    byte_size: int
    replicas: tuple[int, ...] = ()

    @property
    def nodes(self) -> tuple[int, ...]:
        """Primary node followed by replica nodes."""
        return (self.node,) + self.replicas


def split_into_blocks(
    records: Sequence,
    block_size: int,
    node_count: int,
    replication: int = 1,
    size_of: Callable = record_size,
) -> list[Block]:
    """Pack records, in order, into blocks of at most ``block_size`` bytes.

    A record larger than the block size gets a block of its own. Block ``i``
    is placed on node ``i % node_count`` with replicas on the following
    ``replication - 1`` nodes.
    """
    if block_size <= 0:
        raise ValueError("block_size must be > 0")
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    if not 1 <= replication <= node_count:
        raise ValueError(f"replication {replication} must lie in [1, node_count={node_count}]")

    groups: list[tuple[list, int]] = []
    current, used = [], 0
    for rec in records:
        size = size_of(rec)
        if current and used + size > block_size:
            groups.append((current, used))
            current, used = [], 0
        current.append(rec)
        used += size
    if current:
        groups.append((current, used))

    blocks = []
    for i, (recs, size) in enumerate(groups):
        node = i % node_count
        replicas = tuple((node + j) % node_count for j in range(1, replication))
        blocks.append(Block(i, tuple(recs), node, size, replicas))
    return blocks
