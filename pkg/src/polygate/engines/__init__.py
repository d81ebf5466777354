"""In-process simulated storage engines."""

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
from .document import (
    Chunk,
    Document,
    OversizedDocument,
    PlacementReport,
    Route,
    ShardedCluster,
)
from .relational import RelationalStore, relational_exec
from .shell import shell_exec
from .widecolumn import (
    PartitionAssignment,
    TokenRing,
    WideColumnStore,
    assign_token,
    cql_exec,
    partition_records,
)

__all__ = [
    "Chunk",
    "Document",
    "EngineError",
    "ExecResult",
    "OversizedDocument",
    "PartitionAssignment",
    "PlacementReport",
    "ReadWriteLock",
    "RelationalStore",
    "Route",
    "ShardedCluster",
    "TokenRing",
    "UnknownColumn",
    "UnknownTable",
    "UnsupportedStatement",
    "WideColumnStore",
    "assign_token",
    "cql_exec",
    "encode_key",
    "partition_records",
    "relational_exec",
    "shell_exec",
    "stable_hash64",
]
