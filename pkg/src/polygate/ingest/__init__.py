"""Line-list ingestion: CSV parsing, block placement and k-means clustering."""

from .blocks import Block, split_into_blocks
from .kmeans import (
    ClusterModel,
    ClusteringError,
    case_features,
    kmeans_mapreduce,
    kmeans_sequential,
)
from .records import (
    CaseRecord,
    IngestError,
    ParseResult,
    Rejection,
    Sex,
    Status,
    available_profiles,
    load_outcome_table,
    load_profile,
    parse_line_list,
    record_size,
)

__all__ = [
    "Block",
    "CaseRecord",
    "ClusterModel",
    "ClusteringError",
    "IngestError",
    "ParseResult",
    "Rejection",
    "Sex",
    "Status",
    "available_profiles",
    "case_features",
    "kmeans_mapreduce",
    "kmeans_sequential",
    "load_outcome_table",
    "load_profile",
    "parse_line_list",
    "record_size",
    "split_into_blocks",
]
