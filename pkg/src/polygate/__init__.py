"""polygate: a polystore query gateway toolkit.

Routes statements written in several database dialects to simulated
engines, sizes clusters, models plan cost, ingests epidemiological line
lists and benchmarks the whole pipeline.
"""

from .dialect import EngineKind, QueryStatement, default_corpus, detect_engine, tokenize

__version__ = "0.1.0"

__all__ = ["EngineKind", "QueryStatement", "default_corpus", "detect_engine", "tokenize", "__version__"]
