"""Command-line entry point.

Exit codes: 0 success, 1 user error (bad input, NoEngine, failed module
precondition), 2 internal error. Structured output goes to stdout as JSON;
tabular output is written as CSV under the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import bench as bench_mod
from .capacity import (
    HdfsSizingInput,
    PartitionSpec,
    ShardSizingInput,
    cluster_assignment_count,
    hdfs_node_storage,
    max_collection_size,
    max_splits,
    partition_size,
    partition_value_count,
)
from .cost import CostCoefficients
from .dialect import EngineKind, default_corpus, detect_engine, load_corpus, tokenize
from .engines.base import EngineError
from .engines.document import DEFAULT_CHUNK_SIZE
from .ingest.blocks import split_into_blocks
from .ingest.kmeans import kmeans_mapreduce
from .ingest.records import IngestError, load_outcome_table, parse_line_list
from .query import (
    JoinPlan,
    RoutingError,
    compare_plans,
    compute_stats,
    cost_sidecar,
    execute_join,
    result_csv,
    synthetic_join_tables,
)

DEFAULT_BLOCK_SIZE = 128 * 1024 * 1024


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    corpus_path: Optional[str] = None
    engines_enabled: list[str] = field(default_factory=lambda: list(bench_mod.BENCH_ENGINES))
    chunk_size: int = DEFAULT_CHUNK_SIZE
    block_size: int = DEFAULT_BLOCK_SIZE
    node_count: int = 3
    replication: int = 1
    const: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    seed: int = 0
    output_dir: str = "polygate-out"

    def __post_init__(self):
        if self.chunk_size <= 0 or self.block_size <= 0:
            raise UsageError("chunk_size and block_size must be > 0")
        if self.node_count < 1:
            raise UsageError("node_count must be >= 1")
        if not 1 <= self.replication <= self.node_count:
            raise UsageError("replication must lie in [1, node_count]")
        if not -(2**63) <= self.seed < 2**64:
            raise UsageError("seed must fit in 64 bits")
        for e in self.engines_enabled:
            EngineKind.parse(e)

    @property
    def coefficients(self) -> CostCoefficients:
        return CostCoefficients(self.const, self.alpha, self.beta, self.gamma)

    @property
    def rng_seed(self) -> int:
        return self.seed % 2**64


def load_config(path: Optional[str], overrides: dict) -> CliConfig:
    doc = {}
    if path:
        doc = _read_json(path)
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(CliConfig)}
        extra = set(doc) - known
        if extra:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(extra))}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return CliConfig(**doc)


def _read_json(source: str):
    """Parse ``source`` as inline JSON when it looks like JSON, else as a path."""
    text = source if source.lstrip().startswith(("{", "[")) else Path(source).read_text("utf-8")
    return json.loads(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def _out_dir(cfg: CliConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -----------------------------------------------------------


def cmd_route(args, cfg: CliConfig) -> int:
    corpus = load_corpus(cfg.corpus_path) if cfg.corpus_path else default_corpus()
    kind = detect_engine(tokenize(args.statement), corpus)
    print(kind.value)
    return 1 if kind is EngineKind.NO_ENGINE else 0


def _plan_doc(args, names) -> dict:
    doc = _read_json(args.json) if args.json else {}
    if not isinstance(doc, dict):
        raise UsageError("--json must hold a JSON object")
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    return doc


def cmd_plan(args, cfg: CliConfig) -> int:
    if args.model == "hdfs":
        inp = HdfsSizingInput(**_plan_doc(args, ("C", "R", "S", "I")))
        out = {"H": hdfs_node_storage(inp)}
    elif args.model == "mongo":
        inp = ShardSizingInput(**_plan_doc(args, ("avg", "c", "md")))
        out = {"M": max_splits(inp), "MB": max_collection_size(inp)}
    elif args.model == "cassandra":
        spec = PartitionSpec.from_mapping(_plan_doc(args, ("Nr", "Nc", "Npk", "Ns", "t_avg")))
        out = {"Nv": partition_value_count(spec), "St": partition_size(spec)}
    else:
        doc = _plan_doc(args, ("N", "K"))
        out = {"S": cluster_assignment_count(doc["N"], doc["K"])}
    print(_dump(out))
    return 0


def _outcomes(args):
    return load_outcome_table(args.outcomes) if args.outcomes else None


def cmd_ingest(args, cfg: CliConfig) -> int:
    parsed = parse_line_list(args.csv, args.profile, _outcomes(args))
    blocks = split_into_blocks(parsed.records, cfg.block_size, cfg.node_count, cfg.replication)
    clusters = None
    with_age = sum(1 for r in parsed.records if r.age is not None)
    if args.k > 0 and with_age >= args.k:
        model = kmeans_mapreduce(blocks, args.k, seed=cfg.rng_seed)
        sizes = Counter(int(a) for a in model.assignments)
        clusters = {
            "k": args.k,
            "iterations": model.iterations,
            "converged": model.converged,
            "sizes": [sizes.get(i, 0) for i in range(args.k)],
        }
        if args.model:
            Path(args.model).write_text(
                model.to_json([r.id for r in parsed.records]) + "\n", encoding="utf-8"
            )
    kind = EngineKind.parse(args.engine)
    name = {
        EngineKind.RELATIONAL: "Relational",
        EngineKind.DOCUMENT_STORE: "DocumentStore",
        EngineKind.WIDE_COLUMN: "WideColumn",
    }.get(kind)
    if name is None:
        raise UsageError(f"ingest supports Relational, DocumentStore or WideColumn, not {kind.value}")
    spec = bench_mod.BenchSpec(
        "ingest", [len(parsed.records)], engines=[name], seed=cfg.rng_seed,
        chunk_size=cfg.chunk_size, node_count=cfg.node_count, replication=cfg.replication,
    )
    engine = bench_mod.BenchEngine(name, spec)
    bench_mod.load_cases(engine, [r.to_dict() for r in parsed.records])
    out = {
        "rows": parsed.row_count,
        "records": len(parsed.records),
        "rejections": len(parsed.rejections),
        "rejections_by_reason": dict(sorted(Counter(r.reason for r in parsed.rejections).items())),
        "blocks": len(blocks),
        "engine": name,
        "loaded": len(engine.scan(bench_mod.TABLE)),
        "clusters": clusters,
    }
    if args.rejections:
        with open(args.rejections, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "reason", "detail"])
            w.writerows((r.row, r.reason, r.detail) for r in parsed.rejections)
    print(_dump(out))
    return 0


def _plan_tables(doc: dict, base: Path, seed: int, n_tables: int) -> dict:
    if "data" in doc:
        tables = {}
        for name, src in doc["data"].items():
            if isinstance(src, list):
                tables[name] = src
            else:
                path = Path(src) if Path(src).is_absolute() else base / src
                with open(path, newline="", encoding="utf-8-sig") as fh:
                    tables[name] = list(csv.DictReader(fh))
        return tables
    syn = doc.get("synthetic")
    if syn is None:
        raise UsageError("plan needs either 'data' or 'synthetic'")
    rows = int(syn.get("rows", 100))
    return synthetic_join_tables(
        n_tables, rows, int(syn.get("key_domain", rows)), int(syn.get("seed", seed))
    )


def cmd_query(args, cfg: CliConfig) -> int:
    base = Path(".") if args.plan.lstrip().startswith("{") else Path(args.plan).parent
    doc = _read_json(args.plan)
    plans = [JoinPlan.from_json(p) for p in doc["plans"]] if "plans" in doc else [JoinPlan.from_json(doc)]
    names = sorted({t for p in plans for t in p.tables})
    tables = _plan_tables(doc, base, cfg.rng_seed, len(names))
    if "synthetic" in doc and "data" not in doc:
        # synthetic tables are t0..tn; map them onto the plan's names in sorted order
        tables = {name: tables[f"t{i}"] for i, name in enumerate(names)}
    coef = cfg.coefficients
    out_dir = _out_dir(cfg)
    if len(plans) == 1:
        result = execute_join(plans[0], tables)
        side = cost_sidecar(result, plans[0], coef)
    else:
        ranked = compare_plans(plans, coef, tables)
        result = ranked[0].result
        side = {
            "ranking": [
                {"rank": i + 1, "plan_cost": r.cost, **cost_sidecar(r.result, r.plan)}
                for i, r in enumerate(ranked)
            ]
        }
    (out_dir / "result.csv").write_text(result_csv(result), encoding="utf-8")
    (out_dir / "result.cost.json").write_text(_dump(side) + "\n", encoding="utf-8")
    print(_dump(side))
    return 0


def cmd_stats(args, cfg: CliConfig) -> int:
    parsed = parse_line_list(args.csv, args.profile, _outcomes(args))
    print(_dump(compute_stats(parsed.records).to_dict()))
    return 0


def cmd_bench(args, cfg: CliConfig) -> int:
    doc = _read_json(args.spec)
    if not isinstance(doc, dict):
        raise UsageError("bench spec must be a JSON object")
    doc.setdefault("seed", cfg.rng_seed)
    for key in ("chunk_size", "node_count", "replication"):
        doc.setdefault(key, getattr(cfg, key))
    spec = bench_mod.BenchSpec.from_json(doc)
    rows = bench_mod.run_bench(spec)
    path = _out_dir(cfg) / f"bench.{args.format}"
    written = bench_mod.emit_report(rows, path, args.format, allow_empty=True)
    print(_dump({"rows": len(rows), "files": [str(p) for p in written]}))
    return 0


# -- parser ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        # --c (chunk size) must not be read as an abbreviation of --config
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for all randomness")
    common.add_argument("--corpus", default=argparse.SUPPRESS, help="signature corpus TSV")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = _Parser(prog="polygate", description="Polystore query gateway toolkit.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("route", parents=[common], help="detect the engine for a statement")
    r.add_argument("statement")
    r.set_defaults(func=cmd_route)

    pl = sub.add_parser("plan", parents=[common], help="capacity planning formulas")
    pl.add_argument("model", choices=["hdfs", "mongo", "cassandra", "clusters"])
    pl.add_argument("--json", help="inputs as inline JSON or a JSON file")
    pl.add_argument("--C", type=float, help="compression ratio")
    pl.add_argument("--R", type=int, help="replication factor")
    pl.add_argument("--S", type=float, help="initial data size")
    pl.add_argument("--I", type=float, help="intermediate data factor")
    pl.add_argument("--avg", type=int, help="average shard key size (bytes)")
    pl.add_argument("--c", type=int, help="chunk size (bytes)")
    pl.add_argument("--md", type=int, help="maximum document size (bytes)")
    for name in ("Nr", "Nc", "Npk", "Ns", "N", "K"):
        pl.add_argument(f"--{name}", type=int)
    pl.add_argument("--t-avg", dest="t_avg", type=float)
    pl.set_defaults(func=cmd_plan)

    ing = sub.add_parser("ingest", parents=[common], help="parse, block, cluster and load a line list")
    ing.add_argument("csv")
    ing.add_argument("--profile", default="generic")
    ing.add_argument("--engine", default="DocumentStore")
    ing.add_argument("--k", type=int, default=3, help="clusters (0 disables clustering)")
    ing.add_argument("--rejections", help="write rejected rows to this CSV")
    ing.add_argument("--model", help="write the cluster model JSON here")
    ing.add_argument("--outcomes", help="outcome-to-status TSV replacing the bundled table")
    ing.set_defaults(func=cmd_ingest)

    q = sub.add_parser("query", parents=[common], help="execute or compare join plans")
    q.add_argument("--plan", required=True, help="plan JSON (inline or file)")
    q.set_defaults(func=cmd_query)

    st = sub.add_parser("stats", parents=[common], help="case statistics for a line list")
    st.add_argument("csv")
    st.add_argument("--profile", default="generic")
    st.add_argument("--outcomes", help="outcome-to-status TSV replacing the bundled table")
    st.set_defaults(func=cmd_stats)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark spec")
    b.add_argument("--spec", required=True, help="bench spec JSON (inline or file)")
    b.add_argument("--format", choices=["csv", "json"], default="csv")
    b.set_defaults(func=cmd_bench)
    return p


USER_ERRORS = (
    UsageError,
    ValueError,  # SizingError, CostError, CorpusError, JoinError, BenchError, ...
    KeyError,
    OSError,
    IngestError,
    EngineError,
    RoutingError,
)


def _tag(exc: BaseException) -> str:
    mod = type(exc).__module__
    return mod.split(".")[1] if mod.startswith("polygate.") else "cli"


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(
            getattr(args, "config", None),
            {
                "seed": getattr(args, "seed", None),
                "corpus_path": getattr(args, "corpus", None),
                "output_dir": getattr(args, "out", None),
            },
        )
        return args.func(args, cfg)
    except USER_ERRORS as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error [{_tag(exc)}]: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error [{_tag(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
