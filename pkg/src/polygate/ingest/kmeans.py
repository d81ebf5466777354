"""Sequential and MapReduce-style Lloyd k-means.

Both variants share initialization (seeded sampling of k distinct points),
tie-breaking (lowest cluster index), the empty-cluster policy (re-seed with
the point farthest from its current centroid) and the stopping rule
(assignments unchanged, or ``max_iter``).

Case-record features are min-max normalized and then snapped to a 2**-32
grid. Sums of up to 2**21 such values are exact in float64, so per-cluster
sums do not depend on how the records are split into blocks, and the two
variants produce bit-identical centroids. Raw point input is used as given;
the same guarantee holds whenever its coordinates are dyadic with small
enough magnitude (integers, for instance).
"""

from __future__ import annotations

import datetime as dt
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .blocks import Block
from .records import CaseRecord, Status

GRID = 2.0**-32
_STATUS_CODE = {Status.ACTIVE: 0.0, Status.RECOVERED: 1.0, Status.DEAD: 2.0}
_EPOCH = dt.date(1970, 1, 1)


class ClusteringError(ValueError):
    pass


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    iterations: int
    seed: int
    indices: np.ndarray  # input position of each clustered point
    sse_history: list[float] = field(default_factory=list)
    converged: bool = False
    reseeds: int = 0

    def to_json(self, ids: Optional[Sequence[str]] = None) -> str:
        doc = {
            "k": self.k,
            "seed": self.seed,
            "iterations": self.iterations,
            "converged": self.converged,
            "centroids": self.centroids.tolist(),
            "sse_history": self.sse_history,
            "assignments": [
                {"record": ids[i] if ids is not None else int(i), "cluster": int(c)}
                for i, c in zip(self.indices, self.assignments)
            ],
        }
        return json.dumps(doc, indent=2)


def raw_features(records: Sequence[CaseRecord]) -> tuple[np.ndarray, np.ndarray]:
    """(age, days since epoch, status code) for records that have an age."""
    rows, idx = [], []
    for i, r in enumerate(records):
        if r.age is None:
            continue
        rows.append((r.age, float((r.date_confirmed - _EPOCH).days), _STATUS_CODE[r.status]))
        idx.append(i)
    return np.asarray(rows, dtype=float).reshape(-1, 3), np.asarray(idx, dtype=np.int64)


def normalize(X: np.ndarray) -> np.ndarray:
    if not len(X):
        return X
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    Z = (X - lo) / span
    return np.round(Z / GRID) * GRID


def case_features(records: Sequence[CaseRecord]) -> tuple[np.ndarray, np.ndarray]:
    X, idx = raw_features(records)
    return normalize(X), idx


def _as_points(data) -> tuple[np.ndarray, np.ndarray]:
    if len(data) and isinstance(data[0], CaseRecord):
        return case_features(data)
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X, np.arange(len(X), dtype=np.int64)


def _distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # explicit per-dimension accumulation: row results never depend on
    # how many rows are processed together
    d = np.zeros((len(X), len(C)))
    for j in range(X.shape[1]):
        diff = X[:, j, None] - C[None, :, j]
        d += diff * diff
    return d


def _init_centroids(X: np.ndarray, k: int, seed: int, max_iter: int) -> np.ndarray:
    if max_iter < 1:
        raise ClusteringError("max_iter must be >= 1")
    if k < 1:
        raise ClusteringError("k must be >= 1")
    if len(X) == 0:
        raise ClusteringError("no usable records to cluster")
    if k > len(X):
        raise ClusteringError(f"k={k} exceeds the {len(X)} usable records")
    rng = np.random.default_rng(seed)
    return X[np.sort(rng.choice(len(X), size=k, replace=False))].copy()


def _farthest(dist: np.ndarray, offset: int, m: int) -> list[tuple[float, int]]:
    """Up to ``m`` (distance, global index) pairs, farthest first, ties by index."""
    if m <= 0 or not len(dist):
        return []
    order = np.lexsort((np.arange(len(dist)), -dist))[:m]
    return [(float(dist[i]), int(i) + offset) for i in order]


def _update(sums, counts, candidates, X_lookup, C_old):
    C = C_old.copy()
    empty = np.flatnonzero(counts == 0)
    filled = counts > 0
    C[filled] = sums[filled] / counts[filled, None]
    candidates = sorted(candidates, key=lambda c: (-c[0], c[1]))
    for cluster, (_, gi) in zip(empty, candidates):
        C[cluster] = X_lookup(gi)
    return C, len(empty)


def kmeans_sequential(data, k: int, seed: int = 0, max_iter: int = 100) -> ClusterModel:
    """Lloyd's algorithm over case records or an (n, d) point array."""
    X, idx = _as_points(data)
    C = _init_centroids(X, k, seed, max_iter)
    model = ClusterModel(k, C, np.zeros(len(X), dtype=np.int64), 0, seed, idx)
    prev = None
    for it in range(1, max_iter + 1):
        d = _distances(X, C)
        a = np.argmin(d, axis=1)
        mind = d[np.arange(len(X)), a]
        model.sse_history.append(float(mind.sum()))
        counts = np.bincount(a, minlength=k)
        sums = np.zeros_like(C)
        np.add.at(sums, a, X)
        cand = _farthest(mind, 0, int((counts == 0).sum()))
        C_new, n_empty = _update(sums, counts, cand, lambda gi: X[gi], C)
        model.iterations, model.assignments = it, a
        model.reseeds += n_empty
        if prev is not None and n_empty == 0 and np.array_equal(a, prev):
            model.converged = True
            break
        prev, C = a, C_new
    model.centroids = C
    return model


@dataclass
class _Partial:
    sums: np.ndarray
    counts: np.ndarray
    sse: float
    farthest: list
    assignments: np.ndarray


def _map_block(X: np.ndarray, offset: int, C: np.ndarray) -> _Partial:
    k = len(C)
    d = _distances(X, C)
    a = np.argmin(d, axis=1) if len(X) else np.zeros(0, dtype=np.int64)
    mind = d[np.arange(len(X)), a]
    sums = np.zeros_like(C)
    np.add.at(sums, a, X)
    return _Partial(sums, np.bincount(a, minlength=k), float(mind.sum()), _farthest(mind, offset, k), a)


def _block_points(blocks) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Per-block feature arrays plus the global point matrix and indices.

    Normalization bounds come from all blocks together.
    """
    seqs = [b.records if isinstance(b, Block) else b for b in blocks]
    flat = [x for s in seqs for x in s]
    X, idx = _as_points(flat)
    bounds = np.cumsum([0] + [len(s) for s in seqs])
    cut = np.searchsorted(idx, bounds)
    return [X[cut[i] : cut[i + 1]] for i in range(len(seqs))], X, idx


def kmeans_mapreduce(
    blocks, k: int, seed: int = 0, max_iter: int = 100, workers: int | None = None
) -> ClusterModel:
    """Lloyd's algorithm with a map phase per block and an ordered reduce.

    Each map task assigns its block's points to the nearest centroid and
    emits per-cluster vector sums and counts; the reduce folds the partials
    in ascending block order.
    """
    parts, X, idx = _block_points(blocks)
    offsets = np.cumsum([0] + [len(p) for p in parts[:-1]])
    C = _init_centroids(X, k, seed, max_iter)
    model = ClusterModel(k, C, np.zeros(len(X), dtype=np.int64), 0, seed, idx)
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    prev = None
    try:
        for it in range(1, max_iter + 1):
            jobs = [(p, int(o), C) for p, o in zip(parts, offsets)]
            if pool is None:
                partials = [_map_block(*j) for j in jobs]
            else:
                partials = list(pool.map(lambda j: _map_block(*j), jobs))
            sums = np.zeros_like(C)
            counts = np.zeros(k, dtype=np.int64)
            sse = 0.0
            cand: list = []
            for p in partials:  # block-index order
                sums += p.sums
                counts += p.counts
                sse += p.sse
                cand.extend(p.farthest)
            a = np.concatenate([p.assignments for p in partials]) if partials else np.zeros(0, dtype=np.int64)
            model.sse_history.append(sse)
            C_new, n_empty = _update(sums, counts, cand, lambda gi: X[gi], C)
            model.iterations, model.assignments = it, a
            model.reseeds += n_empty
            if prev is not None and n_empty == 0 and np.array_equal(a, prev):
                model.converged = True
                break
            prev, C = a, C_new
    finally:
        if pool is not None:
            pool.shutdown()
    model.centroids = C
    return model


def within_cluster_sse(X: np.ndarray, model: ClusterModel) -> float:
    d = _distances(X, model.centroids)
    return float(d[np.arange(len(X)), model.assignments].sum())
