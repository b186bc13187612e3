"""CPU-parallel exact cosine search.

A pool of long-lived worker processes is forked at startup; each worker owns
one contiguous partition of the corpus matrix (shared copy-on-write after
fork). A search sends the normalized query vector to every worker, each
worker scans its rows, and the coordinator merges the replies into a global
top-k ordered by (score descending, row ascending).

Per-row dot products depend only on the row and the query, never on the
partition boundaries, so results are bit-identical for every worker count.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import threading
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np
from numba import njit

from .store import EmbeddingMatrix, IdMap, partition

logger = logging.getLogger(__name__)

WorkerReturn = Literal["all_scores", "local_topk"]


class ScoredHit(NamedTuple):
    row: int
    score: float


@dataclass
class SearchConfig:
    workers: int = 1
    topk: int = 10
    worker_return: WorkerReturn = "local_topk"

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.topk < 1:
            raise ValueError("topk must be >= 1")
        if self.worker_return not in ("all_scores", "local_topk"):
            raise ValueError(f"unknown worker_return {self.worker_return!r}")


def _as_unit_vector(v: Sequence[float] | np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float32)
    if v.ndim != 1:
        raise ValueError("query must be a 1-D vector")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("cannot search with a zero vector")
    return v / norm


def cosine(q: Sequence[float], p: Sequence[float]) -> float:
    """Cosine similarity; accumulation in float32 or wider."""
    q = np.asarray(q, dtype=np.float32)
    p = np.asarray(p, dtype=np.float32)
    if q.shape != p.shape or q.ndim != 1:
        raise ValueError(f"shape mismatch: {q.shape} vs {p.shape}")
    nq = float(np.linalg.norm(q))
    np_ = float(np.linalg.norm(p))
    if nq == 0.0 or np_ == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.dot(q, p) / (nq * np_))


@njit(cache=True, fastmath=True)
def _row_scores(values: np.ndarray, query: np.ndarray) -> np.ndarray:
    # One fixed-order reduction per row. Unlike a BLAS gemv, whose summation
    # grouping can change with the block shape, this kernel's per-row result
    # depends only on the row and the query, never on the chunk boundaries,
    # which is what makes search output bit-identical for any worker count.
    out = np.empty(values.shape[0], dtype=np.float32)
    for i in range(values.shape[0]):
        acc = np.float32(0.0)
        for j in range(values.shape[1]):
            acc += values[i, j] * query[j]
        out[i] = acc
    return out


def chunk_scores(query: np.ndarray, values: np.ndarray, start: int, end: int) -> np.ndarray:
    """Scores for rows [start, end) against an already-normalized query."""
    if not (0 <= start <= end <= values.shape[0]):
        raise ValueError(f"range [{start}, {end}) out of bounds for {values.shape[0]} rows")
    block = values[start:end]
    if block.dtype != np.float32:
        block = block.astype(np.float32)
    return _row_scores(np.ascontiguousarray(block), np.ascontiguousarray(query))


def score_chunk(
    query: Sequence[float] | np.ndarray,
    matrix: EmbeddingMatrix,
    row_range: tuple[int, int],
) -> list[ScoredHit]:
    """One hit per row of the range, in row order."""
    q = _as_unit_vector(query)
    start, end = row_range
    scores = chunk_scores(q, matrix.values, start, end)
    return [ScoredHit(start + i, float(s)) for i, s in enumerate(scores)]


def top_rows(scores: np.ndarray, k: int, offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Top-k row indices by (score desc, row asc); rows reported with offset."""
    n = scores.shape[0]
    k = min(k, n)
    if k == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float32)
    if k < n:
        cand = np.argpartition(scores, n - k)[n - k:]
    else:
        cand = np.arange(n)
    # lexsort: last key is primary; negate scores for descending order
    order = cand[np.lexsort((cand, -scores[cand]))][:k]
    return order + offset, scores[order]


def merge_topk(worker_outputs: Sequence[Sequence[ScoredHit]], k: int) -> list[ScoredHit]:
    """Globally top-k by (score desc, row asc) over disjoint per-worker hits."""
    if k < 0:
        raise ValueError("k must be non-negative")
    merged = [hit for hits in worker_outputs for hit in hits]
    merged.sort(key=lambda h: (-h.score, h.row))
    return merged[:k]


def full_scan(
    query: Sequence[float] | np.ndarray, matrix: EmbeddingMatrix, k: int
) -> list[ScoredHit]:
    """Single-context exact search over the whole matrix (the bench baseline)."""
    q = _as_unit_vector(query)
    if q.shape[0] != matrix.dim:
        raise ValueError(f"query dim {q.shape[0]} != index dim {matrix.dim}")
    if matrix.count == 0:
        logger.warning("searching an empty corpus")
        return []
    scores = chunk_scores(q, matrix.values, 0, matrix.count)
    rows, top = top_rows(scores, k)
    return [ScoredHit(int(r), float(s)) for r, s in zip(rows, top)]


def _worker_loop(conn, values: np.ndarray, start: int, end: int) -> None:
    # Each worker is single-threaded; parallelism comes from the pool.
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except Exception:  # pragma: no cover - limiter is best-effort
        pass
    while True:
        msg = conn.recv()
        if msg is None:
            conn.close()
            return
        query, k, mode = msg
        scores = chunk_scores(query, values, start, end)
        if mode == "local_topk":
            rows, top = top_rows(scores, k, offset=start)
            conn.send((rows, top))
        else:
            conn.send((np.arange(start, end, dtype=np.int64), scores))


class WorkerPool:
    """Long-lived fork-based worker pool over an immutable loaded index.

    Distinct searches are serialized through a coordinator lock, so each
    worker sees a FIFO of one query at a time and replies cannot interleave.
    """

    def __init__(
        self,
        matrix: EmbeddingMatrix,
        idmap: IdMap | None = None,
        workers: int = 1,
        worker_return: WorkerReturn = "local_topk",
    ) -> None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.matrix = matrix
        self.idmap = idmap
        self.workers = workers
        self.worker_return = worker_return
        self.ranges = partition(matrix.count, workers)
        self._lock = threading.Lock()
        self._conns = []
        self._procs = []
        # compile the scoring kernel before forking so workers inherit it
        if matrix.count:
            chunk_scores(np.zeros(matrix.dim, dtype=np.float32), matrix.values, 0, 1)
        ctx = mp.get_context("fork")
        for start, end in self.ranges:
            parent, child = ctx.Pipe()
            proc = ctx.Process(
                target=_worker_loop, args=(child, matrix.values, start, end), daemon=True
            )
            proc.start()
            child.close()
            self._conns.append(parent)
            self._procs.append(proc)

    def search_rows(self, query: Sequence[float] | np.ndarray, topk: int) -> list[ScoredHit]:
        """Top-k over the whole corpus as (row, score) hits."""
        if topk < 1:
            raise ValueError("topk must be >= 1")
        q = _as_unit_vector(query)
        if q.shape[0] != self.matrix.dim:
            raise ValueError(f"query dim {q.shape[0]} != index dim {self.matrix.dim}")
        if self.matrix.count == 0:
            logger.warning("searching an empty corpus")
            return []
        with self._lock:
            for conn in self._conns:
                conn.send((q, topk, self.worker_return))
            replies = [conn.recv() for conn in self._conns]
        per_worker = [
            [ScoredHit(int(r), float(s)) for r, s in zip(rows, scores)]
            for rows, scores in replies
        ]
        return merge_topk(per_worker, topk)

    def search(self, query: Sequence[float] | np.ndarray, topk: int) -> list[tuple[str, float]]:
        """Top-k as (passage id, score) pairs; requires an id map."""
        if self.idmap is None:
            raise ValueError("this pool was built without an id map")
        return [(self.idmap[h.row], h.score) for h in self.search_rows(query, topk)]

    def close(self) -> None:
        for conn in self._conns:
            try:
                conn.send(None)
                conn.close()
            except (BrokenPipeError, OSError):
                pass
        for proc in self._procs:
            proc.join(timeout=5)
            if proc.is_alive():  # pragma: no cover
                proc.terminate()
        self._conns = []
        self._procs = []

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def search(
    query: Sequence[float] | np.ndarray,
    config: SearchConfig,
    matrix: EmbeddingMatrix,
    idmap: IdMap,
) -> list[tuple[str, float]]:
    """One-shot search: spin up a pool per the config, search, tear down."""
    with WorkerPool(matrix, idmap, config.workers, config.worker_return) as pool:
        return pool.search(query, config.topk)
