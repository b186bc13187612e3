"""HTTP search service: a FastAPI app over a loaded index and worker pool."""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import ann
from .embedders import Embedder, HashEmbedder
from .exact import ScoredHit, WorkerPool, full_scan
from .store import load_index, read_passages

KNOWN_BACKENDS = ("exact", "sq", "pq", "hnsw")


@dataclass
class ServiceConfig:
    index_path: str | Path
    workers: int = 1
    topk: int = 10
    backend: str = "exact"
    host: str = "127.0.0.1"
    port: int = 8000
    backends: tuple[str, ...] = ("exact",)
    corpus_path: str | Path | None = None
    embedder_seed: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not (0 < self.port < 65536):
            raise ValueError(f"invalid port {self.port}")
        if self.backend not in KNOWN_BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        for b in self.backends:
            if b not in KNOWN_BACKENDS:
                raise ValueError(f"unknown backend {b!r}")
        if self.backend not in self.backends:
            self.backends = tuple(self.backends) + (self.backend,)


class SearchRequest(BaseModel):
    query: str | list[float]
    topk: int | None = Field(default=None, ge=1)
    backend: str | None = None


class Hit(BaseModel):
    id: str
    score: float
    text: str | None = None


class SearchResponse(BaseModel):
    hits: list[Hit]
    latency_ms: float
    backend: str
    workers: int


class HealthResponse(BaseModel):
    status: str
    count: int
    dim: int
    backends: list[str]


class BackendStats(BaseModel):
    queries: int
    mean_latency_ms: float


class StatsResponse(BaseModel):
    backends: dict[str, BackendStats]


class SearchEngine:
    """Owns the loaded index, the exact-search worker pool, and any built
    approximate indexes. Searches are thread-safe."""

    def __init__(self, config: ServiceConfig, embedder: Embedder | None = None) -> None:
        self.config = config
        self.matrix, self.idmap = load_index(config.index_path)
        self.embedder = embedder or HashEmbedder(self.matrix.dim, seed=config.embedder_seed)
        if self.embedder.dim != self.matrix.dim:
            raise ValueError(
                f"embedder dim {self.embedder.dim} != index dim {self.matrix.dim}"
            )
        self.texts: dict[str, str] = {}
        if config.corpus_path:
            self.texts = {p.id: p.text for p in read_passages(config.corpus_path)}
        self.pool = WorkerPool(self.matrix, self.idmap, workers=config.workers)
        self._ann: dict[str, object] = {}
        if "sq" in config.backends:
            self._ann["sq"] = ann.sq_build(self.matrix)
        if "pq" in config.backends:
            trained = ann.pq_train(self.matrix, seed=config.seed)
            self._ann["pq"] = ann.pq_encode(trained, self.matrix)
        if "hnsw" in config.backends:
            self._ann["hnsw"] = ann.hnsw_build(self.matrix, seed=config.seed)
        self._stats: dict[str, list[float]] = {b: [0, 0.0] for b in config.backends}
        self._stats_lock = threading.Lock()

    def close(self) -> None:
        self.pool.close()

    def embed(self, query: str | Sequence[float]) -> np.ndarray:
        if isinstance(query, str):
            return self.embedder.embed(query)
        return np.asarray(query, dtype=np.float32)

    def search(
        self, query: str | Sequence[float], topk: int | None = None, backend: str | None = None
    ) -> SearchResponse:
        backend = backend or self.config.backend
        if backend not in self.config.backends:
            raise ValueError(
                f"backend {backend!r} not enabled (have {list(self.config.backends)})"
            )
        topk = topk or self.config.topk
        vec = self.embed(query)
        t0 = time.perf_counter()
        if backend == "exact":
            ranked = self.pool.search(vec, topk)
        else:
            hits = self._ann_search(backend, vec, topk)
            ranked = [(self.idmap[h.row], h.score) for h in hits]
        latency_ms = (time.perf_counter() - t0) * 1000.0
        with self._stats_lock:
            entry = self._stats[backend]
            entry[0] += 1
            entry[1] += latency_ms
        return SearchResponse(
            hits=[Hit(id=pid, score=score, text=self.texts.get(pid)) for pid, score in ranked],
            latency_ms=latency_ms,
            backend=backend,
            workers=self.config.workers,
        )

    def _ann_search(self, backend: str, vec: np.ndarray, topk: int) -> list[ScoredHit]:
        index = self._ann[backend]
        if backend == "sq":
            return ann.sq_search(index, vec, topk)
        if backend == "pq":
            return ann.pq_search(index, vec, topk)
        return ann.hnsw_search(index, vec, min(topk, index.count), ef_search=max(100, topk))

    def stats(self) -> StatsResponse:
        with self._stats_lock:
            return StatsResponse(
                backends={
                    b: BackendStats(
                        queries=int(n), mean_latency_ms=(total / n if n else 0.0)
                    )
                    for b, (n, total) in self._stats.items()
                }
            )


def create_app(engine: SearchEngine) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        engine.close()

    app = FastAPI(title="qirat search service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.post("/search", response_model=SearchResponse, response_model_exclude_none=True)
    def search(req: SearchRequest) -> SearchResponse:
        try:
            return engine.search(req.query, req.topk, req.backend)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            count=engine.matrix.count,
            dim=engine.matrix.dim,
            backends=list(engine.config.backends),
        )

    @app.get("/stats", response_model=StatsResponse)
    def stats() -> StatsResponse:
        return engine.stats()

    return app
