import json

import numpy as np
import pytest

from qirat.embedders import HashEmbedder
from qirat.store import PassageRecord, ingest_corpus


@pytest.fixture
def passages():
    return [
        PassageRecord("p1", "the quick brown fox", "en"),
        PassageRecord("p2", "jumps over the lazy dog"),
        PassageRecord("p3", "semantic search with dense vectors", "en"),
    ]


@pytest.fixture
def small_index(tmp_path, passages):
    """A tiny ingested index: (path, matrix, idmap, embedder)."""
    embedder = HashEmbedder(dim=8, seed=0)
    path = tmp_path / "small.emb"
    matrix, idmap = ingest_corpus(passages, embedder, path)
    return path, matrix, idmap, embedder


def write_corpus_jsonl(path, passages):
    with open(path, "w", encoding="utf-8") as f:
        for p in passages:
            obj = {"id": p.id, "text": p.text}
            if p.lang:
                obj["lang"] = p.lang
            f.write(json.dumps(obj) + "\n")
    return path


def assert_matches_oracle(hits, oracle, idmap=None, tol=1e-6):
    """Rows/ids must match the oracle exactly; scores within tolerance.

    The oracle accumulates dot products through BLAS, whose summation order
    differs from the production kernel, so score equality is to a tolerance
    while the ranking itself must be exact.
    """
    assert len(hits) == len(oracle)
    for got, (row, score) in zip(hits, oracle):
        key = idmap[row] if idmap is not None else row
        assert got[0] == key
        assert abs(got[1] - score) <= tol


def oracle_topk(values: np.ndarray, query: np.ndarray, k: int):
    """Independent brute-force oracle: full scores, stable (desc score,
    asc row) sort, truncate. Kept free of the production search path."""
    q = np.asarray(query, dtype=np.float32)
    q = q / np.linalg.norm(q)
    scores = values.astype(np.float32) @ q
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
    return [(i, float(scores[i])) for i in order]
