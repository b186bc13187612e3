"""Approximate/compressed comparison indexes: SQ (fp16), PQ, and HNSW."""

from .sq import SQIndex, sq_build, sq_search
from .kmeans import kmeans
from .pq import PQIndex, pq_train, pq_encode, pq_search
from .hnsw import HNSWIndex, hnsw_build, hnsw_search

__all__ = [
    "SQIndex", "sq_build", "sq_search",
    "kmeans",
    "PQIndex", "pq_train", "pq_encode", "pq_search",
    "HNSWIndex", "hnsw_build", "hnsw_search",
]
