"""Product quantization with asymmetric distance computation (ADC).

Vectors are split into m contiguous subvectors; each subvector is encoded as
the index of its nearest codebook centroid. A query is scored against the
whole corpus by per-subspace lookup tables of query-centroid inner products;
because corpus rows are unit-normalized, the summed inner product stands in
for cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import formats
from ..errors import TruncatedFileError
from ..exact import ScoredHit, _as_unit_vector, top_rows
from ..store import EmbeddingMatrix
from .kmeans import kmeans


@dataclass
class PQIndex:
    codebooks: np.ndarray  # m x ks x (dim/m), float32
    codes: np.ndarray | None = None  # count x m, uint8

    def __post_init__(self) -> None:
        if self.codebooks.ndim != 3:
            raise ValueError("codebooks must be m x ks x dsub")
        if not np.all(np.isfinite(self.codebooks)):
            raise ValueError("codebooks contain NaN/Inf")
        if self.codes is not None:
            if self.codes.dtype != np.uint8:
                raise ValueError("codes must be uint8")
            if self.codes.shape[1] != self.m:
                raise ValueError("codes width must equal m")
            if self.codes.size and self.codes.max() >= self.ks:
                raise ValueError("code byte out of codebook range")

    @property
    def m(self) -> int:
        return self.codebooks.shape[0]

    @property
    def ks(self) -> int:
        return self.codebooks.shape[1]

    @property
    def dsub(self) -> int:
        return self.codebooks.shape[2]

    @property
    def dim(self) -> int:
        return self.m * self.dsub

    @property
    def count(self) -> int:
        return 0 if self.codes is None else self.codes.shape[0]

    def reconstruct(self, row: int) -> np.ndarray:
        """Decode a stored row back to a dim-length vector."""
        if self.codes is None:
            raise ValueError("index has no encoded vectors")
        parts = [self.codebooks[j, self.codes[row, j]] for j in range(self.m)]
        return np.concatenate(parts)

    def save(self, path: str | Path) -> None:
        if self.codes is None:
            raise ValueError("cannot save an index without codes")
        with open(path, "wb") as f:
            formats.write_header(
                f, formats.MAGIC_PQ, np.dtype(np.float32), True, self.dim, self.count
            )
            f.write(np.array([self.m, self.ks], dtype="<u4").tobytes())
            f.write(np.ascontiguousarray(self.codebooks, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(self.codes).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "PQIndex":
        with open(path, "rb") as f:
            _, _, dim, count = formats.read_header(f, formats.MAGIC_PQ)
            params = formats.read_array(f, np.dtype("<u4"), (2,))
            m, ks = int(params[0]), int(params[1])
            if m == 0 or dim % m != 0:
                raise TruncatedFileError(f"dim {dim} not divisible by m {m}")
            codebooks = formats.read_array(f, np.dtype("<f4"), (m, ks, dim // m))
            codes = formats.read_array(f, np.dtype(np.uint8), (count, m))
        return cls(codebooks, codes)


def _split(values: np.ndarray, m: int) -> np.ndarray:
    count, dim = values.shape
    if dim % m != 0:
        raise ValueError(f"dim {dim} not divisible by m={m}")
    return values.reshape(count, m, dim // m)


def pq_train(
    matrix: EmbeddingMatrix, m: int = 8, ks: int = 256, iters: int = 25, seed: int = 0
) -> PQIndex:
    """Train one k-means codebook per subspace on the full corpus."""
    values = matrix.values.astype(np.float32, copy=False)
    if matrix.count < ks:
        raise ValueError(f"need at least ks={ks} rows to train, got {matrix.count}")
    subs = _split(values, m)
    codebooks = np.stack(
        [kmeans(subs[:, j, :], ks, iters=iters, seed=seed + j) for j in range(m)]
    )
    return PQIndex(codebooks)


def pq_encode(index: PQIndex, matrix: EmbeddingMatrix) -> PQIndex:
    """Assign every subvector to its nearest centroid (squared L2)."""
    values = matrix.values.astype(np.float32, copy=False)
    subs = _split(values, index.m)
    codes = np.empty((values.shape[0], index.m), dtype=np.uint8)
    for j in range(index.m):
        cb = index.codebooks[j]
        d2 = (cb * cb).sum(axis=1)[None, :] - 2.0 * (subs[:, j, :] @ cb.T)
        codes[:, j] = np.argmin(d2, axis=1)
    return PQIndex(index.codebooks, codes)


def pq_search(index: PQIndex, query: Sequence[float] | np.ndarray, k: int) -> list[ScoredHit]:
    """ADC scan: per-subspace lookup tables summed over code bytes."""
    if index.codes is None:
        raise ValueError("cannot search an untrained/unencoded PQ index")
    q = _as_unit_vector(query)
    if q.shape[0] != index.dim:
        raise ValueError(f"query dim {q.shape[0]} != index dim {index.dim}")
    qsub = q.reshape(index.m, index.dsub)
    # luts[j, c] = <q_j, centroid_jc>
    luts = np.einsum("jkd,jd->jk", index.codebooks, qsub)
    scores = np.zeros(index.count, dtype=np.float32)
    for j in range(index.m):
        scores += luts[j][index.codes[:, j]]
    rows, top = top_rows(scores, k)
    return [ScoredHit(int(r), float(s)) for r, s in zip(rows, top)]
