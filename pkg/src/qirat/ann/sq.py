"""Scalar quantization: exact scan over fp16-compressed vectors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import formats
from ..exact import ScoredHit, _as_unit_vector, top_rows
from ..store import EmbeddingMatrix

FP16_MAX = 65504.0


@dataclass
class SQIndex:
    values: np.ndarray  # count x dim, float16

    def __post_init__(self) -> None:
        if self.values.dtype != np.float16:
            raise ValueError("SQ index stores float16 values")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            formats.write_header(
                f, formats.MAGIC_SQ, np.dtype(np.float16), True, self.dim, self.count
            )
            f.write(np.ascontiguousarray(self.values).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "SQIndex":
        with open(path, "rb") as f:
            dtype, _, dim, count = formats.read_header(f, formats.MAGIC_SQ)
            values = formats.read_array(f, dtype, (count, dim))
        return cls(values)


def sq_build(matrix: EmbeddingMatrix) -> SQIndex:
    """Compress to fp16 with round-to-nearest-even (numpy's cast)."""
    wide = matrix.values.astype(np.float32, copy=False)
    if np.any(np.abs(wide) > FP16_MAX):
        bad = np.argwhere(np.abs(wide) > FP16_MAX)[0]
        raise ValueError(f"value at {tuple(bad)} overflows the fp16 range")
    return SQIndex(wide.astype(np.float16))


def sq_search(index: SQIndex, query: Sequence[float] | np.ndarray, k: int) -> list[ScoredHit]:
    """Full scan scoring fp16 rows widened to float32; ties as exact search."""
    q = _as_unit_vector(query)
    if q.shape[0] != index.dim:
        raise ValueError(f"query dim {q.shape[0]} != index dim {index.dim}")
    scores = index.values.astype(np.float32) @ q
    rows, top = top_rows(scores, k)
    return [ScoredHit(int(r), float(s)) for r, s in zip(rows, top)]
