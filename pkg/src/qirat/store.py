"""Corpus embedding store: ingest, persist, load, normalize, partition.

An index on disk is a pair of files: ``<name>.emb`` (binary embedding
matrix, see :mod:`qirat.formats`) and ``<name>.ids`` (UTF-8 id map, one
passage id per line, line n <-> matrix row n).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import formats
from .errors import TruncatedFileError

NORM_TOLERANCE = 1e-4


@dataclass(frozen=True)
class PassageRecord:
    id: str
    text: str
    lang: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("passage id must be non-empty")
        if not self.text:
            raise ValueError(f"passage {self.id!r} has empty text")


@dataclass
class EmbeddingMatrix:
    """Row-major passage-embedding matrix. Immutable once loaded."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if self.values.dtype not in (np.float32, np.float16):
            raise ValueError(f"unsupported dtype {self.values.dtype}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding matrix contains NaN/Inf")
        if self.normalized and self.count:
            norms = np.linalg.norm(self.values.astype(np.float32), axis=1)
            if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise ValueError(f"row {bad} marked normalized but has norm {norms[bad]}")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def dtype(self) -> np.dtype:
        return self.values.dtype


@dataclass
class IdMap:
    """Ordered passage ids; position = matrix row."""

    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            seen: set[str] = set()
            dup = next(i for i in self.ids if i in seen or seen.add(i))
            raise ValueError(f"duplicate passage id {dup!r}")

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, row: int) -> str:
        return self.ids[row]


def read_passages(path: str | Path) -> list[PassageRecord]:
    """Read a JSON-lines corpus: one object per line with id, text, optional lang."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            try:
                records.append(PassageRecord(obj["id"], obj["text"], obj.get("lang")))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return records


def normalize_rows(values: np.ndarray) -> np.ndarray:
    """Divide each row by its L2 norm. Rejects zero rows by index."""
    wide = values.astype(np.float32, copy=False)
    norms = np.linalg.norm(wide, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"cannot normalize zero vector at row {int(zero[0])}")
    return (wide / norms[:, None]).astype(values.dtype)


def partition(count: int, workers: int) -> list[tuple[int, int]]:
    """Split [0, count) into ``workers`` contiguous ranges, sizes differing by
    at most 1, earlier ranges taking the extra row. Trailing ranges may be
    empty when workers > count."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    base, extra = divmod(count, workers)
    ranges = []
    start = 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        ranges.append((start, start + size))
        start += size
    return ranges


def ingest_corpus(
    passages: Sequence[PassageRecord],
    embedder,
    out_path: str | Path,
    dtype: str | np.dtype = np.float32,
) -> tuple[EmbeddingMatrix, IdMap]:
    """Embed passages, L2-normalize rows, and write the index file pair.

    Returns the in-memory (matrix, idmap) that was persisted.
    """
    if not passages:
        raise ValueError("cannot ingest an empty corpus")
    seen: set[str] = set()
    for p in passages:
        if p.id in seen:
            raise ValueError(f"duplicate passage id {p.id!r}")
        seen.add(p.id)

    vectors = []
    dim = None
    for p in passages:
        v = np.asarray(embedder.embed(p.text), dtype=np.float32)
        if v.ndim != 1:
            raise ValueError(f"embedder returned non-vector for passage {p.id!r}")
        if dim is None:
            dim = v.shape[0]
        elif v.shape[0] != dim:
            raise ValueError(
                f"embedder dimension mismatch at passage {p.id!r}: "
                f"expected {dim}, got {v.shape[0]}"
            )
        vectors.append(v)

    raw = np.vstack(vectors)
    normalized = normalize_rows(raw).astype(np.dtype(dtype))
    matrix = EmbeddingMatrix(normalized, normalized=True)
    idmap = IdMap([p.id for p in passages])
    save_index(matrix, idmap, out_path)
    return matrix, idmap


def _paths(path: str | Path) -> tuple[Path, Path]:
    emb = Path(path)
    return emb, emb.with_suffix(".ids")


def save_index(matrix: EmbeddingMatrix, idmap: IdMap, path: str | Path) -> None:
    if len(idmap) != matrix.count:
        raise ValueError(f"id map has {len(idmap)} entries for {matrix.count} rows")
    emb_path, ids_path = _paths(path)
    with open(emb_path, "wb") as f:
        formats.write_header(
            f, formats.MAGIC_EMBEDDINGS, matrix.dtype, matrix.normalized,
            matrix.dim, matrix.count,
        )
        f.write(np.ascontiguousarray(matrix.values).tobytes())
    with open(ids_path, "w", encoding="utf-8") as f:
        for pid in idmap.ids:
            f.write(pid + "\n")


def load_index(path: str | Path) -> tuple[EmbeddingMatrix, IdMap]:
    emb_path, ids_path = _paths(path)
    with open(emb_path, "rb") as f:
        dtype, normalized, dim, count = formats.read_header(f, formats.MAGIC_EMBEDDINGS)
        values = formats.read_array(f, dtype, (count, dim))
    values.setflags(write=False)
    matrix = EmbeddingMatrix(values, normalized=normalized)
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(ids) != count:
        raise TruncatedFileError(
            f"id map has {len(ids)} lines but matrix declares {count} rows"
        )
    return matrix, IdMap(ids)
