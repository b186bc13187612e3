"""Text-to-vector embedders.

Real model inference is out of scope; the stub embedder is a seeded
hash-based bag-of-tokens random projection so that identical texts always
map to identical unit vectors, across processes and restarts. Adapters can
pull vectors from a file or an external subprocess instead.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from pathlib import Path
from typing import Protocol

import numpy as np


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def _token_seed(token: str, seed: int) -> int:
    digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class HashEmbedder:
    """Deterministic stub: sum of per-token seeded Gaussian vectors, normalized."""

    def __init__(self, dim: int = 64, seed: int = 0) -> None:
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        tokens = text.lower().split() or ["<empty>"]
        acc = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            rng = np.random.default_rng(_token_seed(token, self.seed))
            acc += rng.standard_normal(self.dim)
        norm = np.linalg.norm(acc)
        if norm == 0.0:  # astronomically unlikely, but keep the contract total
            acc[0] = 1.0
            norm = 1.0
        return (acc / norm).astype(np.float32)


class VectorFileEmbedder:
    """Looks up precomputed vectors from a JSON-lines file of
    {"text": ..., "vector": [...]} records."""

    def __init__(self, path: str | Path) -> None:
        self._vectors: dict[str, np.ndarray] = {}
        dim = None
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                vec = np.asarray(obj["vector"], dtype=np.float32)
                if dim is None:
                    dim = vec.shape[0]
                elif vec.shape[0] != dim:
                    raise ValueError(f"vector dimension mismatch for {obj['text']!r}")
                self._vectors[obj["text"]] = vec
        if dim is None:
            raise ValueError(f"no vectors in {path}")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        try:
            return self._vectors[text]
        except KeyError:
            raise ValueError(f"no precomputed vector for text {text!r}") from None


class SubprocessEmbedder:
    """Streams texts to an external command that answers one JSON vector
    (a plain list of floats) per input line."""

    def __init__(self, command: list[str], dim: int) -> None:
        self.dim = dim
        self._proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )

    def embed(self, text: str) -> np.ndarray:
        assert self._proc.stdin and self._proc.stdout
        self._proc.stdin.write(json.dumps({"text": text}) + "\n")
        self._proc.stdin.flush()
        reply = self._proc.stdout.readline()
        if not reply:
            raise RuntimeError("embedder subprocess closed its output")
        vec = np.asarray(json.loads(reply), dtype=np.float32)
        if vec.shape != (self.dim,):
            raise ValueError(f"subprocess returned shape {vec.shape}, expected ({self.dim},)")
        return vec

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=5)
