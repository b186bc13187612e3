"""Seeded synthetic corpora for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .store import EmbeddingMatrix, IdMap, normalize_rows


def random_corpus(count: int, dim: int, seed: int = 0) -> tuple[EmbeddingMatrix, IdMap]:
    """Uniformly random unit vectors."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((count, dim)).astype(np.float32)
    matrix = EmbeddingMatrix(normalize_rows(values), normalized=True)
    return matrix, IdMap([f"p{i}" for i in range(count)])


def clustered_corpus(
    count: int,
    dim: int,
    clusters: int = 10,
    cluster_std: float = 0.3,
    intrinsic_dim: int = 24,
    ambient_std: float = 0.02,
    twin_fraction: float = 0.0,
    twin_scale: float = 1e-5,
    seed: int = 0,
) -> tuple[EmbeddingMatrix, IdMap, np.ndarray]:
    """Gaussian-mixture corpus; returns (matrix, idmap, cluster labels).

    Points are sampled around cluster centers in a low-dimensional latent
    space and mapped into the full space through a fixed random projection,
    plus small full-rank ambient noise. Real embedding distributions have
    low intrinsic dimension; a fully isotropic mixture in hundreds of
    dimensions would make every within-cluster pair nearly equidistant.

    ``twin_fraction`` turns that share of rows into near-duplicates of other
    rows at distance ~``twin_scale``, mimicking the boilerplate and
    near-identical passages of a real corpus; their score gaps sit below
    half-precision resolution while full precision still orders them.
    """
    rng = np.random.default_rng(seed)
    intrinsic_dim = min(intrinsic_dim, dim)
    projection = rng.standard_normal((intrinsic_dim, dim)) / np.sqrt(intrinsic_dim)
    centers = rng.standard_normal((clusters, intrinsic_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.integers(0, clusters, size=count)
    latent = centers[labels] + cluster_std * rng.standard_normal((count, intrinsic_dim))
    points = latent @ projection + ambient_std * rng.standard_normal((count, dim))
    if twin_fraction > 0.0:
        twins = int(count * twin_fraction)
        chosen = rng.choice(count, size=2 * twins, replace=False)
        sources, copies = chosen[:twins], chosen[twins:]
        points[copies] = points[sources] + twin_scale * rng.standard_normal((twins, dim))
        labels[copies] = labels[sources]
    matrix = EmbeddingMatrix(normalize_rows(points.astype(np.float32)), normalized=True)
    return matrix, IdMap([f"p{i}" for i in range(count)]), labels


def clustered_queries(
    matrix: EmbeddingMatrix, n: int, noise: float = 0.05, seed: int = 1
) -> list[tuple[str, np.ndarray]]:
    """Queries sampled as perturbed corpus rows (stays near the clusters)."""
    rng = np.random.default_rng(seed)
    rows = rng.choice(matrix.count, size=n, replace=False)
    out = []
    for i, row in enumerate(rows):
        vec = matrix.values[row].astype(np.float32) + noise * rng.standard_normal(
            matrix.dim
        ).astype(np.float32)
        out.append((f"q{i}", vec))
    return out
