"""Seeded Lloyd's k-means used to train PQ codebooks."""

from __future__ import annotations

import numpy as np


def _assign(data: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point (squared L2) and per-point distances."""
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2 ; ||x||^2 constant per point for argmin
    cross = data @ centroids.T
    d2 = (centroids * centroids).sum(axis=1)[None, :] - 2.0 * cross
    labels = np.argmin(d2, axis=1)
    dist = d2[np.arange(data.shape[0]), labels] + (data * data).sum(axis=1)
    return labels, np.maximum(dist, 0.0)


def kmeans(data: np.ndarray, k: int, iters: int = 25, seed: int = 0) -> np.ndarray:
    """Train k centroids; deterministic given the seed.

    Initialization samples k distinct data points. Empty clusters are
    re-seeded from the point currently farthest from its centroid.
    """
    data = np.asarray(data, dtype=np.float32)
    n = data.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    centroids = data[rng.choice(n, size=k, replace=False)].copy()
    for _ in range(iters):
        labels, dist = _assign(data, centroids)
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = data[members].mean(axis=0)
            else:
                far = int(np.argmax(dist))
                centroids[c] = data[far]
                dist[far] = 0.0
    return centroids


def objective(data: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared distances to the assigned centroids."""
    _, dist = _assign(np.asarray(data, dtype=np.float32), centroids)
    return float(dist.sum())
