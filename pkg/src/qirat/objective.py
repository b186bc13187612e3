"""In-batch-negative contrastive objective for a dual encoder.

For a batch of B (query, passage) positive pairs the loss treats every other
passage in the batch as a negative:

    loss = -(1/B) sum_i log( exp(s_ii / tau) / sum_j exp(s_ij / tau) )

with s_ij the cosine similarity of query i and passage j. Gradients are
analytic and validated against finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ContrastiveBatch:
    queries: np.ndarray   # B x d
    passages: np.ndarray  # B x d, row i is the positive for query i
    tau: float = 0.05

    def __post_init__(self) -> None:
        self.queries = np.asarray(self.queries, dtype=np.float64)
        self.passages = np.asarray(self.passages, dtype=np.float64)
        if self.queries.shape != self.passages.shape or self.queries.ndim != 2:
            raise ValueError("queries and passages must be equal-shaped B x d arrays")
        if not (np.all(np.isfinite(self.queries)) and np.all(np.isfinite(self.passages))):
            raise ValueError("batch contains NaN/Inf")
        if self.tau <= 0:
            raise ValueError("temperature must be positive")
        if np.any(np.linalg.norm(self.queries, axis=1) == 0) or np.any(
            np.linalg.norm(self.passages, axis=1) == 0
        ):
            raise ValueError("zero vector in batch")

    @property
    def size(self) -> int:
        return self.queries.shape[0]


def _cosine_matrix(batch: ContrastiveBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    qn = np.linalg.norm(batch.queries, axis=1)
    pn = np.linalg.norm(batch.passages, axis=1)
    sims = (batch.queries @ batch.passages.T) / np.outer(qn, pn)
    return sims, qn, pn


def info_nce_loss(batch: ContrastiveBatch) -> float:
    sims, _, _ = _cosine_matrix(batch)
    logits = sims / batch.tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_softmax = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-np.mean(np.diag(log_softmax)))


def info_nce_grad(batch: ContrastiveBatch) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of the loss w.r.t. query and passage vectors."""
    sims, qn, pn = _cosine_matrix(batch)
    b = batch.size
    logits = sims / batch.tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    softmax = exp / exp.sum(axis=1, keepdims=True)
    # dL/ds_ij
    g = (softmax - np.eye(b)) / (b * batch.tau)

    # s_ij = q_i . p_j / (|q_i| |p_j|)
    # ds/dq_i = p_j / (|q_i||p_j|) - s_ij q_i / |q_i|^2
    grad_q = (g / pn[None, :]) @ batch.passages / qn[:, None]
    grad_q -= ((g * sims).sum(axis=1) / qn**2)[:, None] * batch.queries
    grad_p = (g / qn[:, None]).T @ batch.queries / pn[:, None]
    grad_p -= ((g * sims).sum(axis=0) / pn**2)[:, None] * batch.passages
    return grad_q, grad_p


def toy_training_run(
    batch_size: int = 8,
    dim: int = 16,
    steps: int = 50,
    lr: float = 0.5,
    tau: float = 0.05,
    seed: int = 0,
) -> list[float]:
    """Gradient-descend raw query/passage vectors on one synthetic batch.

    Returns the per-step loss trace (strictly useful as a smoke demo that the
    objective pulls positives together).
    """
    rng = np.random.default_rng(seed)
    queries = rng.standard_normal((batch_size, dim))
    passages = rng.standard_normal((batch_size, dim))
    losses = []
    for _ in range(steps):
        batch = ContrastiveBatch(queries, passages, tau)
        losses.append(info_nce_loss(batch))
        gq, gp = info_nce_grad(batch)
        queries = queries - lr * gq
        passages = passages - lr * gp
    return losses
