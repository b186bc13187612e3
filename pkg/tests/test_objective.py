import math

import numpy as np
import pytest

from qirat.objective import (
    ContrastiveBatch,
    info_nce_grad,
    info_nce_loss,
    toy_training_run,
)


def oracle_loss(queries, passages, tau):
    """Independent straightforward restatement of the objective."""
    b = queries.shape[0]
    total = 0.0
    for i in range(b):
        qi = queries[i]
        sims = []
        for j in range(b):
            pj = passages[j]
            sims.append(
                float(np.dot(qi, pj) / (np.linalg.norm(qi) * np.linalg.norm(pj)))
            )
        num = math.exp(sims[i] / tau)
        den = sum(math.exp(s / tau) for s in sims)
        total += -math.log(num / den)
    return total / b


def finite_diff_grads(batch, h=1e-6):
    gq = np.zeros_like(batch.queries)
    gp = np.zeros_like(batch.passages)
    for arr, grad in ((batch.queries, gq), (batch.passages, gp)):
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = info_nce_loss(ContrastiveBatch(batch.queries, batch.passages, batch.tau))
            arr[idx] = orig - h
            down = info_nce_loss(ContrastiveBatch(batch.queries, batch.passages, batch.tau))
            arr[idx] = orig
            grad[idx] = (up - down) / (2 * h)
    return gq, gp


class TestLoss:
    def test_single_pair_is_zero(self):
        batch = ContrastiveBatch(np.ones((1, 4)), np.ones((1, 4)))
        assert info_nce_loss(batch) == 0.0

    def test_uniform_two_by_two_is_ln2(self):
        # identical passages make every similarity equal
        q = np.array([[1.0, 0.0], [0.0, 1.0]])
        p = np.array([[1.0, 1.0], [1.0, 1.0]])
        batch = ContrastiveBatch(q, p, tau=0.05)
        assert info_nce_loss(batch) == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_independent_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            q = rng.standard_normal((3, 6))
            p = rng.standard_normal((3, 6))
            batch = ContrastiveBatch(q, p, tau=0.05)
            assert info_nce_loss(batch) == pytest.approx(oracle_loss(q, p, 0.05), abs=1e-10)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        q = rng.standard_normal((4, 8))
        p = rng.standard_normal((4, 8))
        base = info_nce_loss(ContrastiveBatch(q, p))
        scaled = info_nce_loss(ContrastiveBatch(q * 7.5, p * 0.003))
        assert scaled == pytest.approx(base, abs=1e-10)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(2)
        q = rng.standard_normal((4, 8))
        p = rng.standard_normal((4, 8))
        rot, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        base = info_nce_loss(ContrastiveBatch(q, p))
        rotated = info_nce_loss(ContrastiveBatch(q @ rot, p @ rot))
        assert rotated == pytest.approx(base, abs=1e-9)

    def test_pair_permutation_invariance(self):
        rng = np.random.default_rng(3)
        q = rng.standard_normal((5, 6))
        p = rng.standard_normal((5, 6))
        perm = rng.permutation(5)
        base = info_nce_loss(ContrastiveBatch(q, p))
        permuted = info_nce_loss(ContrastiveBatch(q[perm], p[perm]))
        assert permuted == pytest.approx(base, abs=1e-12)

    def test_large_logits_stay_finite(self):
        q = np.eye(2) * 1e3
        p = np.eye(2) * 1e3
        loss = info_nce_loss(ContrastiveBatch(q, p, tau=1e-4))
        assert math.isfinite(loss)

    def test_bad_batches_rejected(self):
        with pytest.raises(ValueError):
            ContrastiveBatch(np.ones((2, 3)), np.ones((3, 3)))
        with pytest.raises(ValueError):
            ContrastiveBatch(np.ones((2, 3)), np.ones((2, 3)), tau=0.0)
        with pytest.raises(ValueError):
            ContrastiveBatch(np.zeros((2, 3)), np.ones((2, 3)))
        bad = np.ones((2, 3))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            ContrastiveBatch(bad, np.ones((2, 3)))


class TestGrad:
    def test_single_pair_gradient_is_zero(self):
        batch = ContrastiveBatch(np.ones((1, 4)), np.full((1, 4), 2.0))
        gq, gp = info_nce_grad(batch)
        assert np.allclose(gq, 0) and np.allclose(gp, 0)

    def test_saturated_batch_has_tiny_gradient(self):
        # orthogonal positives: s_ii = 1, s_ij = 0, small tau saturates softmax
        q = np.eye(4)
        batch = ContrastiveBatch(q, q.copy(), tau=0.01)
        gq, gp = info_nce_grad(batch)
        assert np.abs(gq).max() < 1e-8 and np.abs(gp).max() < 1e-8

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("shape", [(2, 4), (4, 16), (8, 4)])
    def test_matches_finite_differences(self, seed, shape):
        rng = np.random.default_rng(seed)
        batch = ContrastiveBatch(
            rng.standard_normal(shape), rng.standard_normal(shape), tau=0.05
        )
        gq, gp = info_nce_grad(batch)
        fq, fp = finite_diff_grads(batch)
        scale = max(np.abs(fq).max(), np.abs(fp).max())
        assert np.abs(gq - fq).max() / scale < 1e-4
        assert np.abs(gp - fp).max() / scale < 1e-4


class TestToyRun:
    def test_loss_decreases(self):
        losses = toy_training_run(batch_size=6, dim=8, steps=40, seed=4)
        assert losses[-1] < losses[0]
        assert all(math.isfinite(x) for x in losses)
