import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

import oracles
from mcgf.evaluation.metrics import (
    batch_metrics, hit_matrix, metric_names, ndcg_at_k, positives, recall_at_k,
)
from mcgf.ingest.tensor import RatingTensor
from mcgf.sparse import SparseMatrix


class TestScalarMetrics:
    def test_worked_example(self):
        assert recall_at_k([1, 2], {1, 3}, 2) == 0.5
        assert ndcg_at_k([1, 2], {1, 3}, 2) == pytest.approx(0.6131, abs=5e-5)
        assert ndcg_at_k([1, 2], {1, 3}, 2) == pytest.approx(1 / (1 + 1 / np.log2(3)), rel=1e-15)

    def test_perfect_and_empty(self):
        assert recall_at_k([3, 4], {3, 4}, 2) == 1.0 and ndcg_at_k([3, 4], {3, 4}, 2) == 1.0
        assert recall_at_k([5, 6], {3, 4}, 2) == 0.0 and ndcg_at_k([5, 6], {3, 4}, 2) == 0.0

    def test_denominator_caps_at_k(self):
        assert recall_at_k([0, 1], set(range(10)), 2) == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            recall_at_k([1], set(), 1)
        with pytest.raises(ValueError):
            ndcg_at_k([1], {1}, 0)

    def test_brute_force_1000_cases(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n_items = int(rng.integers(1, 40))
            K = int(rng.integers(1, 15))
            rec = rng.permutation(n_items)[: int(rng.integers(0, n_items + 1))].tolist()
            truth = set(rng.choice(n_items, size=int(rng.integers(1, n_items + 1)), replace=False).tolist())
            assert recall_at_k(rec, truth, K) == oracles.recall(rec, truth, K)
            assert ndcg_at_k(rec, truth, K) == oracles.ndcg(rec, truth, K)

    @given(st.integers(0, 2**32 - 1))
    def test_adding_a_hit_never_hurts(self, seed):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(1, 10))
        truth = set(rng.choice(30, size=int(rng.integers(1, 10)), replace=False).tolist())
        rec = [i for i in rng.permutation(30).tolist() if i not in truth][:K]
        base_r, base_n = recall_at_k(rec, truth, K), ndcg_at_k(rec, truth, K)
        for pos in range(len(rec)):
            better = list(rec)
            better[pos] = next(iter(truth))
            assert recall_at_k(better, truth, K) >= base_r
            assert ndcg_at_k(better, truth, K) >= base_n


class TestBatch:
    def test_padded_rows_and_names(self):
        recs = np.array([[0, 2, -1], [1, 0, 2]])
        truth = sp.csr_matrix(np.array([[1, 0, 0], [0, 0, 1]], dtype=bool))
        assert hit_matrix(recs, truth).tolist() == [[True, False, False], [False, False, True]]
        out = batch_metrics(recs, truth, (1, 3))
        assert out["recall@1"].tolist() == [1.0, 0.0]
        assert out["recall@3"].tolist() == [1.0, 1.0]
        assert metric_names((5, 10)) == ["recall@5", "recall@10", "ndcg@5", "ndcg@10"]

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(1)
        n, m, K = 200, 30, 10
        recs = np.stack([rng.permutation(m)[:K] for _ in range(n)])
        dense = rng.random((n, m)) < 0.2
        dense[np.arange(n), rng.integers(0, m, n)] = True
        out = batch_metrics(recs, sp.csr_matrix(dense), (5, 10))
        for u in range(n):
            truth = set(np.flatnonzero(dense[u]).tolist())
            for k in (5, 10):
                assert out[f"recall@{k}"][u] == oracles.recall(recs[u].tolist(), truth, k)
                assert out[f"ndcg@{k}"][u] == pytest.approx(oracles.ndcg(recs[u].tolist(), truth, k),
                                                            rel=1e-14)


class TestPositives:
    def _fold(self, ratings):
        n = len(ratings)
        m = SparseMatrix.from_coo(np.arange(n), np.zeros(n, dtype=int), np.asarray(ratings, float), (n, 1))
        return RatingTensor((m,))

    def test_median_rule(self):
        gt = positives(self._fold([1, 2, 3, 4, 5]))
        assert gt.median == 3 and gt.users.tolist() == [3, 4]

    def test_all_equal_means_no_positives(self):
        gt = positives(self._fold([4, 4, 4]))
        assert len(gt.users) == 0

    def test_brute_force(self):
        rng = np.random.default_rng(2)
        u = rng.integers(0, 100, 1000)
        i = rng.integers(0, 80, 1000)
        keys = np.unique(u * 80 + i)
        r = rng.integers(1, 6, len(keys)).astype(float)
        m = SparseMatrix.from_coo(keys // 80, keys % 80, r, (100, 80))
        gt = positives(RatingTensor((m,)))
        med = oracles.median(r.tolist())
        assert gt.median == med
        expect = {(int(k // 80), int(k % 80)) for k, v in zip(keys, r) if v > med}
        got = {(int(a), int(b)) for a, b in zip(*gt.matrix.nonzero())}
        assert got == expect
        assert gt.counts().sum() == len(expect)

    def test_empty_fold(self):
        gt = positives(RatingTensor((SparseMatrix.empty(3, 2),)))
        assert len(gt.users) == 0 and np.isnan(gt.median)
