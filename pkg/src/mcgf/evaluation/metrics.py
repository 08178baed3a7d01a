"""Top-K ranking metrics with binary relevance.

Recall divides the hit count by ``min(|truth|, K)`` so that a perfect list
scores 1 even for users with more than ``K`` positives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from mcgf.ingest.tensor import RatingTensor


def recall_at_k(recommended, truth, K: int) -> float:
    if K < 1:
        raise ValueError("K must be >= 1")
    truth = set(truth)
    if not truth:
        raise ValueError("recall is undefined for an empty truth set")
    hits = sum(1 for i in list(recommended)[:K] if i in truth)
    return hits / min(len(truth), K)


def _discounts(K: int) -> np.ndarray:
    return np.array([1.0 / math.log2(r + 1) for r in range(1, K + 1)])


def ndcg_at_k(recommended, truth, K: int) -> float:
    if K < 1:
        raise ValueError("K must be >= 1")
    truth = set(truth)
    if not truth:
        raise ValueError("NDCG is undefined for an empty truth set")
    # plain left-to-right sums in rank order
    dcg = 0.0
    for r, i in enumerate(list(recommended)[:K], start=1):
        if i in truth:
            dcg += 1.0 / math.log2(r + 1)
    idcg = 0.0
    for r in range(1, min(len(truth), K) + 1):
        idcg += 1.0 / math.log2(r + 1)
    return dcg / idcg


@dataclass(frozen=True)
class GroundTruth:
    """Positive test items per user, from a single fold-wide median."""

    median: float
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def users(self) -> np.ndarray:
        """Users with at least one positive, ascending."""
        return np.flatnonzero(np.diff(self.matrix.indptr) > 0)

    def items(self, u: int) -> np.ndarray:
        m = self.matrix
        return m.indices[m.indptr[u]:m.indptr[u + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)


def positives(test: RatingTensor) -> GroundTruth:
    """Interactions whose overall rating is strictly above the fold median."""
    m = test.overall.to_scipy()
    if m.nnz == 0:
        return GroundTruth(float("nan"), sp.csr_matrix(m.shape, dtype=bool))
    med = float(np.median(m.data))
    keep = m.data > med
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    pos = sp.csr_matrix((np.ones(int(keep.sum()), dtype=bool), (rows[keep], m.indices[keep])),
                        shape=m.shape)
    pos.sort_indices()
    return GroundTruth(med, pos)


def hit_matrix(recs: np.ndarray, truth_rows: sp.csr_matrix) -> np.ndarray:
    """Boolean ``(n, K)`` hits for padded recommendation rows (``-1`` = empty)."""
    dense = truth_rows.toarray() if truth_rows.shape[1] else np.zeros((recs.shape[0], 0), bool)
    safe = np.where(recs >= 0, recs, 0)
    hits = np.take_along_axis(dense, safe, axis=1) if recs.size else np.zeros(recs.shape, bool)
    return hits & (recs >= 0)


def batch_metrics(recs: np.ndarray, truth_rows: sp.csr_matrix, ks) -> dict[str, np.ndarray]:
    """Per-user recall@k and ndcg@k for each ``k`` in ``ks``.

    ``recs`` holds each user's ranked items, padded with ``-1``; every user
    must have at least one positive in ``truth_rows``.
    """
    hits = hit_matrix(recs, truth_rows)
    n_true = np.diff(truth_rows.indptr)
    out = {}
    kmax = max(ks)
    disc = _discounts(kmax)
    cum_ideal = np.cumsum(disc)
    for k in ks:
        h = hits[:, :k]
        denom = np.minimum(n_true, k)
        out[f"recall@{k}"] = h.sum(axis=1) / denom
        dcg = (h * disc[:h.shape[1]]).sum(axis=1)
        out[f"ndcg@{k}"] = dcg / cum_ideal[denom - 1]
    return out


METRIC_ORDER = ("recall", "ndcg")


def metric_names(ks) -> list[str]:
    return [f"{m}@{k}" for m in METRIC_ORDER for k in ks]
