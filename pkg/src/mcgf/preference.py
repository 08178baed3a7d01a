"""Per-user criteria preferences, weighted aggregation, ranking, attribution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mcgf.filtering import FilterConfig, resolve_filters, score_user_criterion
from mcgf.graph import ItemGraphBank
from mcgf.ingest.tensor import RatingTensor
from mcgf.sparse import DimensionError, ParameterError


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    """Criteria preference weights, one row per user and one column per criterion."""

    values: np.ndarray
    s_T: float = 1.0

    @property
    def n_users(self) -> int:
        return self.values.shape[0]

    @property
    def n_criteria(self) -> int:
        return self.values.shape[1]

    @classmethod
    def uniform(cls, n_users: int, n_criteria: int) -> "PreferenceMatrix":
        return cls(np.ones((n_users, n_criteria)), 1.0)


def rating_sums(t: RatingTensor) -> np.ndarray:
    """``X[u, c]``: sum of user ``u``'s ratings under criterion ``c``."""
    return np.column_stack([m.row_sums() for m in t.matrices])


def build_preferences(t: RatingTensor, s_T: float = 1.0) -> PreferenceMatrix:
    """Row-normalized rating sums smoothed through the criterion-criterion graph.

    ``X̃ = D_X^{-1} X`` (users without ratings keep a zero row),
    ``T = X̃ᵀX̃``, ``T̄ = T^{∘s_T}`` and the preferences are ``X̃ T̄``.
    """
    if not s_T > 0:
        raise ParameterError(f"s_T must be > 0, got {s_T}")
    X = rating_sums(t)
    tot = X.sum(axis=1)
    Xn = np.zeros_like(X)
    nz = tot > 0
    Xn[nz] = X[nz] / tot[nz, None]
    T = Xn.T @ Xn
    Tb = np.zeros_like(T)
    pos = T > 0
    Tb[pos] = T[pos] ** s_T
    return PreferenceMatrix(Xn @ Tb, float(s_T))


def aggregate(prefs: PreferenceMatrix, per_criterion_scores: Sequence[np.ndarray], u: int) -> np.ndarray:
    """Preference-weighted mean of one user's per-criterion scores."""
    w = prefs.values[u]
    if len(per_criterion_scores) != len(w):
        raise DimensionError(f"{len(per_criterion_scores)} score vectors for {len(w)} criteria")
    out = np.zeros_like(np.asarray(per_criterion_scores[0], dtype=np.float64))
    for wc, s in zip(w, per_criterion_scores):
        out += wc * np.asarray(s, dtype=np.float64)
    return out / len(w)


def rank_topk(s_u, mask, K: int) -> list[int]:
    """The ``K`` best unmasked items, by descending score then ascending id."""
    if K < 1:
        raise ParameterError("K must be >= 1")
    s = np.asarray(s_u, dtype=np.float64)
    allowed = np.ones(len(s), dtype=bool)
    m = list(mask) if not isinstance(mask, np.ndarray) else mask
    if len(m):
        allowed[np.asarray(m, dtype=np.int64)] = False
    return topk_indices(s, allowed, K).tolist()


def topk_indices(s: np.ndarray, allowed: np.ndarray, K: int) -> np.ndarray:
    cand = np.flatnonzero(allowed)
    if len(cand) > K:
        vals = s[cand]
        kth = np.partition(vals, len(vals) - K)[len(vals) - K]
        cand = cand[vals >= kth]
    order = np.lexsort((cand, -s[cand]))
    return cand[order[:K]]


def topk_block(scores: np.ndarray, masks, K: int) -> np.ndarray:
    """Row-wise :func:`topk_indices` for a score block.

    ``masks`` is a CSR matrix whose stored entries mark hidden items. Rows
    with fewer than ``K`` visible items are padded with ``-1``.
    """
    n, m = scores.shape
    out = np.full((n, K), -1, dtype=np.int64)
    if n == 0 or m == 0:
        return out
    s = np.array(scores, dtype=np.float64)
    rows = np.repeat(np.arange(n), np.diff(masks.indptr))
    s[rows, masks.indices] = -np.inf
    n_visible = m - np.diff(masks.indptr)
    k = min(K, m)
    part = np.argpartition(s, m - k, axis=1)[:, m - k:]
    vals = np.take_along_axis(s, part, axis=1)
    kth = vals.min(axis=1)
    # rows where ties straddle the cut, or too few visible items, go the slow way
    n_ge = (s >= kth[:, None]).sum(axis=1)
    exact = (n_ge == k) & (n_visible >= K)
    order = np.lexsort((part, -vals), axis=1)
    fast = np.take_along_axis(part, order, axis=1)
    out[exact, :k] = fast[exact]
    allowed = np.ones(m, dtype=bool)
    for r in np.flatnonzero(~exact):
        hidden = masks.indices[masks.indptr[r]:masks.indptr[r + 1]]
        allowed[hidden] = False
        top = topk_indices(scores[r], allowed, K)
        out[r, :len(top)] = top
        allowed[hidden] = True
    return out


@dataclass(frozen=True)
class AttributionMap:
    """Contribution of each criterion to one (user, item) score.

    ``contributions.sum() / len(contributions)`` equals the aggregated score.
    """

    user: int
    item: int
    contributions: np.ndarray
    criterion_names: tuple[str, ...] = ()

    @property
    def score(self) -> float:
        return float(self.contributions.sum() / len(self.contributions))


def attribution(prefs: PreferenceMatrix, bank: ItemGraphBank, config, train: RatingTensor,
                u: int, i: int) -> AttributionMap:
    if not 0 <= u < train.n_users or not 0 <= i < train.n_items:
        raise IndexError(f"user {u} / item {i} outside the index space")
    cfg: FilterConfig = resolve_filters(config, train.n_criteria)
    contrib = np.empty(train.n_criteria)
    for c, m in enumerate(train.matrices):
        r = m.to_scipy().getrow(u).toarray().ravel()
        s_uc = score_user_criterion(bank, cfg[c], r)
        contrib[c] = prefs.values[u, c] * s_uc[i]
    return AttributionMap(u, i, contrib, train.criterion_names)
