"""Batch scoring of every user against a shared, immutable graph bank.

Criteria that run on the same graph are merged before filtering: by
linearity, ``sum_c w_c r_c f_c(P̄)`` is evaluated as one Horner pass whose
order-``k`` signal is ``sum_c w_c a_{c,k} r_c``. Each graph therefore costs
at most ``K`` products against ``P̄`` no matter how many criteria use it.

Users are processed in fixed-size chunks. Chunk boundaries never depend on
the thread count, and BLAS is pinned to one thread per chunk, so the output
is bit-identical for any ``threads``.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from mcgf.filtering import FilterConfig, check_exponents, families_used, resolve_filters
from mcgf.graph import ItemGraphBank
from mcgf.ingest.tensor import RatingTensor
from mcgf.preference import PreferenceMatrix
from mcgf.sparse import DimensionError

log = logging.getLogger(__name__)

CHUNK = 256
#: densify a graph when it is at least this full and fits the byte budget
DENSE_FILL = 0.05
DENSE_BYTES = 1_600_000_000


def available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def _use_dense(bank: ItemGraphBank) -> bool:
    n = bank.n_items
    if n == 0:
        return False
    return bank.p_tilde.nnz / (n * n) >= DENSE_FILL and n * n * 8 <= DENSE_BYTES


class _Graph:
    """One filter graph prepared for products with row-signal blocks."""

    def __init__(self, bank: ItemGraphBank, key: str, dense: bool):
        self.dense = dense
        self.m = bank.dense(key) if dense else bank.graph(key).to_scipy()

    def right_multiply(self, y) -> np.ndarray:
        """``y @ P̄`` as a dense array; ``y`` may be sparse or dense."""
        if sp.issparse(y):
            out = y @ self.m
            return out.toarray() if sp.issparse(out) else np.asarray(out)
        if self.dense:
            return y @ self.m
        # P̄ is symmetric: y P̄ = (P̄ yᵀ)ᵀ
        return np.ascontiguousarray((self.m @ y.T).T)


def _chunk_signals(rows: list[sp.csr_matrix], weights: np.ndarray, coeffs, order: int) -> list:
    """Order-``k`` merged signals ``sum_c w_c a_{c,k} r_c`` for ``k = 1..order``."""
    z = []
    for k in range(order):
        acc = None
        for c, r in rows:
            a = coeffs[c][k] if k < len(coeffs[c]) else 0.0
            if a == 0.0:
                continue
            term = sp.diags(a * weights[:, c]) @ r
            acc = term if acc is None else acc + term
        z.append(acc)
    return z


def _score_chunk(graph: _Graph, rows, weights, coeffs, order: int, n_items: int) -> np.ndarray:
    z = _chunk_signals(rows, weights, coeffs, order)
    y = z[-1]
    if y is None:
        y = sp.csr_matrix((weights.shape[0], n_items))
    for zk in reversed(z[:-1]):
        y = graph.right_multiply(y)
        if zk is not None:
            y = y + zk.toarray()
    return graph.right_multiply(y)


def score_all(bank: ItemGraphBank, filters, train: RatingTensor, prefs: PreferenceMatrix,
              *, threads: int = 1, users=None, chunk_size: int = CHUNK,
              dense: bool | None = None) -> np.ndarray:
    """Aggregated scores ``(1/(C+1)) sum_c Ĉ[u,c] r_{u,c} f_c(P̄)`` for all users.

    ``users`` optionally restricts (and orders) the rows that are scored.
    """
    cfg: FilterConfig = resolve_filters(filters, train.n_criteria)
    check_exponents(cfg, bank.s_f_values)
    if bank.n_items != train.n_items:
        raise DimensionError(f"graph has {bank.n_items} items, ratings have {train.n_items}")
    if prefs.values.shape != (train.n_users, train.n_criteria):
        raise DimensionError("preference matrix does not match the rating tensor")
    users = np.arange(train.n_users) if users is None else np.asarray(users, dtype=np.int64)
    n_crit = train.n_criteria
    weights_all = prefs.values[users] / n_crit
    mats = [m.to_scipy()[users] for m in train.matrices]
    coeffs = [ch.coeffs for ch in cfg.per_criterion]
    use_dense = _use_dense(bank) if dense is None else dense

    out = np.zeros((len(users), bank.n_items))
    bounds = [(lo, min(lo + chunk_size, len(users))) for lo in range(0, len(users), chunk_size)]
    threads = max(1, int(threads))
    with threadpool_limits(limits=1, user_api="blas"):
        for key in families_used(cfg):
            members = [c for c, ch in enumerate(cfg.per_criterion) if ch.graph == key]
            order = max(len(coeffs[c]) for c in members)
            graph = _Graph(bank, key, use_dense)

            def work(b, graph=graph, members=members, order=order):
                lo, hi = b
                rows = [(c, mats[c][lo:hi]) for c in members]
                return _score_chunk(graph, rows, weights_all[lo:hi], coeffs, order, bank.n_items)

            if threads == 1:
                results = map(work, bounds)
            else:
                pool = ThreadPoolExecutor(max_workers=threads)
                results = pool.map(work, bounds)
            for (lo, hi), block in zip(bounds, results):
                out[lo:hi] += block
            if threads != 1:
                pool.shutdown()
            del graph
    return out
