from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from mcgf.ingest.tensor import RatingTensor
from mcgf.sparse import ParameterError, SparseMatrix

log = logging.getLogger(__name__)

#: (users, items, MC ratings) of the runtime ladder, five rating matrices each
LADDER = (
    (1_500, 3_000, 300_000),
    (2_500, 5_500, 1_000_000),
    (4_000, 6_000, 1_800_000),
    (5_000, 9_000, 3_400_000),
    (8_000, 10_000, 6_000_000),
    (10_000, 15_000, 11_000_000),
    (25_000, 20_000, 38_000_000),
)
LADDER_SPARSITY = 0.985
DENSITY_TOL = 0.01


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a synthetic multi-criteria dataset.

    ``n_criteria`` counts every rating matrix including the overall one, so
    each interaction contributes ``n_criteria`` MC ratings. ``sparsity`` is
    optional; when given, the density implied by ``n_mc_ratings`` must agree
    with it to within one percentage point.

    ``n_communities > 0`` plants block structure: users and items are
    assigned to communities, a share ``affinity`` of each user's
    interactions fall inside their community and are rated higher.
    """

    n_users: int
    n_items: int
    n_mc_ratings: int
    n_criteria: int = 5
    sparsity: float | None = None
    seed: int = 0
    n_communities: int = 0
    affinity: float = 0.8

    @property
    def n_interactions(self) -> int:
        return self.n_mc_ratings // self.n_criteria

    @property
    def density(self) -> float:
        return self.n_interactions / (self.n_users * self.n_items)

    def check(self) -> None:
        if min(self.n_users, self.n_items, self.n_criteria) < 1:
            raise ParameterError("users, items and criteria must be positive")
        if self.n_mc_ratings > self.n_users * self.n_items * self.n_criteria:
            raise ParameterError("more MC ratings requested than cells available")
        if self.n_interactions < 1:
            raise ParameterError("fewer MC ratings than criteria: no interaction fits")
        if self.sparsity is not None and abs((1.0 - self.sparsity) - self.density) > DENSITY_TOL:
            raise ParameterError(
                f"requested sparsity {self.sparsity} inconsistent with implied density {self.density:.4f}")
        if not 0 <= self.affinity <= 1:
            raise ParameterError("affinity must lie in [0, 1]")


def ladder_specs(seed: int = 0, n_criteria: int = 5) -> list[SyntheticSpec]:
    return [SyntheticSpec(u, i, m, n_criteria, LADDER_SPARSITY, seed) for u, i, m in LADDER]


def _sample_pairs(spec: SyntheticSpec, rng) -> np.ndarray:
    n_cells = spec.n_users * spec.n_items
    want = spec.n_interactions
    if spec.n_communities <= 0:
        return np.sort(rng.choice(n_cells, size=want, replace=False))

    k = spec.n_communities
    user_comm = rng.integers(k, size=spec.n_users)
    item_comm = rng.integers(k, size=spec.n_items)
    members = [np.flatnonzero(item_comm == c) for c in range(k)]
    chosen = np.zeros(0, dtype=np.int64)
    while len(chosen) < want:
        n = 2 * (want - len(chosen)) + 16
        u = rng.integers(spec.n_users, size=n)
        inside = rng.random(n) < spec.affinity
        i = rng.integers(spec.n_items, size=n)
        for c in range(k):
            sel = inside & (user_comm[u] == c)
            if len(members[c]):
                i[sel] = members[c][rng.integers(len(members[c]), size=int(sel.sum()))]
        cand = np.concatenate([chosen, u.astype(np.int64) * spec.n_items + i])
        _, first = np.unique(cand, return_index=True)
        chosen = cand[np.sort(first)][:want]
    return np.sort(chosen), user_comm, item_comm


def generate_synthetic(spec: SyntheticSpec) -> RatingTensor:
    """Sample a tensor with integer ratings 1-5 in every criterion.

    Criterion ratings are ``clip(overall + U{-1,0,1}, 1, 5)``.
    """
    spec.check()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_interactions
    if spec.n_communities > 0:
        keys, user_comm, item_comm = _sample_pairs(spec, rng)
        u, i = keys // spec.n_items, keys % spec.n_items
        inside = user_comm[u] == item_comm[i]
        mean = np.where(inside, 4.2, 2.5)
        overall = np.clip(np.rint(rng.normal(mean, 0.9)), 1, 5)
    else:
        keys = _sample_pairs(spec, rng)
        u, i = keys // spec.n_items, keys % spec.n_items
        overall = rng.integers(1, 6, size=n).astype(np.float64)

    shape = (spec.n_users, spec.n_items)
    mats = [SparseMatrix.from_coo(u, i, overall, shape)]
    for _ in range(spec.n_criteria - 1):
        r = np.clip(overall + rng.integers(-1, 2, size=n), 1, 5)
        mats.append(SparseMatrix.from_coo(u, i, r, shape))
    names = ["overall", *[f"criterion_{c}" for c in range(1, spec.n_criteria)]]
    return RatingTensor(tuple(mats), tuple(names))
