from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from mcgf.ingest.tensor import RatingTensor

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    valid_fraction_of_train: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "valid_fraction_of_train"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def fold_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    """(train, valid, test) counts for a user with ``n`` interactions.

    Test gets ``max(1, round((1 - train_fraction) * n))`` (half-up), valid
    gets ``floor(valid_fraction * n_train)`` carved out of the train share.
    Users with fewer than two interactions stay wholly in train.
    """
    if n < 2:
        return n, 0, 0
    n_test = max(1, _half_up((1.0 - spec.train_fraction) * n))
    n_test = min(n_test, n - 1)
    n_train = n - n_test
    n_valid = int(math.floor(spec.valid_fraction_of_train * n_train + 1e-9))
    return n_train - n_valid, n_valid, n_test


def split(t: RatingTensor, spec: SplitSpec) -> tuple[RatingTensor, RatingTensor, RatingTensor]:
    """Per-user random train/valid/test partition of the overall interactions.

    Every criterion rating follows its (user, item) pair into the same fold.
    """
    rng = np.random.default_rng(spec.seed)
    users, items = t.interactions()
    offsets = t.overall.row_offsets
    folds = {"train": [], "valid": [], "test": []}
    n_short = 0
    for u in range(t.n_users):
        lo, hi = int(offsets[u]), int(offsets[u + 1])
        n = hi - lo
        if n == 0:
            continue
        if n < 2:
            n_short += 1
        n_tr, n_va, n_te = fold_sizes(n, spec)
        perm = lo + rng.permutation(n)
        folds["test"].append(perm[:n_te])
        folds["valid"].append(perm[n_te:n_te + n_va])
        folds["train"].append(perm[n_te + n_va:])
    if n_short:
        log.warning("%d users with fewer than 2 interactions kept wholly in train", n_short)

    out = []
    for name in ("train", "valid", "test"):
        idx = np.concatenate(folds[name]) if folds[name] else np.zeros(0, dtype=np.int64)
        out.append(t.select(users[idx], items[idx]))
    return tuple(out)
