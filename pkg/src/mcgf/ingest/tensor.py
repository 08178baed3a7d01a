from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mcgf.sparse import SparseMatrix


class TensorError(ValueError):
    pass


def default_names(n_criteria: int) -> list[str]:
    return [f"rating_{c}" for c in range(n_criteria)]


@dataclass(frozen=True, eq=False)
class RatingTensor:
    """``C+1`` user x item rating matrices over one shared index space.

    Matrix 0 holds the overall rating. ``user_ids``/``item_ids`` map dense
    indices back to the identifiers found in the source file.
    """

    matrices: tuple[SparseMatrix, ...]
    criterion_names: tuple[str, ...] = ()
    user_ids: np.ndarray = field(default=None, repr=False)
    item_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        mats = tuple(self.matrices)
        if not mats:
            raise TensorError("at least the overall matrix is required")
        shape = mats[0].shape
        for m in mats:
            if m.shape != shape:
                raise TensorError(f"criterion matrices disagree in shape: {m.shape} vs {shape}")
        object.__setattr__(self, "matrices", mats)
        names = tuple(self.criterion_names) or tuple(default_names(len(mats)))
        if len(names) != len(mats):
            raise TensorError("one name per criterion matrix is required")
        object.__setattr__(self, "criterion_names", names)
        uid = np.arange(shape[0]) if self.user_ids is None else np.asarray(self.user_ids)
        iid = np.arange(shape[1]) if self.item_ids is None else np.asarray(self.item_ids)
        if uid.shape != (shape[0],) or iid.shape != (shape[1],):
            raise TensorError("id tables must match the matrix dimensions")
        object.__setattr__(self, "user_ids", uid)
        object.__setattr__(self, "item_ids", iid)

    @property
    def n_users(self) -> int:
        return self.matrices[0].n_rows

    @property
    def n_items(self) -> int:
        return self.matrices[0].n_cols

    @property
    def n_criteria(self) -> int:
        """Number of matrices, ``C + 1``."""
        return len(self.matrices)

    @property
    def overall(self) -> SparseMatrix:
        return self.matrices[0]

    @property
    def n_mc_ratings(self) -> int:
        return sum(m.nnz for m in self.matrices)

    def validate(self) -> None:
        """Check the overall-dominance invariant and non-emptiness."""
        if self.overall.nnz == 0:
            raise TensorError("overall rating matrix is empty")
        keys0 = pair_keys(self.overall, self.n_items)
        for c, m in enumerate(self.matrices[1:], start=1):
            k = pair_keys(m, self.n_items)
            if not np.all(np.isin(k, keys0, assume_unique=True)):
                raise TensorError(f"criterion {c} has ratings without an overall rating")

    def interactions(self) -> tuple[np.ndarray, np.ndarray]:
        """(user, item) index arrays of the overall matrix, row-major."""
        m = self.overall
        users = np.repeat(np.arange(m.n_rows), np.diff(m.row_offsets))
        return users, m.col_indices.astype(np.int64)

    def select(self, users: np.ndarray, items: np.ndarray) -> "RatingTensor":
        """Keep only the given (user, item) pairs, in every criterion."""
        keep = np.sort(np.asarray(users, dtype=np.int64) * self.n_items + np.asarray(items, dtype=np.int64))
        mats = []
        for m in self.matrices:
            k = pair_keys(m, self.n_items)
            pos = np.searchsorted(keep, k)
            hit = (pos < len(keep)) & (keep[np.minimum(pos, len(keep) - 1)] == k) if len(keep) else np.zeros(len(k), bool)
            rows = k[hit] // self.n_items
            cols = k[hit] % self.n_items
            mats.append(SparseMatrix.from_coo(rows, cols, m.values[hit], m.shape))
        return self.with_matrices(mats)

    def with_matrices(self, mats) -> "RatingTensor":
        return RatingTensor(tuple(mats), self.criterion_names, self.user_ids, self.item_ids)

    def merge(self, other: "RatingTensor") -> "RatingTensor":
        """Union of two disjoint folds over the same index space."""
        if other.n_criteria != self.n_criteria or other.overall.shape != self.overall.shape:
            raise TensorError("folds do not share an index space")
        mats = [SparseMatrix.from_scipy(a.to_scipy() + b.to_scipy(), check=True)
                for a, b in zip(self.matrices, other.matrices)]
        return self.with_matrices(mats)

    def equals(self, other: "RatingTensor") -> bool:
        return (self.n_criteria == other.n_criteria
                and all(a == b for a, b in zip(self.matrices, other.matrices))
                and self.criterion_names == other.criterion_names
                and np.array_equal(self.user_ids, other.user_ids)
                and np.array_equal(self.item_ids, other.item_ids))


def pair_keys(m: SparseMatrix, n_items: int) -> np.ndarray:
    """Sorted ``user * n_items + item`` keys of the stored entries."""
    rows = np.repeat(np.arange(m.n_rows, dtype=np.int64), np.diff(m.row_offsets))
    return rows * n_items + m.col_indices.astype(np.int64)
