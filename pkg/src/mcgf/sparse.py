"""Immutable CSR matrices of non-negative reals and the kernels built on them.

The products are delegated to ``scipy.sparse`` (single-threaded, fixed
reduction order), so every result is reproducible bit for bit.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

#: entries below this magnitude are dropped from sparse products
PRUNE_TOL = 1e-15


class DimensionError(ValueError):
    """Operands do not conform."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class SparseMatrix:
    """Compressed sparse row matrix with strictly positive stored values.

    Rows have strictly increasing column indices and explicit zeros are
    never stored. Instances are read-only and may be shared across threads.
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "values", "_csr")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values, *, check=True):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = _frozen(np.asarray(row_offsets))
        self.col_indices = _frozen(np.asarray(col_indices))
        self.values = _frozen(np.asarray(values, dtype=np.float64))
        self._csr = None
        if check:
            self.validate()

    # -- construction -------------------------------------------------

    @classmethod
    def from_scipy(cls, m, *, check=False) -> "SparseMatrix":
        csr = sp.csr_matrix(m)
        if not csr.has_canonical_format:
            csr.sum_duplicates()
        if csr.nnz and csr.data.min() <= 0.0:
            csr.eliminate_zeros()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data, check=check)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionError(f"expected a 2-d array, got shape {a.shape}")
        if (a < 0).any():
            raise ParameterError("negative entries are not representable")
        return cls.from_scipy(sp.csr_matrix(a), check=True)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        """Build from triplets; duplicate coordinates are summed."""
        m = sp.coo_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)), shape=shape)
        return cls.from_scipy(m.tocsr(), check=True)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, format="csr", dtype=np.float64))

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> "SparseMatrix":
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int32),
                   np.zeros(0, dtype=np.int32), np.zeros(0))

    def validate(self) -> None:
        ro, ci, v = self.row_offsets, self.col_indices, self.values
        if ro.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if ro[0] != 0 or ro[-1] != len(v) or len(ci) != len(v):
            raise ValueError("row_offsets inconsistent with stored entries")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if len(v):
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise ValueError("column index out of range")
            if not np.all(v > 0) or not np.all(np.isfinite(v)):
                raise ValueError("stored values must be finite and > 0")
            # strictly increasing within each row
            steps = np.diff(ci.astype(np.int64))
            row_starts = np.zeros(len(ci), dtype=bool)
            row_starts[ro[1:-1][ro[1:-1] < len(ci)]] = True
            if np.any((steps <= 0) & ~row_starts[1:]):
                raise ValueError("column indices must be strictly increasing within a row")

    # -- views ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        """Zero-copy ``csr_matrix`` view (do not mutate it)."""
        if self._csr is None:
            m = sp.csr_matrix((self.values, self.col_indices, self.row_offsets),
                              shape=self.shape, copy=False)
            m.has_sorted_indices = True
            m.has_canonical_format = True
            self._csr = m
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.to_scipy().T.tocsr())

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.to_scipy().sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.col_indices, weights=self.values, minlength=self.n_cols)

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return self.same_pattern(other) and np.array_equal(self.values, other.values)

    __hash__ = None

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def vconcat(blocks: Sequence[SparseMatrix]) -> SparseMatrix:
    """Stack blocks vertically; block ``b`` row ``r`` lands at ``offset_b + r``."""
    if not blocks:
        raise DimensionError("nothing to concatenate")
    n_cols = blocks[0].n_cols
    for b in blocks:
        if b.n_cols != n_cols:
            raise DimensionError(f"column mismatch: {b.n_cols} != {n_cols}")
    m = sp.vstack([b.to_scipy() for b in blocks], format="csr")
    return SparseMatrix.from_scipy(m)


def _inv_sqrt(d: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d, dtype=np.float64)
    pos = d > 0
    out[pos] = 1.0 / np.sqrt(d[pos])
    return out


def bidegree_normalize(R: SparseMatrix) -> SparseMatrix:
    """``D_U^{-1/2} R D_I^{-1/2}`` from raw row and column sums.

    Empty rows and columns contribute no entries; their count is logged.
    """
    rs, cs = R.row_sums(), R.col_sums()
    n_empty_rows = int(np.count_nonzero(rs == 0))
    n_empty_cols = int(np.count_nonzero(cs == 0))
    if n_empty_rows or n_empty_cols:
        log.info("bidegree_normalize: %d empty rows, %d empty columns skipped",
                 n_empty_rows, n_empty_cols)
    counts = np.diff(R.row_offsets)
    row_scale = np.repeat(_inv_sqrt(rs), counts)
    vals = R.values * row_scale * _inv_sqrt(cs)[R.col_indices]
    return SparseMatrix(R.n_rows, R.n_cols, R.row_offsets, R.col_indices, vals, check=False)


def _prune(m: sp.csr_matrix) -> sp.csr_matrix:
    small = np.abs(m.data) < PRUNE_TOL
    if small.any():
        m.data[small] = 0.0
        m.eliminate_zeros()
    return m


def _mirror_upper(m: sp.csr_matrix) -> sp.csr_matrix:
    """Overwrite the strict lower triangle with the transposed upper one.

    Requires a structurally symmetric pattern, which holds for any Gram
    matrix of a non-negative matrix.
    """
    t = m.T.tocsr()
    t.sort_indices()
    if not (np.array_equal(t.indptr, m.indptr) and np.array_equal(t.indices, m.indices)):
        raise ValueError("pattern is not structurally symmetric")
    rows = np.repeat(np.arange(m.shape[0], dtype=m.indices.dtype), np.diff(m.indptr))
    lower = rows > m.indices
    del rows
    m.data[lower] = t.data[lower]
    return m


def gram(Rt: SparseMatrix, *, nnz_cap: int | None = None) -> SparseMatrix:
    """``Rtᵀ Rt``, symmetric bit for bit.

    ``nnz_cap`` bounds the number of stored entries of the result; the
    structural count is computed first so the cap trips before the values
    are allocated.
    """
    a = Rt.to_scipy()
    at = a.T.tocsr()
    at.sort_indices()
    row_nnz = np.diff(a.indptr).astype(np.float64)
    bound = min(float(a.shape[1]) ** 2, float(np.dot(row_nnz, row_nnz)))
    if nnz_cap is not None and bound > nnz_cap:
        # structural nnz of the product, without values
        pat_a = sp.csr_matrix((np.ones(at.nnz, dtype=np.int8), at.indices, at.indptr), shape=at.shape)
        pat_b = sp.csr_matrix((np.ones(a.nnz, dtype=np.int8), a.indices, a.indptr), shape=a.shape)
        est = _structural_nnz(pat_a, pat_b)
        if est > nnz_cap:
            raise MemoryError(
                f"item-item graph would hold {est} entries, above the cap of {nnz_cap}")
    g = (at @ a).tocsr()
    g.sort_indices()
    g = _prune(g)
    g = _mirror_upper(g)
    return SparseMatrix.from_scipy(g)


def _structural_nnz(a: sp.csr_matrix, b: sp.csr_matrix, block: int = 4096) -> int:
    """Count entries of ``a @ b`` block-wise using boolean products."""
    total = 0
    ab = b.astype(bool)
    for lo in range(0, a.shape[0], block):
        blk = a[lo:lo + block].astype(bool) @ ab
        total += blk.nnz
    return total


def hadamard_power(P: SparseMatrix, s: float) -> SparseMatrix:
    """Raise every stored value to ``s``; the pattern is unchanged."""
    if not s > 0:
        raise ParameterError(f"exponent must be > 0, got {s}")
    if s == 1:
        return P
    vals = np.power(P.values, s)
    if vals.size and vals.min() <= 0.0:
        # underflow would create explicit zeros
        raise ParameterError(f"exponent {s} underflows stored values to zero")
    return SparseMatrix(P.n_rows, P.n_cols, P.row_offsets, P.col_indices, vals, check=False)


def spmv(P: SparseMatrix, x) -> np.ndarray:
    """Dense ``P @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != P.n_cols:
        raise DimensionError(f"vector of length {x.shape[0]} against {P.n_cols} columns")
    return P.to_scipy() @ x


def spmm(A: SparseMatrix, B: SparseMatrix) -> SparseMatrix:
    """Sparse ``A @ B`` with numerically-zero entries dropped."""
    if A.n_cols != B.n_rows:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    m = (A.to_scipy() @ B.to_scipy()).tocsr()
    m.sort_indices()
    return SparseMatrix.from_scipy(_prune(m))
