"""Dense spectral reference for the polynomial filters (test scale only).

Filters are applied through the eigendecomposition of ``L = I - P̄``:
``U diag(h(λ)) Uᵀ x``. Nothing here is used by the production scorer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mcgf.filtering import FilterChoice, frequency_response
from mcgf.sparse import SparseMatrix

MAX_DIM = 512


class OracleTooLarge(ValueError):
    pass


def laplacian(graph) -> np.ndarray:
    """Dense ``I - P̄``."""
    P = graph.to_dense() if isinstance(graph, SparseMatrix) else np.asarray(graph, dtype=np.float64)
    return np.eye(P.shape[0]) - P


@dataclass(frozen=True)
class SpectralOracle:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dim: int

    @classmethod
    def from_graph(cls, graph) -> "SpectralOracle":
        L = laplacian(graph)
        n = L.shape[0]
        if n > MAX_DIM:
            raise OracleTooLarge(f"dense oracle refused for dimension {n} > {MAX_DIM}")
        lam, U = np.linalg.eigh(L)
        return cls(lam, U, n)

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


def spectral_apply(oracle: SpectralOracle, choice: FilterChoice, signal) -> np.ndarray:
    U = oracle.eigenvectors
    h = frequency_response(choice, oracle.eigenvalues)
    return U @ (h * (U.T @ np.asarray(signal, dtype=np.float64)))


def smoothness(L_graph, x) -> float:
    """Graph quadratic form ``xᵀ L x``."""
    L = L_graph.to_dense() if isinstance(L_graph, SparseMatrix) else np.asarray(L_graph)
    x = np.asarray(x, dtype=np.float64)
    return float(x @ (L @ x))


def low_pass_ratio(choice: FilterChoice, eigenvalues, k: int) -> float:
    """``max |h(λ_j)|, j > k`` over ``min |h(λ_j)|, j <= k`` on sorted eigenvalues.

    The filter is k-low-pass when the ratio lies in [0, 1]. Returns ``inf``
    when the denominator vanishes.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    if not 1 <= k < len(lam):
        raise ValueError(f"cut index {k} outside 1..{len(lam) - 1}")
    h = np.abs(frequency_response(choice, lam))
    den = h[:k].min()
    if den == 0:
        return float("inf")
    return float(h[k:].max() / den)
