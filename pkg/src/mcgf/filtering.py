"""Polynomial low-pass filters on the adjusted item-item graph.

A filter is ``sum_k a_k P̄^k`` for ``k = 1..K``. It acts on a user's rating
row ``r`` as ``r · f(P̄)`` and is always evaluated with repeated sparse
matrix-vector products; ``P̄^k`` is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from mcgf.graph import FAMILIES, RAW, ItemGraphBank
from mcgf.sparse import DimensionError, ParameterError, spmv

#: polynomial coefficients (order 1 first) of the named filters
NAMED_COEFFS = {
    "L": (1.0,),         # P̄
    "I": (0.0, 1.0),     # P̄²
    "O": (2.0, -1.0),    # 2P̄ - P̄²
}
MAX_ORDER = 8


@dataclass(frozen=True)
class FilterChoice:
    """Either a named filter (``L``/``I``/``O``) or explicit coefficients.

    Named filters run on the graph adjusted for their own family. Explicit
    coefficients run on ``graph``, which defaults to the unadjusted one.
    """

    coeffs: tuple[float, ...]
    name: str | None = None
    graph: str = RAW

    def __post_init__(self):
        if not 1 <= len(self.coeffs) <= MAX_ORDER:
            raise ParameterError(f"filter order must be within 1..{MAX_ORDER}, got {len(self.coeffs)}")
        if self.graph != RAW and self.graph not in FAMILIES:
            raise ParameterError(f"unknown graph family {self.graph!r}")

    @classmethod
    def named(cls, name: str) -> "FilterChoice":
        if name not in NAMED_COEFFS:
            raise ParameterError(f"unknown filter family {name!r}; expected one of L, I, O")
        return cls(NAMED_COEFFS[name], name, name)

    @classmethod
    def explicit(cls, coeffs: Sequence[float], graph: str = RAW) -> "FilterChoice":
        return cls(tuple(float(a) for a in coeffs), None, graph)

    @classmethod
    def parse(cls, obj) -> "FilterChoice":
        """From ``"L"``, ``{"filter": "O"}`` or ``{"coeffs": [...], "graph": "L"}``."""
        if isinstance(obj, str):
            return cls.named(obj)
        if isinstance(obj, FilterChoice):
            return obj
        if "filter" in obj:
            return cls.named(obj["filter"])
        if "coeffs" in obj:
            return cls.explicit(obj["coeffs"], obj.get("graph", RAW))
        raise ParameterError(f"cannot read a filter from {obj!r}")

    def to_dict(self) -> dict:
        if self.name is not None:
            return {"filter": self.name}
        return {"coeffs": list(self.coeffs), "graph": self.graph}

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def label(self) -> str:
        if self.name is not None:
            return self.name
        return "poly(" + ",".join(f"{a:g}" for a in self.coeffs) + ")@" + self.graph


@dataclass(frozen=True)
class FilterConfig:
    per_criterion: tuple[FilterChoice, ...]

    @classmethod
    def from_letters(cls, letters: str | Sequence[str]) -> "FilterConfig":
        return cls(tuple(FilterChoice.named(x) for x in letters))

    @classmethod
    def uniform(cls, name: str, n_criteria: int) -> "FilterConfig":
        return cls.from_letters([name] * n_criteria)

    @classmethod
    def parse(cls, entries) -> "FilterConfig":
        if isinstance(entries, str):
            return cls.from_letters(entries)
        return cls(tuple(FilterChoice.parse(e) for e in entries))

    def __len__(self):
        return len(self.per_criterion)

    def __getitem__(self, c) -> FilterChoice:
        return self.per_criterion[c]

    @property
    def label(self) -> str:
        return "".join(c.label if c.name else f"[{c.label}]" for c in self.per_criterion)

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.per_criterion]


def apply_filter(bank: ItemGraphBank, choice: FilterChoice, signal) -> np.ndarray:
    """``signal · sum_k a_k P̄^k`` by Horner's rule over sparse mat-vecs."""
    x = np.asarray(signal, dtype=np.float64)
    if x.shape != (bank.n_items,):
        raise DimensionError(f"signal of shape {x.shape} for {bank.n_items} items")
    try:
        P = bank.graph(choice.graph)
    except KeyError:
        raise ParameterError(f"bank has no graph for family {choice.graph!r}") from None
    a = choice.coeffs
    # P̄ is symmetric, so x·P̄ == P̄·x
    y = a[-1] * x
    for ak in reversed(a[:-1]):
        y = spmv(P, y)
        if ak:
            y = y + ak * x
    return spmv(P, y)


def score_user_criterion(bank: ItemGraphBank, choice: FilterChoice, r_uc) -> np.ndarray:
    """Filtered scores for one user's raw rating row under one criterion."""
    return apply_filter(bank, choice, r_uc)


def frequency_response(choice: FilterChoice, lam):
    """``h(λ) = sum_k a_k (1 - λ)^k`` at Laplacian eigenvalue(s) ``lam``."""
    lam = np.asarray(lam, dtype=np.float64)
    mu = 1.0 - lam
    out = np.zeros_like(mu)
    for ak in reversed(choice.coeffs):
        out = (out + ak) * mu
    return out if out.ndim else float(out)


def resolve_filters(filters, n_criteria: int) -> FilterConfig:
    cfg = filters if isinstance(filters, FilterConfig) else FilterConfig.parse(filters)
    if len(cfg) != n_criteria:
        raise ParameterError(f"{len(cfg)} filters given for {n_criteria} criteria")
    return cfg


def families_used(cfg: FilterConfig) -> list[str]:
    seen = []
    for c in cfg.per_criterion:
        if c.graph not in seen:
            seen.append(c.graph)
    return seen


def check_exponents(cfg: FilterConfig, s_f: Mapping[str, float]) -> None:
    missing = [g for g in families_used(cfg) if g != RAW and g not in s_f]
    if missing:
        raise ParameterError(f"no adjustment exponent for families {missing}")
