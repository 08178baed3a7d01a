"""Multi-criteria user expansion and the normalized item-item graph bank."""

from __future__ import annotations

import struct
import zlib
from collections.abc import Mapping
from pathlib import Path
from typing import Iterable

import numpy as np

from mcgf.ingest.tensor import RatingTensor
from mcgf.sparse import (ParameterError, SparseMatrix, bidegree_normalize, gram,
                         hadamard_power, vconcat)

FAMILIES = ("L", "I", "O")
RAW = "raw"
DEFAULT_NNZ_CAP = 200_000_000
MAGIC = b"MCGF1"


class _Adjusted(Mapping):
    """Lazily computed, cached Hadamard powers of ``p_tilde`` per family."""

    def __init__(self, bank: "ItemGraphBank"):
        self._bank = bank
        self._cache: dict[str, SparseMatrix] = {}

    def __getitem__(self, family: str) -> SparseMatrix:
        if family not in self._bank.s_f_values:
            raise KeyError(family)
        if family not in self._cache:
            self._cache[family] = hadamard_power(self._bank.p_tilde, self._bank.s_f_values[family])
        return self._cache[family]

    def __iter__(self):
        return iter(self._bank.s_f_values)

    def __len__(self):
        return len(self._bank.s_f_values)


class ItemGraphBank:
    """Normalized item-item graph plus one adjusted copy per filter family.

    ``adjusted[f]`` is materialized on first access. :meth:`dense` builds an
    uncached dense copy instead, which is what the batch scorer uses.
    """

    def __init__(self, p_tilde: SparseMatrix, s_f_values: Mapping[str, float]):
        for f, s in s_f_values.items():
            if not s > 0:
                raise ParameterError(f"s_f for family {f} must be > 0, got {s}")
        self.p_tilde = p_tilde
        self.s_f_values = {f: float(s) for f, s in s_f_values.items()}
        self.adjusted = _Adjusted(self)

    @property
    def n_items(self) -> int:
        return self.p_tilde.n_rows

    def exponent(self, key: str) -> float:
        return 1.0 if key == RAW else self.s_f_values[key]

    def graph(self, key: str) -> SparseMatrix:
        """``p_tilde`` for ``"raw"``, else the adjusted graph of the family."""
        return self.p_tilde if key == RAW else self.adjusted[key]

    def dense(self, key: str) -> np.ndarray:
        out = self.p_tilde.to_dense()
        s = self.exponent(key)
        if s != 1.0:
            np.power(out, s, out=out)
        return out

    def with_exponents(self, s_f_values: Mapping[str, float]) -> "ItemGraphBank":
        """Same base graph, different adjustment exponents."""
        return ItemGraphBank(self.p_tilde, s_f_values)

    def __repr__(self):
        return f"ItemGraphBank(n_items={self.n_items}, nnz={self.p_tilde.nnz}, s_f={self.s_f_values})"


def build_expansion(t: RatingTensor, criteria: Iterable[int] | None = None) -> SparseMatrix:
    """Stack criterion matrices into the ``(C+1)|U| x |I|`` expansion matrix."""
    idx = range(t.n_criteria) if criteria is None else list(criteria)
    return vconcat([t.matrices[c] for c in idx])


def build_item_graph(t: RatingTensor, s_f_values: Mapping[str, float] | None = None, *,
                     criteria: Iterable[int] | None = None,
                     nnz_cap: int = DEFAULT_NNZ_CAP) -> ItemGraphBank:
    """Normalized item-item similarity ``R̃ᵀR̃`` of the expansion matrix.

    ``criteria`` restricts which rating matrices enter the expansion (the
    overall-only ablation passes ``[0]``).
    """
    if s_f_values is None:
        s_f_values = {f: 1.0 for f in FAMILIES}
    r_mc = build_expansion(t, criteria)
    if r_mc.nnz == 0:
        raise ParameterError("cannot build an item graph from an empty tensor")
    p = gram(bidegree_normalize(r_mc), nnz_cap=nnz_cap)
    return ItemGraphBank(p, s_f_values)


# -- binary cache ----------------------------------------------------------
#
# little endian:
#   "MCGF1" | u32 n_items | u32 n_graphs
#   per graph: u8 label_len | label | f64 exponent | u64 nnz
#              | u64[n_items+1] row_offsets | u32[nnz] col_indices | f64[nnz] values
#   u32 crc32 of everything above

def _graph_bytes(label: str, s: float, m: SparseMatrix) -> bytes:
    lab = label.encode("ascii")
    head = struct.pack("<B", len(lab)) + lab + struct.pack("<dQ", s, m.nnz)
    return b"".join([
        head,
        np.asarray(m.row_offsets, dtype="<u8").tobytes(),
        np.asarray(m.col_indices, dtype="<u4").tobytes(),
        np.asarray(m.values, dtype="<f8").tobytes(),
    ])


def save_bank(bank: ItemGraphBank, path) -> None:
    parts = [(RAW, 1.0, bank.p_tilde)]
    parts += [(f, bank.s_f_values[f], bank.adjusted[f]) for f in bank.s_f_values]
    crc = 0
    with open(path, "wb") as fh:
        for chunk in [MAGIC + struct.pack("<II", bank.n_items, len(parts))] + \
                     [_graph_bytes(*p) for p in parts]:
            fh.write(chunk)
            crc = zlib.crc32(chunk, crc)
        fh.write(struct.pack("<I", crc))


class CacheError(ValueError):
    pass


def load_bank(path) -> ItemGraphBank:
    """Read a bank written by :func:`save_bank`; verifies magic and checksum."""
    data = Path(path).read_bytes()
    if len(data) < 17 or data[:5] != MAGIC:
        raise CacheError("not an item graph cache")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CacheError("checksum mismatch")
    n, n_graphs = struct.unpack_from("<II", body, 5)
    pos = 13
    graphs = []
    for _ in range(n_graphs):
        (ln,) = struct.unpack_from("<B", body, pos)
        label = body[pos + 1:pos + 1 + ln].decode("ascii")
        pos += 1 + ln
        s, nnz = struct.unpack_from("<dQ", body, pos)
        pos += 16
        ro = np.frombuffer(body, dtype="<u8", count=n + 1, offset=pos).astype(np.int64)
        pos += 8 * (n + 1)
        ci = np.frombuffer(body, dtype="<u4", count=nnz, offset=pos).astype(np.int32)
        pos += 4 * nnz
        v = np.frombuffer(body, dtype="<f8", count=nnz, offset=pos).astype(np.float64)
        pos += 8 * nnz
        graphs.append((label, s, SparseMatrix(n, n, ro, ci, v)))
    if pos != len(body):
        raise CacheError("trailing bytes in cache")
    if not graphs or graphs[0][0] != RAW:
        raise CacheError("cache lacks the base graph")
    bank = ItemGraphBank(graphs[0][2], {lab: s for lab, s, _ in graphs[1:]})
    for lab, _, m in graphs[1:]:
        bank.adjusted._cache[lab] = m
    return bank
