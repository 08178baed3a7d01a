"""CSV readers and writers for multi-criteria ratings.

Two layouts are understood:

* wide: ``user_id,item_id,rating_0,...,rating_C``, one row per interaction,
  a zero cell meaning "not rated under this criterion";
* long: ``user_id,item_id,criterion,rating``, one row per rating.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from mcgf.ingest.tensor import RatingTensor, default_names, pair_keys
from mcgf.sparse import SparseMatrix

log = logging.getLogger(__name__)

WIDE = "wide"
LONG = "long"


class ParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def _int(tok, path, line, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(path, line, f"{what} is not an integer: {tok!r}") from None


def _rating(tok, path, line):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(path, line, f"rating is not a number: {tok!r}") from None
    if not np.isfinite(v) or v < 0:
        raise ParseError(path, line, f"rating must be finite and non-negative: {tok!r}")
    return v


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].startswith("#"):
                continue
            yield lineno, [t.strip() for t in row]


def load_ratings(path, format: str = WIDE) -> RatingTensor:
    """Read a rating file into a :class:`RatingTensor`.

    Interactions lacking an overall rating are dropped from every
    criterion. Duplicate (user, item, criterion) triples keep the last value.
    """
    path = Path(path)
    rows = _read_rows(path)
    try:
        hline, header = next(rows)
    except StopIteration:
        raise ParseError(path, 1, "empty file") from None
    if header[:2] != ["user_id", "item_id"]:
        raise ParseError(path, hline, "header must start with user_id,item_id")

    us, its, cs, rs = [], [], [], []
    if format == WIDE:
        names = header[2:]
        if not names:
            raise ParseError(path, hline, "no rating columns")
        width = len(header)
        for lineno, row in rows:
            if len(row) != width:
                raise ParseError(path, lineno, f"expected {width} fields, got {len(row)}")
            u = _int(row[0], path, lineno, "user_id")
            i = _int(row[1], path, lineno, "item_id")
            for c, tok in enumerate(row[2:]):
                v = _rating(tok, path, lineno)
                if v > 0:
                    us.append(u); its.append(i); cs.append(c); rs.append(v)
        n_crit = len(names)
    elif format == LONG:
        if header != ["user_id", "item_id", "criterion", "rating"]:
            raise ParseError(path, hline, "long header must be user_id,item_id,criterion,rating")
        for lineno, row in rows:
            if len(row) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(row)}")
            u = _int(row[0], path, lineno, "user_id")
            i = _int(row[1], path, lineno, "item_id")
            c = _int(row[2], path, lineno, "criterion")
            if c < 0:
                raise ParseError(path, lineno, "criterion index must be >= 0")
            v = _rating(row[3], path, lineno)
            if v > 0:
                us.append(u); its.append(i); cs.append(c); rs.append(v)
        n_crit = max(cs) + 1 if cs else 1
        names = default_names(n_crit)
    else:
        raise ValueError(f"unknown format {format!r}")

    return _assemble(np.array(us, dtype=np.int64), np.array(its, dtype=np.int64),
                     np.array(cs, dtype=np.int64), np.array(rs, dtype=np.float64),
                     n_crit, names)


def _assemble(u, i, c, r, n_crit, names) -> RatingTensor:
    # keep the last occurrence of each (criterion, user, item)
    if len(u):
        order = np.arange(len(u))[::-1]
        key = np.stack([c[order], u[order], i[order]], axis=1)
        _, first = np.unique(key, axis=0, return_index=True)
        n_dup = len(u) - len(first)
        if n_dup:
            log.warning("%d duplicate ratings overwritten (last one wins)", n_dup)
        keep = np.sort(order[first])
        u, i, c, r = u[keep], i[keep], c[keep], r[keep]

    # interactions without an overall rating are dropped
    if len(u):
        _, ui0 = np.unique(u, return_inverse=True)
        _, ii0 = np.unique(i, return_inverse=True)
        keys = ui0.astype(np.int64) * (int(ii0.max()) + 1) + ii0
        has_overall = np.isin(keys, keys[c == 0])
    else:
        has_overall = np.zeros(0, dtype=bool)
    n_orphan = int(np.count_nonzero(~has_overall))
    if n_orphan:
        log.warning("%d criterion ratings without an overall rating dropped", n_orphan)
    u, i, c, r = u[has_overall], i[has_overall], c[has_overall], r[has_overall]

    user_ids = np.unique(u)
    item_ids = np.unique(i)
    ui = np.searchsorted(user_ids, u)
    ii = np.searchsorted(item_ids, i)
    shape = (len(user_ids), len(item_ids))
    mats = [SparseMatrix.from_coo(ui[c == k], ii[c == k], r[c == k], shape) for k in range(n_crit)]
    t = RatingTensor(tuple(mats), tuple(names), user_ids, item_ids)
    t.validate()
    return t


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_ratings(t: RatingTensor, format: str = WIDE, header_comment: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header_comment:
        buf.write(f"# {header_comment}\n")
    table = rating_table(t)
    users, items = t.interactions()
    uid, iid = t.user_ids[users], t.item_ids[items]
    if format == WIDE:
        w.writerow(["user_id", "item_id", *t.criterion_names])
        for k in range(len(users)):
            w.writerow([uid[k], iid[k], *[_fmt(v) if v else "0" for v in table[k]]])
    elif format == LONG:
        w.writerow(["user_id", "item_id", "criterion", "rating"])
        for k in range(len(users)):
            for c, v in enumerate(table[k]):
                if v:
                    w.writerow([uid[k], iid[k], c, _fmt(v)])
    else:
        raise ValueError(f"unknown format {format!r}")
    return buf.getvalue()


def rating_table(t: RatingTensor) -> np.ndarray:
    """Dense (interaction x criterion) table aligned with ``t.interactions()``."""
    keys0 = pair_keys(t.overall, t.n_items)
    out = np.zeros((len(keys0), t.n_criteria))
    for c, m in enumerate(t.matrices):
        out[np.searchsorted(keys0, pair_keys(m, t.n_items)), c] = m.values
    return out


def save_ratings(t: RatingTensor, path, format: str = WIDE, header_comment: str | None = None) -> None:
    Path(path).write_text(dumps_ratings(t, format, header_comment), encoding="utf-8")


def dumps_id_map(t: RatingTensor) -> str:
    lines = ["kind,index,original_id"]
    lines += [f"user,{k},{v}" for k, v in enumerate(t.user_ids.tolist())]
    lines += [f"item,{k},{v}" for k, v in enumerate(t.item_ids.tolist())]
    return "\n".join(lines) + "\n"


def dumps_split_manifest(train: RatingTensor, valid: RatingTensor, test: RatingTensor,
                         header_comment: str | None = None) -> str:
    """``user_id,item_id,fold`` rows ordered by user then item index."""
    recs = []
    for name, fold in (("train", train), ("valid", valid), ("test", test)):
        u, i = fold.interactions()
        recs.append((u, i, np.full(len(u), name, dtype=object)))
    u = np.concatenate([r[0] for r in recs])
    i = np.concatenate([r[1] for r in recs])
    f = np.concatenate([r[2] for r in recs])
    order = np.lexsort((i, u))
    out = [f"# {header_comment}"] if header_comment else []
    out.append("user_id,item_id,fold")
    uid, iid = train.user_ids, train.item_ids
    out += [f"{uid[a]},{iid[b]},{c}" for a, b, c in zip(u[order], i[order], f[order])]
    return "\n".join(out) + "\n"
