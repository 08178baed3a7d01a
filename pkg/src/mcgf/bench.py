"""Runtime benchmark over the synthetic size ladder.

Graph construction and scoring are timed separately; scoring runs on a
prebuilt graph for every user. Points whose estimated peak memory exceeds
the cap are reported as skipped instead of being run.
"""

from __future__ import annotations

import csv
import gc
import io
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from mcgf.filtering import FilterConfig
from mcgf.graph import FAMILIES, build_item_graph
from mcgf.ingest.synthetic import SyntheticSpec, generate_synthetic, ladder_specs
from mcgf.preference import build_preferences
from mcgf.scoring import score_all

log = logging.getLogger(__name__)

HEADER = ("n_users", "n_items", "n_mc_ratings", "nnz_p", "graph_build_s", "scoring_s",
          "total_s", "status")


@dataclass(frozen=True)
class BenchRow:
    spec: SyntheticSpec
    nnz_p: int
    graph_build_s: float
    scoring_s: float
    status: str = "ok"

    @property
    def total_s(self) -> float:
        return self.graph_build_s + self.scoring_s


def estimated_peak_bytes(spec: SyntheticSpec) -> float:
    """Rough peak of graph construction plus the dense scoring copy."""
    n_i, n_u = spec.n_items, spec.n_users
    deg = spec.n_interactions / max(n_i, 1)
    fill = 1.0 - math.exp(-deg * deg / max(n_u, 1))
    nnz = fill * n_i * n_i
    # product, sorted copy and mirrored copy of P at 12 bytes per entry, plus a dense graph
    return 3 * 12 * nnz + 8.0 * n_i * n_i


def run_point(spec: SyntheticSpec, filters: FilterConfig, s_f=None, threads: int = 1) -> BenchRow:
    t = generate_synthetic(spec)
    s_f = s_f or {f: 1.0 for f in FAMILIES}
    t0 = time.perf_counter()
    bank = build_item_graph(t, s_f)
    t1 = time.perf_counter()
    prefs = build_preferences(t, 1.0)
    t2 = time.perf_counter()
    score_all(bank, filters, t, prefs, threads=threads)
    t3 = time.perf_counter()
    return BenchRow(spec, bank.p_tilde.nnz, t1 - t0, t3 - t2)


def run_ladder(specs=None, *, filters=("O", "I", "I", "O", "L"), mem_cap_gb: float = 4.0,
               threads: int = 1, progress=None) -> list[BenchRow]:
    specs = ladder_specs() if specs is None else list(specs)
    out = []
    for spec in specs:
        cfg = FilterConfig.parse(list(filters)) if len(filters) == spec.n_criteria \
            else FilterConfig.uniform("L", spec.n_criteria)
        if estimated_peak_bytes(spec) > mem_cap_gb * 1e9:
            log.warning("skipping %s: estimated memory above %.1f GB", spec, mem_cap_gb)
            row = BenchRow(spec, 0, 0.0, 0.0, "skipped_memory_cap")
        else:
            row = run_point(spec, cfg, threads=threads)
            gc.collect()
        out.append(row)
        if progress:
            progress(row)
    return out


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def rows_csv(rows: list[BenchRow], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        s = r.spec
        w.writerow([s.n_users, s.n_items, s.n_mc_ratings, r.nnz_p, f"{r.graph_build_s:.6f}",
                    f"{r.scoring_s:.6f}", f"{r.total_s:.6f}", r.status])
    return buf.getvalue()
