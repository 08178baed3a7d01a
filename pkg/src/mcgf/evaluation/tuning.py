"""Validation-set search over filter assignments and adjustment exponents.

Stage one scores every ``{L, I, O}`` assignment at ``s_f = 1`` and
``s_T = 1``. With unit exponents all three families share one graph, so each
criterion needs only ``r P̃`` and ``r P̃²`` per user; an assignment is then a
sum of precomputed blocks. Stage two refines ``s_f`` one family at a time
over a grid, then ``s_T``. Ties go to the configuration whose canonical key
sorts first.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from mcgf.evaluation.metrics import batch_metrics, metric_names, positives
from mcgf.evaluation.protocol import DEFAULT_KS, ModelConfig, run_ca_gf
from mcgf.filtering import FilterConfig
from mcgf.graph import FAMILIES, build_item_graph
from mcgf.ingest.tensor import RatingTensor
from mcgf.preference import build_preferences, topk_block
from mcgf.scoring import CHUNK, _Graph, _use_dense
from mcgf.sparse import ParameterError

log = logging.getLogger(__name__)

DEFAULT_SF_GRID = (0.1, 0.25, 0.5, 0.75, 1.0, 1.2, 1.5, 1.8, 2.0)
DEFAULT_ST_GRID = (1.0, 2.0, 4.0)
EXHAUSTIVE = "exhaustive"
GREEDY = "greedy"
OBJECTIVE = "recall@10"
LEADERBOARD_HEADER = ("rank", "config_hash", "recall@5", "recall@10", "ndcg@5", "ndcg@10",
                      "graph_build_s", "filter_s", "total_s")


@dataclass(frozen=True)
class TuneSpec:
    strategy: str = EXHAUSTIVE
    sf_grid: tuple[float, ...] = DEFAULT_SF_GRID
    st_grid: tuple[float, ...] = DEFAULT_ST_GRID
    refine: bool = True
    max_sweeps: int = 3
    threads: int = 1

    def __post_init__(self):
        if self.strategy not in (EXHAUSTIVE, GREEDY):
            raise ParameterError(f"unknown tuning strategy {self.strategy!r}")
        for v in (*self.sf_grid, *self.st_grid):
            if not v > 0:
                raise ParameterError("grid values must be > 0")


@dataclass(frozen=True)
class Trial:
    config: ModelConfig
    metrics: dict[str, float]
    timings: dict[str, float]

    @property
    def sort_key(self):
        return (-self.metrics.get(OBJECTIVE, 0.0), self.config.key())


@dataclass
class TuneResult:
    best: ModelConfig
    trials: list[Trial] = field(default_factory=list)

    def leaderboard(self) -> list[Trial]:
        """Distinct configurations, best first."""
        seen, out = set(), []
        for t in sorted(self.trials, key=lambda t: t.sort_key):
            if t.config.key() not in seen:
                seen.add(t.config.key())
                out.append(t)
        return out

    def leaderboard_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEADERBOARD_HEADER)
        for rank, t in enumerate(self.leaderboard(), 1):
            w.writerow([rank, t.config.hash()]
                       + [f"{t.metrics.get(m, float('nan')):.6f}" for m in LEADERBOARD_HEADER[2:6]]
                       + [f"{t.timings.get(k, 0.0):.6f}" for k in LEADERBOARD_HEADER[6:]])
        return buf.getvalue()


class _AssignmentScorer:
    """Valid-set metrics for many filter assignments at unit exponents."""

    def __init__(self, train: RatingTensor, valid: RatingTensor, ks):
        t0 = time.perf_counter()
        self.ks = ks
        self.n_crit = train.n_criteria
        truth = positives(valid)
        self.users = truth.users
        self.truth_rows = truth.matrix[self.users]
        bank = build_item_graph(train)
        self.graph_build_s = time.perf_counter() - t0
        prefs = build_preferences(train, 1.0)
        w = prefs.values[self.users] / self.n_crit
        graph = _Graph(bank, "raw", _use_dense(bank))
        mask = train.overall.to_scipy()[self.users]
        self.chunks = []
        with threadpool_limits(limits=1, user_api="blas"):
            for lo in range(0, len(self.users), CHUNK):
                hi = min(lo + CHUNK, len(self.users))
                blocks = []
                for c, m in enumerate(train.matrices):
                    r = sp.diags(w[lo:hi, c]) @ m.to_scipy()[self.users[lo:hi]]
                    a = graph.right_multiply(r)
                    b = graph.right_multiply(a)
                    blocks.append({"L": a, "I": b, "O": 2.0 * a - b})
                self.chunks.append((lo, hi, blocks, mask[lo:hi]))
        self.setup_s = time.perf_counter() - t0

    def evaluate(self, assignments: list[tuple[str, ...]]) -> list[dict[str, float]]:
        names = metric_names(self.ks)
        sums = np.zeros((len(assignments), len(names)))
        index = {a: j for j, a in enumerate(assignments)}
        prefixes = {a[:d] for a in assignments for d in range(1, self.n_crit + 1)}
        kmax = max(self.ks)
        for lo, hi, blocks, mask in self.chunks:
            truth = self.truth_rows[lo:hi]

            def visit(depth, prefix, acc):
                if depth == self.n_crit:
                    j = index.get(prefix)
                    if j is not None:
                        recs = topk_block(acc, mask, kmax)
                        per = batch_metrics(recs, truth, self.ks)
                        sums[j] += [per[n].sum() for n in names]
                    return
                for f in FAMILIES:
                    p = prefix + (f,)
                    if p not in prefixes:
                        continue
                    blk = blocks[depth][f]
                    visit(depth + 1, p, blk.copy() if acc is None else acc + blk)

            visit(0, (), None)
        n = max(len(self.users), 1)
        return [dict(zip(names, row / n)) for row in sums]


def _config(assignment, s_f=None, s_T=1.0) -> ModelConfig:
    return ModelConfig(FilterConfig.from_letters(assignment),
                       s_f or {f: 1.0 for f in FAMILIES}, s_T)


def _best(trials: list[Trial]) -> Trial:
    return min(trials, key=lambda t: t.sort_key)


def _assignment_stage(train, valid, spec: TuneSpec, ks) -> list[Trial]:
    scorer = _AssignmentScorer(train, valid, ks)
    n = train.n_criteria

    def run(batch):
        t0 = time.perf_counter()
        res = scorer.evaluate(batch)
        per = (time.perf_counter() - t0) / max(len(batch), 1)
        timing = {"graph_build_s": scorer.graph_build_s, "filter_s": per,
                  "total_s": per + scorer.setup_s}
        return [Trial(_config(a), m, timing) for a, m in zip(batch, res)]

    if spec.strategy == EXHAUSTIVE:
        return run(list(itertools.product(FAMILIES, repeat=n)))

    trials: list[Trial] = []
    current = ("L",) * n
    trials += run([current])
    for _ in range(spec.max_sweeps):
        changed = False
        for c in range(n):
            cands = [current[:c] + (f,) + current[c + 1:] for f in FAMILIES]
            new = run([a for a in cands if a != current])
            trials += new
            pool = [t for t in trials if tuple(x.name for x in t.config.filters.per_criterion) in cands]
            best = tuple(x.name for x in _best(pool).config.filters.per_criterion)
            if best != current:
                current, changed = best, True
        if not changed:
            break
    return trials


def _full_trial(train, valid, config: ModelConfig, bank, ks, threads, build_s) -> Trial:
    rep = run_ca_gf(train, valid, config, ks=ks, threads=threads, bank=bank)
    # the shared base graph is built once; charge its cost to every trial
    timings = dict(rep.timings, graph_build_s=build_s)
    timings["total_s"] = rep.timings["total_s"] - rep.timings["graph_build_s"] + build_s
    return Trial(config, rep.metrics, timings)


def tune(train: RatingTensor, valid: RatingTensor, spec: TuneSpec | None = None,
         *, ks=DEFAULT_KS) -> TuneResult:
    """Pick the configuration with the highest validation Recall@10."""
    spec = spec or TuneSpec()
    ks = tuple(sorted(set(ks) | {10}))
    if valid.overall.nnz == 0:
        raise ParameterError("tuning needs a non-empty validation fold")
    trials = _assignment_stage(train, valid, spec, ks)
    best = _best(trials)
    log.info("best assignment %s  recall@10=%.4f", best.config.filters.label,
             best.metrics.get(OBJECTIVE, float("nan")))
    if not spec.refine:
        return TuneResult(best.config, trials)

    t0 = time.perf_counter()
    bank = build_item_graph(train)
    build_s = time.perf_counter() - t0
    incumbent = _full_trial(train, valid, best.config, bank, ks, spec.threads, build_s)
    trials.append(incumbent)
    used = sorted({ch.name for ch in best.config.filters.per_criterion}, key=FAMILIES.index)
    for fam in used:
        pool = [incumbent]
        for v in spec.sf_grid:
            s_f = dict(incumbent.config.s_f, **{fam: float(v)})
            cfg = ModelConfig(incumbent.config.filters, s_f, incumbent.config.s_T)
            if cfg.key() == incumbent.config.key():
                continue
            pool.append(_full_trial(train, valid, cfg, bank, ks, spec.threads, build_s))
        trials += pool[1:]
        incumbent = _best(pool)
    pool = [incumbent]
    for v in spec.st_grid:
        cfg = ModelConfig(incumbent.config.filters, incumbent.config.s_f, float(v))
        if cfg.key() != incumbent.config.key():
            pool.append(_full_trial(train, valid, cfg, bank, ks, spec.threads, build_s))
    trials += pool[1:]
    incumbent = _best(pool)
    return TuneResult(incumbent.config, trials)
