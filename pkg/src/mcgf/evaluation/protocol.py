"""End-to-end pipeline: graph, preferences, filtering, ranking and metrics."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from mcgf.evaluation.metrics import GroundTruth, batch_metrics, metric_names, positives
from mcgf.filtering import FilterConfig, resolve_filters
from mcgf.graph import DEFAULT_NNZ_CAP, FAMILIES, ItemGraphBank, build_item_graph
from mcgf.ingest.tensor import RatingTensor
from mcgf.preference import PreferenceMatrix, build_preferences, topk_block
from mcgf.scoring import score_all
from mcgf.sparse import ParameterError

VARIANTS = ("none", "m", "s", "f", "p")
DEFAULT_KS = (5, 10)

#: named settings for three multi-criteria rating datasets
PRESETS = {
    "ta": dict(
        filters={"overall": "O", "business": "L", "check-in": "I", "cleanliness": "L",
                 "location": "L", "rooms": "I", "service": "L", "value": "L"},
        s_f={"L": 0.1, "I": 1.0, "O": 1.2}, s_T=2.0),
    "ym": dict(
        filters={"overall": "O", "acting": "I", "direction": "I", "story": "O", "visuals": "L"},
        s_f={"L": 1.0, "I": 1.0, "O": 1.8}, s_T=4.0),
    "ba": dict(
        filters={"overall": "L", "appearance": "O", "aroma": "I", "palate": "I", "taste": "L"},
        s_f={"L": 0.6, "I": 0.85, "O": 1.5}, s_T=2.0),
}


@dataclass(frozen=True)
class ModelConfig:
    """Filter per criterion, adjustment exponent per family, ``s_T``, variant."""

    filters: FilterConfig
    s_f: Mapping[str, float] = field(default_factory=lambda: {f: 1.0 for f in FAMILIES})
    s_T: float = 1.0
    variant: str = "none"

    def __post_init__(self):
        if not isinstance(self.filters, FilterConfig):
            object.__setattr__(self, "filters", FilterConfig.parse(self.filters))
        object.__setattr__(self, "s_f", {f: float(v) for f, v in dict(self.s_f).items()})
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @classmethod
    def default(cls, n_criteria: int) -> "ModelConfig":
        return cls(FilterConfig.uniform("L", n_criteria))

    @classmethod
    def preset(cls, name: str, criterion_names=None) -> "ModelConfig":
        """A named configuration; filters follow ``criterion_names`` when given."""
        p = PRESETS[name.lower()]
        table = p["filters"]
        if criterion_names is None:
            letters = list(table.values())
        else:
            try:
                letters = [table[n] for n in criterion_names]
            except KeyError as e:
                raise ParameterError(f"preset {name!r} has no criterion {e.args[0]!r}") from None
        return cls(FilterConfig.from_letters(letters), p["s_f"], p["s_T"])

    def with_variant(self, variant: str) -> "ModelConfig":
        return replace(self, variant=variant)

    def to_dict(self) -> dict:
        return {
            "filters": self.filters.to_list(),
            "s_f": {f: self.s_f[f] for f in sorted(self.s_f)},
            "s_T": self.s_T,
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        return cls(FilterConfig.parse(d["filters"]), d.get("s_f", {f: 1.0 for f in FAMILIES}),
                   float(d.get("s_T", 1.0)), d.get("variant", "none"))

    def key(self) -> str:
        """Canonical text form; orders configurations for tie-breaking."""
        sf = ",".join(f"{f}:{self.s_f[f]:g}" for f in sorted(self.s_f))
        return f"filters={self.filters.label};s_f={sf};s_T={self.s_T:g};variant={self.variant}"

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def effective(self, n_criteria: int) -> tuple["ModelConfig", list[int] | None, bool]:
        """Resolve the ablation switch into (config, graph criteria, uniform prefs)."""
        cfg, crit, uniform = self, None, False
        if self.variant == "m":
            crit = [0]
        elif self.variant == "s":
            cfg = replace(cfg, s_f={f: 1.0 for f in cfg.s_f})
        elif self.variant == "f":
            cfg = replace(cfg, filters=FilterConfig.uniform("L", n_criteria))
        elif self.variant == "p":
            uniform = True
        return cfg, crit, uniform


@dataclass
class EvalReport:
    """Mean metrics over users with at least one positive, plus stage timings."""

    metrics: dict[str, float]
    n_users_evaluated: int
    n_users_without_positives: int
    config: dict
    timings: dict[str, float] = field(default_factory=dict)
    ks: tuple[int, ...] = DEFAULT_KS
    median: float = float("nan")

    @property
    def empty(self) -> bool:
        return self.n_users_evaluated == 0

    def to_text(self, extra: Mapping[str, object] | None = None) -> str:
        lines = []
        for k, v in (extra or {}).items():
            lines.append(f"{k}={v}")
        lines.append(f"config={json.dumps(self.config, sort_keys=True)}")
        lines.append(f"n_users_evaluated={self.n_users_evaluated}")
        lines.append(f"n_users_without_positives={self.n_users_without_positives}")
        lines.append(f"test_median={self.median:g}")
        for name in metric_names(self.ks):
            v = self.metrics.get(name, float("nan"))
            lines.append(f"{name}={v:.6f}")
        for name, v in self.timings.items():
            lines.append(f"time.{name}={v:.6f}")
        return "\n".join(lines) + "\n"


@dataclass
class Fitted:
    """Everything needed to score users of ``train``."""

    train: RatingTensor
    config: ModelConfig
    bank: ItemGraphBank
    prefs: PreferenceMatrix
    timings: dict[str, float]

    def scores(self, users=None, threads: int = 1) -> np.ndarray:
        return score_all(self.bank, self.config.filters, self.train, self.prefs,
                         threads=threads, users=users)


def fit(train: RatingTensor, config: ModelConfig, *, bank: ItemGraphBank | None = None,
        nnz_cap: int = DEFAULT_NNZ_CAP) -> Fitted:
    """Build the graph bank and preference matrix for ``config``.

    A prebuilt ``bank`` is reused (with the config's exponents) when given;
    it must come from the same training data and variant.
    """
    cfg, crit, uniform = config.effective(train.n_criteria)
    resolve_filters(cfg.filters, train.n_criteria)
    t0 = time.perf_counter()
    if bank is None:
        bank = build_item_graph(train, cfg.s_f, criteria=crit, nnz_cap=nnz_cap)
    else:
        bank = bank.with_exponents(cfg.s_f)
    t1 = time.perf_counter()
    prefs = (PreferenceMatrix.uniform(train.n_users, train.n_criteria) if uniform
             else build_preferences(train, cfg.s_T))
    t2 = time.perf_counter()
    return Fitted(train, cfg, bank, prefs, {"graph_build_s": t1 - t0, "preference_s": t2 - t1})


def rank_users(scores: np.ndarray, train: RatingTensor, users: np.ndarray, K: int,
               block: int = 1024) -> np.ndarray:
    """Top-``K`` items per user, hiding the user's training interactions."""
    mask = train.overall.to_scipy()
    out = np.empty((len(users), K), dtype=np.int64)
    for lo in range(0, len(users), block):
        hi = min(lo + block, len(users))
        out[lo:hi] = topk_block(scores[lo:hi], mask[users[lo:hi]], K)
    return out


def evaluate_rankings(recs: np.ndarray, users: np.ndarray, truth: GroundTruth, ks) -> dict[str, float]:
    per_user = batch_metrics(recs, truth.matrix[users], ks)
    return {name: float(np.mean(v)) for name, v in per_user.items()}


def run_ca_gf(train: RatingTensor, eval_fold: RatingTensor, config: ModelConfig, *,
              ks=DEFAULT_KS, threads: int = 1, bank: ItemGraphBank | None = None,
              return_scores: bool = False, all_users: bool = False):
    """Fit on ``train``, rank non-interacted items, score against ``eval_fold``.

    Masking hides every interaction present in ``train``. With
    ``return_scores`` the score rows are returned as well: those of the
    evaluated users, or of every user when ``all_users`` is set.
    """
    t0 = time.perf_counter()
    ks = tuple(sorted(set(int(k) for k in ks)))
    truth = positives(eval_fold)
    users = truth.users
    n_without = int(np.count_nonzero(np.diff(eval_fold.overall.row_offsets) > 0)) - len(users)
    if len(users) == 0 and not all_users:
        report = EvalReport({}, 0, n_without, config.to_dict(), {"total_s": time.perf_counter() - t0},
                            ks, truth.median)
        return (report, np.zeros((0, train.n_items)), users) if return_scores else report

    fitted = fit(train, config, bank=bank)
    t1 = time.perf_counter()
    scored = np.arange(train.n_users) if all_users else users
    scores = fitted.scores(scored, threads=threads)
    t2 = time.perf_counter()
    metrics = {}
    if len(users):
        rows = scores[users] if all_users else scores
        recs = rank_users(rows, train, users, max(ks))
        metrics = evaluate_rankings(recs, users, truth, ks)
    t3 = time.perf_counter()
    timings = dict(fitted.timings)
    timings.update(filter_s=t2 - t1, rank_s=t3 - t2, total_s=t3 - t0)
    report = EvalReport(metrics, len(users), n_without, config.to_dict(), timings, ks, truth.median)
    return (report, scores, scored) if return_scores else report


def run_variant(variant: str, train: RatingTensor, eval_fold: RatingTensor, config: ModelConfig,
                **kwargs):
    """:func:`run_ca_gf` with one component ablated.

    ``m``: graph from overall ratings only; ``s``: every ``s_f`` set to 1;
    ``f``: linear filter for every criterion; ``p``: uniform criterion weights.
    """
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}")
    return run_ca_gf(train, eval_fold, config.with_variant(variant), **kwargs)
