import csv
import io

import numpy as np
import pytest

from mcgf.evaluation.protocol import ModelConfig, run_ca_gf
from mcgf.evaluation.tuning import (
    LEADERBOARD_HEADER, TuneSpec, _AssignmentScorer, tune,
)
from mcgf.ingest.split import SplitSpec, split
from mcgf.ingest.synthetic import SyntheticSpec, generate_synthetic
from mcgf.ingest.tensor import RatingTensor
from mcgf.sparse import ParameterError, SparseMatrix

SMALL_GRID = TuneSpec(sf_grid=(0.5, 1.0, 1.5), st_grid=(1.0, 2.0))


@pytest.fixture(scope="module")
def folds():
    t = generate_synthetic(SyntheticSpec(150, 80, 4 * 2500, 4, seed=5, n_communities=4))
    return split(t, SplitSpec(seed=5))


def test_fast_stage_matches_full_pipeline(folds):
    train, valid, _ = folds
    scorer = _AssignmentScorer(train, valid, (5, 10))
    rng = np.random.default_rng(0)
    picks = [tuple(str(x) for x in rng.choice(list("LIO"), 4)) for _ in range(6)]
    fast = scorer.evaluate(picks)
    for a, m in zip(picks, fast):
        full = run_ca_gf(train, valid, ModelConfig(list(a)), ks=(5, 10)).metrics
        for k in full:
            assert m[k] == pytest.approx(full[k], abs=1e-12)


def test_single_matrix_has_three_assignments():
    t = generate_synthetic(SyntheticSpec(60, 30, 900, 1, seed=2))
    assert t.n_criteria == 1
    train, valid, _ = split(t, SplitSpec(seed=1))
    res = tune(train, valid, TuneSpec(refine=False))
    assert sorted(tr.config.filters.label for tr in res.trials) == ["I", "L", "O"]


def test_deterministic_and_no_worse_than_default(folds):
    train, valid, _ = folds
    a = tune(train, valid, SMALL_GRID)
    b = tune(train, valid, SMALL_GRID)
    assert a.best.key() == b.best.key()
    assert [t.config.hash() for t in a.leaderboard()] == [t.config.hash() for t in b.leaderboard()]
    assert [t.metrics for t in a.leaderboard()] == [t.metrics for t in b.leaderboard()]
    best = run_ca_gf(train, valid, a.best).metrics["recall@10"]
    default = run_ca_gf(train, valid, ModelConfig.default(4)).metrics["recall@10"]
    assert best >= default
    assert a.leaderboard()[0].config.key() == a.best.key()


def test_exhaustive_covers_all_assignments(folds):
    train, valid, _ = folds
    res = tune(train, valid, TuneSpec(refine=False))
    labels = {t.config.filters.label for t in res.trials}
    assert len(labels) == 3 ** 4


def test_greedy_visits_fewer(folds):
    train, valid, _ = folds
    res = tune(train, valid, TuneSpec(strategy="greedy", refine=False))
    ex = tune(train, valid, TuneSpec(refine=False))
    labels = {t.config.filters.label for t in res.trials}
    assert "LLLL" in labels and len(labels) < 81
    best_r = {t.config.key(): t.metrics["recall@10"] for t in ex.trials}
    assert best_r[res.best.key()] <= max(best_r.values())


def test_leaderboard_csv(folds):
    train, valid, _ = folds
    res = tune(train, valid, SMALL_GRID)
    text = res.leaderboard_csv("config_hash=abc seed=0")
    lines = text.splitlines()
    assert lines[0] == "# config_hash=abc seed=0"
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    assert tuple(rows[0]) == LEADERBOARD_HEADER
    body = rows[1:]
    assert [int(r[0]) for r in body] == list(range(1, len(body) + 1))
    recalls = [float(r[3]) for r in body]
    assert recalls == sorted(recalls, reverse=True)
    assert len({r[1] for r in body}) == len(body)
    assert all(float(r[-1]) > 0 for r in body)


def test_empty_validation_fold(folds):
    train, _, _ = folds
    empty = RatingTensor(tuple(SparseMatrix.empty(train.n_users, train.n_items) for _ in range(4)))
    with pytest.raises(ParameterError):
        tune(train, empty)


def test_bad_spec():
    with pytest.raises(ParameterError):
        TuneSpec(strategy="random")
    with pytest.raises(ParameterError):
        TuneSpec(sf_grid=(0.0,))
