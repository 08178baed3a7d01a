"""``mcgf`` command line: prepare, evaluate, tune, attribution, bench, synth."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from mcgf import bench
from mcgf.config import ConfigError, RunConfig
from mcgf.evaluation.baseline import gfcf_mc_scores, run_gfcf_mc_baseline
from mcgf.evaluation.protocol import VARIANTS, fit, rank_users, run_ca_gf
from mcgf.evaluation.tuning import tune
from mcgf.graph import CacheError, build_item_graph, load_bank, save_bank
from mcgf.ingest.io import ParseError, dumps_id_map, dumps_ratings, dumps_split_manifest, load_ratings
from mcgf.ingest.split import split
from mcgf.ingest.synthetic import generate_synthetic, ladder_specs
from mcgf.ingest.tensor import RatingTensor, TensorError
from mcgf.outputs import Staging
from mcgf.preference import attribution
from mcgf.scoring import available_cores
from mcgf.sparse import DimensionError, ParameterError

log = logging.getLogger("mcgf")

USAGE_ERRORS = (ConfigError, ParseError, TensorError, ParameterError, DimensionError, CacheError)
RECS = "recommendations.csv"
REPORT = "report.txt"


# -- shared steps ------------------------------------------------------------

def _folds(cfg: RunConfig):
    t = load_ratings(cfg.data_path(), cfg.raw["data"]["format"])
    train, valid, test = split(t, cfg.split_spec())
    return t, train, valid, test


def _graph_cache_name(cfg: RunConfig) -> str:
    return f"graph-{cfg.hash()}-seed{cfg.seed}.mcgf"


def _recommendations_csv(t: RatingTensor, scores: np.ndarray, recs: np.ndarray, stamp: str) -> str:
    lines = [f"# {stamp}", "user_id,rank,item_id,score"]
    uid, iid = t.user_ids, t.item_ids
    for u in range(recs.shape[0]):
        row = scores[u]
        for r, i in enumerate(recs[u]):
            if i < 0:
                break
            lines.append(f"{uid[u]},{r + 1},{iid[i]},{row[i]:.6f}")
    return "\n".join(lines) + "\n"


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or available_cores()


# -- commands ----------------------------------------------------------------

def cmd_prepare(cfg: RunConfig) -> list[Path]:
    t, train, valid, test = _folds(cfg)
    fit_t = train.merge(valid)
    model = cfg.model_config(t.criterion_names)
    eff, crit, _ = model.effective(t.n_criteria)
    bank = build_item_graph(fit_t, eff.s_f, criteria=crit)
    with Staging(cfg.out_dir) as st:
        st.write_text("split_manifest.csv", dumps_split_manifest(train, valid, test, cfg.stamp()))
        st.write_text("id_map.csv", f"# {cfg.stamp()}\n" + dumps_id_map(t))
        save_bank(bank, st.path(_graph_cache_name(cfg)))
    print(f"prepared {t.n_users} users, {t.n_items} items, {t.n_criteria} criteria; "
          f"train={train.overall.nnz} valid={valid.overall.nnz} test={test.overall.nnz}")
    return st.published()


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    t, train, valid, test = _folds(cfg)
    fit_t = train.merge(valid)
    ks, stamp = cfg.ks, cfg.stamp()
    b = cfg.raw["baseline"]
    if b["enabled"]:
        report = run_gfcf_mc_baseline(fit_t, test, b["alpha"], b["ideal_rank"], b["dense_cap"], ks=ks)
        scores = gfcf_mc_scores(fit_t, alpha=b["alpha"], ideal_rank=b["ideal_rank"],
                                dense_cap=b["dense_cap"])
    else:
        model = cfg.model_config(t.criterion_names)
        bank = None
        cache = cfg.out_dir / _graph_cache_name(cfg)
        if cache.is_file():
            bank = load_bank(cache)
            log.info("reusing cached graph %s", cache.name)
        report, scores, _ = run_ca_gf(fit_t, test, model, ks=ks, threads=_threads(cfg), bank=bank,
                                      return_scores=True, all_users=True)
    users = np.arange(fit_t.n_users)
    recs = rank_users(scores, fit_t, users, max(ks))
    text = report.to_text({"config_hash": cfg.hash(), "seed": cfg.seed})
    with Staging(cfg.out_dir) as st:
        st.write_text(REPORT, text)
        st.write_text(RECS, _recommendations_csv(fit_t, scores, recs, stamp))
    sys.stdout.write(text)
    return st.published()


def cmd_tune(cfg: RunConfig) -> list[Path]:
    t, train, valid, _ = _folds(cfg)
    result = tune(train, valid, cfg.tune_spec(), ks=cfg.ks)
    best = result.best
    doc = dict(cfg.raw)
    doc["model"] = {"preset": None, "filters": [c.name for c in best.filters.per_criterion],
                    "s_f": dict(best.s_f), "s_T": best.s_T, "variant": "none"}
    tuned = RunConfig(doc, cfg.threads, cfg.base_dir)
    top = result.leaderboard()[0]
    with Staging(cfg.out_dir) as st:
        st.write_text("best_config.toml", f"# {cfg.stamp()}\n# tuned config_hash={tuned.hash()}\n"
                      + tuned.to_toml())
        st.write_text("leaderboard.csv", result.leaderboard_csv(cfg.stamp()))
    print(f"best {best.key()} recall@10={top.metrics.get('recall@10', float('nan')):.6f} "
          f"({len(result.leaderboard())} configurations)")
    return st.published()


def _lookup(ids: np.ndarray, value: int, what: str) -> int:
    hit = np.flatnonzero(ids == value)
    if len(hit) == 0:
        raise ConfigError(f"{what} id {value} does not occur in the data")
    return int(hit[0])


def cmd_attribution(cfg: RunConfig, user: int, item: int | None, top: int = 10) -> list[Path]:
    t, train, valid, _ = _folds(cfg)
    fit_t = train.merge(valid)
    fitted = fit(fit_t, cfg.model_config(t.criterion_names))
    u = _lookup(fit_t.user_ids, user, "user")
    if item is None:
        s = fitted.scores([u])
        items = [int(i) for i in rank_users(s, fit_t, np.array([u]), top)[0] if i >= 0]
    else:
        items = [_lookup(fit_t.item_ids, item, "item")]
    lines = [f"# {cfg.stamp()}", "user_id,item_id,criterion_index,criterion_name,contribution"]
    for i in items:
        amap = attribution(fitted.prefs, fitted.bank, fitted.config.filters, fit_t, u, i)
        for c, v in enumerate(amap.contributions):
            lines.append(f"{fit_t.user_ids[u]},{fit_t.item_ids[i]},{c},{fit_t.criterion_names[c]},"
                         f"{float(v)!r}")
    with Staging(cfg.out_dir) as st:
        st.write_text("attribution.csv", "\n".join(lines) + "\n")
    return st.published()


def cmd_bench(cfg: RunConfig) -> list[Path]:
    b = cfg.raw["bench"]
    specs = ladder_specs(cfg.seed, int(b["n_criteria"]))[: int(b["max_points"])]

    def progress(row):
        print(f"{row.spec.n_users}x{row.spec.n_items} mc={row.spec.n_mc_ratings}: {row.status} "
              f"nnz_p={row.nnz_p} build={row.graph_build_s:.2f}s score={row.scoring_s:.2f}s",
              flush=True)

    rows = bench.run_ladder(specs, filters=b["filters"], mem_cap_gb=float(b["mem_cap_gb"]),
                            threads=_threads(cfg), progress=progress)
    ok = [r for r in rows if r.status == "ok"]
    if len(ok) >= 2:
        print(f"log-log slope of scoring time vs nnz: "
              f"{bench.loglog_slope([r.nnz_p for r in ok], [r.scoring_s for r in ok]):.3f}")
    with Staging(cfg.out_dir) as st:
        st.write_text("bench.csv", bench.rows_csv(rows, cfg.stamp()))
    return st.published()


def cmd_synth(cfg: RunConfig, fmt: str) -> list[Path]:
    spec = cfg.synth_spec()
    t = generate_synthetic(spec)
    with Staging(cfg.out_dir) as st:
        st.write_text("ratings.csv", dumps_ratings(t, fmt, cfg.stamp()))
    print(f"wrote {t.overall.nnz} interactions ({t.n_mc_ratings} ratings) for "
          f"{t.n_users} users and {t.n_items} items")
    return st.published()


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--data", type=Path, help="rating file (overrides data.path)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--variant", choices=VARIANTS)
    common.add_argument("--baseline", choices=["gfcf-mc"])
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mcgf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="write the split manifest and graph cache")
    sub.add_parser("evaluate", parents=[common], help="score the test fold and write recommendations")
    sub.add_parser("tune", parents=[common], help="search filters and exponents on the validation fold")
    a = sub.add_parser("attribution", parents=[common], help="per-criterion score contributions")
    a.add_argument("--user", type=int, required=True, help="user id as it appears in the data")
    a.add_argument("--item", type=int, help="item id; default: the user's top recommendations")
    a.add_argument("--top", type=int, default=10)
    sub.add_parser("bench", parents=[common], help="time the synthetic size ladder")
    s = sub.add_parser("synth", parents=[common], help="write a synthetic rating file")
    s.add_argument("--users", type=int)
    s.add_argument("--items", type=int)
    s.add_argument("--mc-ratings", type=int)
    s.add_argument("--criteria", type=int)
    s.add_argument("--communities", type=int)
    s.add_argument("--format", choices=["wide", "long"], default="wide")
    return p


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    cfg = cfg.override(seed=args.seed, threads=args.threads,
                       out=str(args.out.resolve()) if args.out else None,
                       variant=args.variant, baseline=args.baseline,
                       data=str(args.data.resolve()) if args.data else None)
    if args.command == "synth":
        s = cfg.raw["synth"]
        for key, val in (("n_users", args.users), ("n_items", args.items),
                         ("n_mc_ratings", args.mc_ratings), ("n_criteria", args.criteria),
                         ("n_communities", args.communities)):
            if val is not None:
                s[key] = val
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = _config_from_args(args)
        if args.command == "prepare":
            written = cmd_prepare(cfg)
        elif args.command == "evaluate":
            written = cmd_evaluate(cfg)
        elif args.command == "tune":
            written = cmd_tune(cfg)
        elif args.command == "attribution":
            written = cmd_attribution(cfg, args.user, args.item, args.top)
        elif args.command == "bench":
            written = cmd_bench(cfg)
        else:
            written = cmd_synth(cfg, args.format)
    except USAGE_ERRORS as e:
        print(f"mcgf {args.command}: error: {e}", file=sys.stderr)
        return 2
    except MemoryError as e:
        print(f"mcgf {args.command}: out of memory: {e}", file=sys.stderr)
        return 1
    for path in written:
        log.info("wrote %s", path)
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
