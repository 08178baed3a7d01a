import numpy as np
import pytest

from mcgf import bench
from mcgf.cli import main
from mcgf.ingest.synthetic import LADDER, ladder_specs


def test_ladder_shape():
    specs = ladder_specs()
    assert [(s.n_users, s.n_items, s.n_mc_ratings) for s in specs] == list(LADDER)
    for s in specs:
        s.check()


def test_smallest_point_runs():
    rows = bench.run_ladder(ladder_specs()[:1])
    assert len(rows) == 1
    r = rows[0]
    assert r.status == "ok" and r.nnz_p > 0 and r.total_s > 0
    text = bench.rows_csv(rows, "config_hash=x seed=0")
    lines = text.splitlines()
    assert lines[1] == ",".join(bench.HEADER)
    assert lines[2].startswith("1500,3000,300000,") and lines[2].endswith(",ok")


def test_memory_cap_skips():
    rows = bench.run_ladder(ladder_specs()[-1:], mem_cap_gb=0.001)
    assert rows[0].status == "skipped_memory_cap" and rows[0].total_s == 0


def test_estimate_grows_with_size():
    est = [bench.estimated_peak_bytes(s) for s in ladder_specs()]
    assert est == sorted(est)


def test_loglog_slope():
    x = np.array([1e3, 1e4, 1e5])
    assert bench.loglog_slope(x, 3 * x ** 1.2) == pytest.approx(1.2)


def test_cli_bench(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[bench]\nmax_points = 1\n")
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path), "--threads", "1"]) == 0
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and len(lines) == 3
