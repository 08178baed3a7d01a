import csv
import subprocess
import sys

import pytest

from mcgf.cli import main
from mcgf.config import RunConfig
from mcgf.outputs import Staging


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert run("synth", "--out", d, "--users", 150, "--items", 120, "--mc-ratings", 5 * 3000,
               "--communities", 4, "--seed", 1) == 0
    return d / "ratings.csv"


def body(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and " seed=" in lines[0]
    return lines[1:]


def no_staging(out):
    return not any(p.name.startswith(".staging-") for p in out.iterdir())


class TestSynth:
    def test_output_stamped_and_loadable(self, data):
        rows = body(data)
        assert rows[0].split(",")[:2] == ["user_id", "item_id"]
        assert len(rows) - 1 == 3000

    def test_deterministic(self, data, tmp_path):
        run("synth", "--out", tmp_path, "--users", 150, "--items", 120, "--mc-ratings", 15000,
            "--communities", 4, "--seed", 1)
        assert (tmp_path / "ratings.csv").read_bytes() == data.read_bytes()


class TestEvaluate:
    def test_outputs(self, data, tmp_path, capsys):
        assert run("evaluate", "--data", data, "--out", tmp_path, "--threads", 1) == 0
        report = (tmp_path / "report.txt").read_text()
        assert report.startswith("config_hash=")
        assert "recall@10=" in report and "ndcg@5=" in report
        assert capsys.readouterr().out == report
        rows = body(tmp_path / "recommendations.csv")
        assert rows[0] == "user_id,rank,item_id,score"
        parsed = list(csv.reader(rows[1:]))
        assert {len(r) for r in parsed} == {4}
        assert all(len(r[3].split(".")[1]) == 6 for r in parsed)
        assert no_staging(tmp_path)

    def test_byte_identical_across_runs_and_threads(self, data, tmp_path):
        outs = []
        for i, threads in enumerate((1, 1, 4)):
            out = tmp_path / str(i)
            assert run("evaluate", "--data", data, "--out", out, "--threads", threads) == 0
            outs.append(out)
        recs = [(o / "recommendations.csv").read_bytes() for o in outs]
        assert recs[0] == recs[1] == recs[2]

    @pytest.mark.parametrize("variant", ["m", "s", "f", "p"])
    def test_variants_change_the_hash(self, data, tmp_path, variant):
        run("evaluate", "--data", data, "--out", tmp_path / "a")
        run("evaluate", "--data", data, "--out", tmp_path / "b", "--variant", variant)
        ha = (tmp_path / "a" / "report.txt").read_text().splitlines()[0]
        hb = (tmp_path / "b" / "report.txt").read_text().splitlines()[0]
        assert ha != hb

    def test_baseline(self, data, tmp_path):
        assert run("evaluate", "--data", data, "--out", tmp_path, "--baseline", "gfcf-mc") == 0
        assert '"baseline": "gfcf-mc"' in (tmp_path / "report.txt").read_text()

    def test_prepare_then_evaluate_reuses_cache(self, data, tmp_path):
        assert run("prepare", "--data", data, "--out", tmp_path) == 0
        caches = list(tmp_path.glob("graph-*-seed0.mcgf"))
        assert len(caches) == 1
        manifest = body(tmp_path / "split_manifest.csv")
        assert manifest[0].split(",")[:3] == ["user_id", "item_id", "fold"]
        assert {r.split(",")[2] for r in manifest[1:]} == {"train", "valid", "test"}
        body(tmp_path / "id_map.csv")
        assert run("evaluate", "--data", data, "--out", tmp_path) == 0
        fresh = tmp_path / "fresh"
        assert run("evaluate", "--data", data, "--out", fresh) == 0
        assert (tmp_path / "recommendations.csv").read_bytes() == (fresh / "recommendations.csv").read_bytes()


class TestTuneAndAttribution:
    def test_tune_writes_loadable_config(self, data, tmp_path):
        assert run("tune", "--data", data, "--out", tmp_path) == 0
        best = tmp_path / "best_config.toml"
        assert best.read_text().startswith("# config_hash=")
        cfg = RunConfig.load(best)
        assert len(cfg.model_config([f"c{i}" for i in range(5)]).filters) == 5
        lb = body(tmp_path / "leaderboard.csv")
        assert lb[0].startswith("rank,config_hash,recall@5,recall@10")
        assert run("evaluate", "--config", best, "--out", tmp_path / "ev") == 0

    def test_attribution(self, data, tmp_path):
        assert run("attribution", "--data", data, "--out", tmp_path, "--user", 0, "--top", 3) == 0
        rows = body(tmp_path / "attribution.csv")
        assert rows[0] == "user_id,item_id,criterion_index,criterion_name,contribution"
        assert len(rows) - 1 == 3 * 5
        assert run("attribution", "--data", data, "--out", tmp_path / "one", "--user", 0,
                   "--item", 5) == 0
        assert len(body(tmp_path / "one" / "attribution.csv")) == 6


class TestErrors:
    def test_missing_data(self, tmp_path, capsys):
        assert run("evaluate", "--out", tmp_path) == 2
        assert "error" in capsys.readouterr().err

    def test_unknown_user_writes_nothing(self, data, tmp_path):
        assert run("attribution", "--data", data, "--out", tmp_path, "--user", 10**9) == 2
        assert not (tmp_path / "attribution.csv").exists()

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[model]\nbogus = 1\n")
        assert run("evaluate", "--config", cfg, "--out", tmp_path) == 2

    def test_malformed_ratings(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("user_id,item_id,overall\n0,0,abc\n")
        assert run("evaluate", "--data", bad, "--out", tmp_path / "o") == 2

    def test_usage_error_from_argparse(self):
        with pytest.raises(SystemExit) as e:
            run("evaluate", "--variant", "zz")
        assert e.value.code == 2


class TestStaging:
    def test_failure_leaves_nothing(self, tmp_path):
        with pytest.raises(RuntimeError):
            with Staging(tmp_path) as st:
                st.write_text("a.txt", "x")
                raise RuntimeError("boom")
        assert list(tmp_path.iterdir()) == []

    def test_success_publishes_all(self, tmp_path):
        with Staging(tmp_path) as st:
            st.write_text("a.txt", "x")
            st.write_text("b.txt", "y")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.txt"]


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mcgf.cli", "synth", "--out", str(tmp_path),
                           "--users", "20", "--items", "15", "--mc-ratings", "500"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "ratings.csv").is_file()
