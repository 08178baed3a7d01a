import pytest

from mcgf.config import ConfigError, RunConfig

NAMES = ["overall", "acting", "direction", "story", "visuals"]


def test_defaults():
    cfg = RunConfig.from_dict({})
    assert cfg.seed == 0 and cfg.ks == (5, 10)
    assert cfg.model_config(NAMES).filters.label == "LLLLL"


def test_hash_ignores_threads_and_out():
    a = RunConfig.from_dict({"seed": 1})
    b = a.override(threads=8, out="/tmp/elsewhere")
    assert a.hash() == b.hash()
    assert a.hash() != a.override(seed=2).hash()
    assert a.hash() != a.override(variant="p").hash()


def test_hash_tracks_data_content_not_location(tmp_path):
    for d in ("x", "y"):
        (tmp_path / d).mkdir()
        (tmp_path / d / "r.csv").write_text("user_id,item_id,overall\n0,0,1\n")
    a = RunConfig.from_dict({"data": {"path": str(tmp_path / "x" / "r.csv")}})
    b = RunConfig.from_dict({"data": {"path": str(tmp_path / "y" / "r.csv")}})
    assert a.hash() == b.hash()
    (tmp_path / "y" / "r.csv").write_text("user_id,item_id,overall\n0,0,2\n")
    assert a.hash() != b.hash()
    assert a.stamp() == f"config_hash={a.hash()} seed=0"


def test_load_and_relative_data(tmp_path):
    (tmp_path / "r.csv").write_text("user_id,item_id,overall\n0,0,1\n")
    (tmp_path / "c.toml").write_text(
        'seed = 3\nthreads = 2\n[data]\npath = "r.csv"\n[model]\npreset = "ym"\n')
    cfg = RunConfig.load(tmp_path / "c.toml")
    assert cfg.threads == 2 and cfg.seed == 3
    assert cfg.data_path() == tmp_path / "r.csv"
    m = cfg.model_config(NAMES)
    assert m.filters.label == "OIIOL" and m.s_T == 4.0


def test_toml_round_trip(tmp_path):
    cfg = RunConfig.from_dict({"model": {"filters": ["O", "L"], "s_f": {"L": 0.5, "I": 1.0, "O": 2.0}}})
    path = tmp_path / "c.toml"
    path.write_text(cfg.to_toml())
    back = RunConfig.load(path)
    assert back.hash() == cfg.hash()


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"model": {"bogus": 1}},
    {"model": {"variant": "x"}},
    {"model": {"preset": "nope"}},
    {"model": {"s_T": 0}},
    {"model": {"filters": ["Q"]}},
    {"eval": {"ks": [0]}},
    {"split": {"train_fraction": 1.5}},
    {"tune": {"strategy": "random"}},
    {"seed": "one"},
    {"data": {"format": "xml"}},
])
def test_rejects_bad_values(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc)


def test_filter_count_must_match_data():
    cfg = RunConfig.from_dict({"model": {"filters": ["L", "I"]}})
    with pytest.raises(ConfigError):
        cfg.model_config(NAMES)


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "none.toml")
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"data": {"path": str(tmp_path / "none.csv")}}).data_path()
