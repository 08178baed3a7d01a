"""Run configuration: a TOML file with one table per concern.

```toml
seed = 0
threads = 4
out = "runs/ym"

[data]
path = "ratings.csv"
format = "wide"

[split]
train_fraction = 0.8
valid_fraction_of_train = 0.1

[model]
filters = ["O", "I", "I", "O", "L"]   # or [[model.filters]] tables with coeffs
s_f = { L = 1.0, I = 1.0, O = 1.8 }
s_T = 4.0
variant = "none"

[eval]
ks = [5, 10]

[baseline]
enabled = false
alpha = 0.3
ideal_rank = 256
dense_cap = 2000

[tune]
strategy = "exhaustive"

[bench]
mem_cap_gb = 4.0

[synth]
n_users = 1500
n_items = 3000
n_mc_ratings = 300000
n_criteria = 5
```
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from mcgf.evaluation.baseline import DEFAULT_ALPHA, DEFAULT_DENSE_CAP, DEFAULT_IDEAL_RANK
from mcgf.evaluation.protocol import DEFAULT_KS, PRESETS, VARIANTS, ModelConfig
from mcgf.evaluation.tuning import DEFAULT_SF_GRID, DEFAULT_ST_GRID, EXHAUSTIVE, GREEDY, TuneSpec
from mcgf.filtering import FilterConfig
from mcgf.graph import FAMILIES
from mcgf.ingest.io import LONG, WIDE
from mcgf.ingest.split import SplitSpec
from mcgf.ingest.synthetic import SyntheticSpec


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out": "out",
    "data": {"path": None, "format": WIDE},
    "split": {"train_fraction": 0.8, "valid_fraction_of_train": 0.1},
    "model": {"preset": None, "filters": None, "s_f": {f: 1.0 for f in FAMILIES},
              "s_T": 1.0, "variant": "none"},
    "eval": {"ks": list(DEFAULT_KS)},
    "baseline": {"enabled": False, "alpha": DEFAULT_ALPHA, "ideal_rank": DEFAULT_IDEAL_RANK,
                 "dense_cap": DEFAULT_DENSE_CAP},
    "tune": {"strategy": EXHAUSTIVE, "sf_grid": list(DEFAULT_SF_GRID),
             "st_grid": list(DEFAULT_ST_GRID), "refine": True},
    "bench": {"mem_cap_gb": 4.0, "max_points": 7, "n_criteria": 5,
              "filters": ["O", "I", "I", "O", "L"]},
    "synth": {"n_users": 1500, "n_items": 3000, "n_mc_ratings": 300_000, "n_criteria": 5,
              "n_communities": 0, "affinity": 0.8},
}
SECTIONS = tuple(k for k, v in DEFAULTS.items() if isinstance(v, dict))
#: keys that never influence numerical output and stay out of the hash
UNHASHED = ("out", "threads")


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where + k!r}")
        if isinstance(base[k], dict) and k != "s_f":
            if not isinstance(v, dict):
                raise ConfigError(f"{where + k!r} must be a table")
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    threads: int | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        threads = doc.pop("threads", None)
        cfg = cls(_merge(DEFAULTS, doc), threads, path.resolve().parent)
        cfg.check()
        return cfg

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "RunConfig":
        doc = dict(doc)
        threads = doc.pop("threads", None)
        cfg = cls(_merge(DEFAULTS, doc), threads, Path(base_dir or Path.cwd()))
        cfg.check()
        return cfg

    def override(self, **kw) -> "RunConfig":
        """Apply CLI overrides; ``None`` values are ignored."""
        raw = copy.deepcopy(self.raw)
        threads = self.threads
        for k, v in kw.items():
            if v is None:
                continue
            if k == "threads":
                threads = int(v)
            elif k in ("seed", "out"):
                raw[k] = v
            elif k == "variant":
                raw["model"]["variant"] = v
            elif k == "baseline":
                raw["baseline"]["enabled"] = True
            elif k == "data":
                raw["data"]["path"] = v
            else:
                raise ConfigError(f"unsupported override {k!r}")
        cfg = RunConfig(raw, threads, self.base_dir)
        cfg.check()
        return cfg

    # -- validation --------------------------------------------------------

    def check(self) -> None:
        r = self.raw
        if not isinstance(r["seed"], int) or isinstance(r["seed"], bool):
            raise ConfigError("seed must be an integer")
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError("threads must be >= 1")
        if r["data"]["format"] not in (WIDE, LONG):
            raise ConfigError(f"data.format must be 'wide' or 'long', got {r['data']['format']!r}")
        m = r["model"]
        if m["variant"] not in VARIANTS:
            raise ConfigError(f"model.variant must be one of {VARIANTS}")
        if m["preset"] is not None and m["preset"].lower() not in PRESETS:
            raise ConfigError(f"model.preset must be one of {sorted(PRESETS)}")
        ks = r["eval"]["ks"]
        if not ks or any(not isinstance(k, int) or k < 1 for k in ks):
            raise ConfigError("eval.ks must be a list of positive integers")
        try:
            self.split_spec()
            if m["filters"] is not None:
                FilterConfig.parse(m["filters"])
            self.tune_spec()
            ModelConfig(FilterConfig.uniform("L", 1), m["s_f"], float(m["s_T"]), m["variant"])
            if not float(m["s_T"]) > 0:
                raise ValueError("model.s_T must be > 0")
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(str(e)) from None

    def data_path(self, required: bool = True) -> Path | None:
        p = self.raw["data"]["path"]
        if p is None:
            if required:
                raise ConfigError("data.path is required for this command")
            return None
        path = Path(p)
        if not path.is_absolute():
            path = self.base_dir / path
        if required and not path.is_file():
            raise ConfigError(f"data.path {path} does not exist")
        return path

    # -- typed views -------------------------------------------------------

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def out_dir(self) -> Path:
        p = Path(self.raw["out"])
        return p if p.is_absolute() else Path.cwd() / p

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.raw["eval"]["ks"])))

    def split_spec(self) -> SplitSpec:
        s = self.raw["split"]
        return SplitSpec(float(s["train_fraction"]), float(s["valid_fraction_of_train"]), self.seed)

    def model_config(self, criterion_names) -> ModelConfig:
        m = self.raw["model"]
        n = len(criterion_names)
        if m["preset"] is not None:
            cfg = ModelConfig.preset(m["preset"], criterion_names)
            if m["filters"] is not None:
                cfg = ModelConfig(FilterConfig.parse(m["filters"]), cfg.s_f, cfg.s_T)
            return cfg.with_variant(m["variant"])
        filters = FilterConfig.uniform("L", n) if m["filters"] is None else FilterConfig.parse(m["filters"])
        if len(filters) != n:
            raise ConfigError(f"model.filters has {len(filters)} entries but the data has {n} criteria")
        return ModelConfig(filters, m["s_f"], float(m["s_T"]), m["variant"])

    def tune_spec(self) -> TuneSpec:
        t = self.raw["tune"]
        if t["strategy"] not in (EXHAUSTIVE, GREEDY):
            raise ConfigError(f"tune.strategy must be {EXHAUSTIVE!r} or {GREEDY!r}")
        return TuneSpec(t["strategy"], tuple(float(v) for v in t["sf_grid"]),
                        tuple(float(v) for v in t["st_grid"]), bool(t["refine"]),
                        threads=self.threads or 1)

    def synth_spec(self) -> SyntheticSpec:
        s = self.raw["synth"]
        return SyntheticSpec(int(s["n_users"]), int(s["n_items"]), int(s["n_mc_ratings"]),
                             int(s["n_criteria"]), None, self.seed, int(s["n_communities"]),
                             float(s["affinity"]))

    # -- identity ----------------------------------------------------------

    def hashable(self) -> dict:
        doc = {k: v for k, v in copy.deepcopy(self.raw).items() if k not in UNHASHED}
        p = self.data_path(required=False)
        if p is not None:
            doc["data"]["path"] = os.path.basename(p)
            doc["data"]["sha256"] = _file_digest(p) if p.is_file() else None
        return doc

    def hash(self) -> str:
        blob = json.dumps(self.hashable(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def stamp(self) -> str:
        return f"config_hash={self.hash()} seed={self.seed}"

    def to_toml(self) -> str:
        doc = {k: v for k, v in copy.deepcopy(self.raw).items() if k != "out"}
        p = self.data_path(required=False)
        if p is not None:
            doc["data"]["path"] = str(p)
        return tomli_w.dumps(_drop_none(doc))


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
