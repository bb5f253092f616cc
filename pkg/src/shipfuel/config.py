"""Run configuration: one INI file, overridable by CLI flags (flags win)."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .synth import REPORT_SCHEMA

# declared model defaults; see README for the rationale of each value
DEFAULT_MODEL_PARAMS = {
    "ridge": {"lam": 1.0},
    "svr": {"C": 10.0, "epsilon": 0.5, "kernel": "rbf"},
    "forest": {"n_trees": 100, "max_depth": None, "features_per_split": 1.0},
    "boost": {"rounds": 100, "eta": 0.3, "lambda_leaf": 1.0, "gamma_leaf": 0.0,
              "max_depth": 6},
}

DEFAULT_HYPER_GRIDS = {
    "ridge": {"lam": [0.01, 0.1, 1.0, 10.0, 100.0]},
    "svr": {"C": [1.0, 10.0, 100.0], "epsilon": [0.1, 0.5]},
    "forest": {"n_trees": [50, 100], "max_depth": [None, 8]},
    "boost": {"rounds": [50, 100], "eta": [0.1, 0.3], "max_depth": [3, 6]},
}

# response roll-up components can never be features: they sum to the target
RESPONSE_COMPONENTS = [
    "fuel_ulsfo_me", "fuel_ulsfo_boiler", "fuel_mgo_me", "fuel_mgo_boiler",
    "fuel_mgo_aux", "fuel_me",
]

DEFAULT_REDUNDANT = ["timestamp_epoch", "next_port"] + RESPONSE_COMPONENTS


@dataclass
class RunConfig:
    reports_path: str = ""
    grid_paths: list = field(default_factory=list)
    out_dir: str = "out"
    report_schema: dict = field(default_factory=lambda: dict(REPORT_SCHEMA))
    tz_policy: str = "utc"
    pipeline_steps: list = field(default_factory=list)   # empty = default order
    missing_threshold: float = 0.05
    outlier_method: str = "iqr"
    outlier_k: float = 1.5
    min_fuel: float = 15.0
    min_speed: float = 8.0
    redundant: list = field(default_factory=lambda: list(DEFAULT_REDUNDANT))
    daily_average: bool = True
    k: int = 5
    seed: int = 7
    objective: str = "r2"
    model_params: dict = field(default_factory=lambda: {k: dict(v) for k, v in
                                                        DEFAULT_MODEL_PARAMS.items()})
    hyper_grids: dict = field(default_factory=lambda: {k: {a: list(v) for a, v in g.items()}
                                                       for k, g in DEFAULT_HYPER_GRIDS.items()})
    synth: dict = field(default_factory=lambda: {
        "n_days": 296, "seed": 11, "state_rows": 30, "startup_rows": 4,
        "outlier_rows": 5, "missing_cell_rate": 0.01, "sigma_frac": 0.05,
    })
    source_digest: str = "defaults"

    def describe(self) -> dict:
        """Reproducibility payload for run.json (no wall-clock state)."""
        return {
            "config_digest": self.source_digest,
            "seed": self.seed,
            "k": self.k,
            "objective": self.objective,
            "reports": self.reports_path,
            "grids": list(self.grid_paths),
            "model_params": {k: {a: v for a, v in p.items()} for k, p in
                             self.model_params.items()},
        }


def _parse_scalar(token: str):
    token = token.strip()
    low = token.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def _parse_list(raw: str) -> list:
    return [_parse_scalar(tok) for tok in raw.split(",") if tok.strip()]


def load_config(path=None) -> RunConfig:
    """Read an INI run configuration; absent sections keep their defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    parser.optionxform = str   # raw report column names are case-sensitive
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        cfg.source_digest = hashlib.sha256(fh.read()).hexdigest()

    if parser.has_section("paths"):
        sec = parser["paths"]
        cfg.reports_path = sec.get("reports", cfg.reports_path)
        if "grids" in sec:
            cfg.grid_paths = [p.strip() for p in sec["grids"].split(",") if p.strip()]
        cfg.out_dir = sec.get("out_dir", cfg.out_dir)

    if parser.has_section("report_schema"):
        cfg.report_schema = dict(parser["report_schema"])

    if parser.has_section("timezone"):
        cfg.tz_policy = parser["timezone"].get("policy", cfg.tz_policy)

    if parser.has_section("pipeline"):
        sec = parser["pipeline"]
        if "steps" in sec:
            cfg.pipeline_steps = [s.strip() for s in sec["steps"].split(",") if s.strip()]
        cfg.missing_threshold = sec.getfloat("missing_threshold", cfg.missing_threshold)
        cfg.outlier_method = sec.get("outlier_method", cfg.outlier_method)
        cfg.outlier_k = sec.getfloat("outlier_k", cfg.outlier_k)
        cfg.min_fuel = sec.getfloat("min_fuel", cfg.min_fuel)
        cfg.min_speed = sec.getfloat("min_speed", cfg.min_speed)
        cfg.daily_average = sec.getboolean("daily_average", cfg.daily_average)
        if "redundant" in sec:
            cfg.redundant = [s.strip() for s in sec["redundant"].split(",") if s.strip()]

    if parser.has_section("cv"):
        cfg.k = parser["cv"].getint("k", cfg.k)
        cfg.seed = parser["cv"].getint("seed", cfg.seed)
        cfg.objective = parser["cv"].get("objective", cfg.objective)

    if parser.has_section("models"):
        for key, raw in parser["models"].items():
            family, _, name = key.partition(".")
            if family not in cfg.model_params or not name:
                raise ConfigError(f"bad model option {key!r} (want family.param)")
            cfg.model_params[family][name] = _parse_scalar(raw)

    for family in list(cfg.hyper_grids):
        section = f"grid.{family}"
        if parser.has_section(section):
            cfg.hyper_grids[family] = {name: _parse_list(raw)
                                       for name, raw in parser[section].items()}

    if parser.has_section("synth"):
        for key, raw in parser["synth"].items():
            cfg.synth[key] = _parse_scalar(raw)

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.k < 2:
        raise ConfigError(f"cv k must be >= 2, got {cfg.k}")
    if cfg.objective not in ("r2", "rmse"):
        raise ConfigError(f"objective must be r2 or rmse, got {cfg.objective!r}")
    if cfg.outlier_method not in ("iqr", "zscore"):
        raise ConfigError(f"outlier method must be iqr or zscore, got {cfg.outlier_method!r}")


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    """Fold parsed CLI flags into the config; flags win over file values."""
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        updates["k"] = args.k
    if getattr(args, "objective", None) is not None:
        updates["objective"] = args.objective
    if getattr(args, "min_fuel", None) is not None:
        updates["min_fuel"] = args.min_fuel
    if getattr(args, "reports", None):
        updates["reports_path"] = args.reports
    if getattr(args, "grids", None):
        updates["grid_paths"] = [p.strip() for p in args.grids.split(",") if p.strip()]
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "outlier", None):
        method, _, k = args.outlier.partition(":")
        if method not in ("iqr", "zscore"):
            raise ConfigError(f"--outlier wants iqr:<k> or zscore:<k>, got {args.outlier!r}")
        updates["outlier_method"] = method
        if k:
            updates["outlier_k"] = float(k)
    cfg = replace(cfg, **updates)
    _validate(cfg)
    if updates:
        digest_src = cfg.source_digest + "|" + json.dumps(
            {k: str(v) for k, v in sorted(updates.items())}, sort_keys=True)
        cfg.source_digest = hashlib.sha256(digest_src.encode()).hexdigest()
    return cfg
