"""Run configuration: YAML file merged over built-in defaults."""

import copy
from pathlib import Path

import yaml

from .errors import ConfigError

INCIDENT_CATEGORICALS = [
    "property_use", "detector_present", "aes_present", "ignition_cause",
    "fire_origin_location", "first_ignited_item", "first_ignited_material",
    "heat_source", "ignition_factor", "human_factor", "primary_action",
    "growth_factor", "state",
]
INCIDENT_NUMERICS = [
    "stories_above", "stories_below", "total_sqft", "response_minutes", "hour", "month",
]
LOCAL_NUMERICS = [
    "black_ratio", "senior_ratio", "bachelor_ratio", "urban_ratio", "occupied_ratio",
    "built_after_1980_ratio", "transport_storage_ratio", "industrial_ratio",
    "median_rent_usd", "median_income_usd", "temperature", "relative_humidity",
    "wind_speed", "precipitation", "monthly_avg_temp", "palmer_z",
]

GAM_COVARIATES = [
    "black_ratio", "senior_ratio", "bachelor_ratio", "urban_ratio", "occupied_ratio",
    "built_after_1980_ratio", "transport_storage_ratio", "industrial_ratio",
    "monthly_avg_temp", "palmer_z",
]


def default_manifest():
    manifest = [{"name": n, "kind": "categorical", "group": "incident"} for n in INCIDENT_CATEGORICALS]
    manifest += [{"name": n, "kind": "numeric", "group": "incident"} for n in INCIDENT_NUMERICS]
    manifest += [{"name": n, "kind": "numeric", "group": "local"} for n in LOCAL_NUMERICS]
    return manifest


DEFAULTS = {
    "seed": 20240101,
    "paths": {
        "incidents": None,
        "zip_factors": None,
        "county_factors": None,
        "weather": None,
        "cpi": None,
        "output_dir": "firerisk-out",
    },
    # canonical field -> column name in the incidents CSV
    "schema": {},
    "filters": {
        "excluded_spread": ["confined to object of origin", "1"],
        "property_use": None,
    },
    # optional known-code lists; values outside a list map to "unknown"
    "categories": {},
    "targets": {
        "cuts": [0.40, 0.75],
        "exclude_zero_injury": False,
        "train_fraction": 0.70,
    },
    "rates": {"min_count": 3},
    "gam": {
        "terms": list(GAM_COVARIATES),
        "k": 10,
        "lambda_grid": {"low": -4.0, "high": 4.0, "n": 25},
        "max_iter": 200,
        "tol": 1.0e-8,
        "stratify": ["season", "region"],
        "pdp_points": 50,
    },
    "firecat": {
        "n_rounds": 200,
        "max_depth": 6,
        "learning_rate": 0.1,
        "prior_weight": 1.0,
        "reg_lambda": 1.0,
        "min_samples_leaf": 20,
        "max_bins": 64,
        "early_stopping_rounds": None,
        "validation_fraction": 0.0,
        "manifest": None,
    },
    "metrics": {
        "average": "macro",
        "wmse_weights": None,
        "taus": [round(0.05 * i, 2) for i in range(21)],
    },
    "explain": {
        "n_rows": 1000,
        "grid_points": 10,
        "pdp_rows": 500,
        "pdp_pairs": [["median_rent_usd", "relative_humidity"]],
    },
    "synthetic": {},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides=None):
    """Read a YAML config and merge it over :data:`DEFAULTS`.

    Relative paths in the ``paths`` section resolve against the config
    file's directory.
    """
    raw = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
        base_dir = path.parent
    cfg = _merge(DEFAULTS, raw)
    cfg = _merge(cfg, overrides)
    for key, value in cfg["paths"].items():
        if value is not None and not Path(value).is_absolute():
            cfg["paths"][key] = str(base_dir / value)
    if cfg.get("seed") is None:
        raise ConfigError("config must define a seed")
    if cfg["firecat"].get("manifest") is None:
        cfg["firecat"]["manifest"] = default_manifest()
    cuts = cfg["targets"]["cuts"]
    if not isinstance(cuts, (list, tuple)) or len(cuts) != 2:
        raise ConfigError(f"targets.cuts must be two quantiles, got {cuts!r}")
    lo, hi = cuts
    if not 0 < lo < hi < 1:
        raise ConfigError(f"quantile cuts must satisfy 0 < lower < upper < 1, got {lo}, {hi}")
    return cfg
