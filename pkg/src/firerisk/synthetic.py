"""Synthetic NFIRS-shaped corpus with known ground truth.

Occurrence counts follow a log-additive rate (intercept + state effect +
per-covariate effect functions); consequence classes are drawn from a
configured softmax of categorical and numeric effects and then rendered
into the raw fields (spread code, injury counts, loss dollars) that the
target derivation consumes.
"""

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError
from .geo import MONTH_SEASON, STATE_FIPS
from .ingest import CPI_U, SEVERITIES, SPREAD_LEVELS, CpiTable

VOCAB = {
    "property_use": ["1 or 2 family dwelling", "multifamily dwelling", "office", "warehouse",
                     "mercantile", "manufacturing", "school", "restaurant"],
    "ignition_cause": ["unintentional", "failure of equipment", "intentional", "act of nature",
                       "undetermined"],
    "fire_origin_location": ["kitchen", "bedroom", "living room", "storage area", "garage",
                             "attic", "assembly area", "technical processing area"],
    "first_ignited_item": ["cooking materials", "furniture", "electrical wire", "bedding",
                           "trash", "structural member", "flammable liquid"],
    "first_ignited_material": ["wood", "plastic", "fabric", "paper", "flammable liquid",
                               "gas", "structural component"],
    "heat_source": ["electrical arcing", "open flame", "hot object", "smoking material",
                    "radiated heat", "multiple heat sources"],
    "ignition_factor": ["electrical failure", "heat source too close", "misuse of material",
                        "mechanical failure", "abandoned material", "none"],
    "human_factor": ["none", "asleep", "unattended person", "impaired by alcohol or drugs",
                     "age was a factor", "physically disabled"],
    "primary_action": ["extinguishment", "search and rescue", "ventilate",
                       "salvage and overhaul", "investigate"],
    "growth_factor": ["none", "delayed detection", "trouble finding location",
                      "building construction", "lack of water supply"],
    "detector_present": ["present", "absent", "unknown"],
    "aes_present": ["absent", "present", "unknown"],
}
_PRESENCE_WEIGHTS = {"detector_present": [0.6, 0.3, 0.1], "aes_present": [0.8, 0.08, 0.12]}

# Uniform generating ranges for county-level ratios.
RATIO_RANGES = {
    "black_ratio": (0.0, 0.5),
    "senior_ratio": (0.10, 0.30),
    "bachelor_ratio": (0.10, 0.50),
    "urban_ratio": (0.10, 1.00),
    "occupied_ratio": (0.75, 0.97),
    "built_after_1980_ratio": (0.30, 0.80),
    "transport_storage_ratio": (0.02, 0.10),
    "industrial_ratio": (0.05, 0.25),
}
# (center, scale) used to standardize covariates inside effect functions.
COVARIATE_REF = {
    name: ((lo + hi) / 2, (hi - lo) / math.sqrt(12)) for name, (lo, hi) in RATIO_RANGES.items()
}
COVARIATE_REF.update({"monthly_avg_temp": (12.5, 9.0), "palmer_z": (0.0, 1.5)})

N_CLASSES = {"spread": 4, "injury": 3, "loss": 3}

DEFAULT_SYNTHETIC = {
    "states": ["AL", "GA", "TX", "IL", "KS", "OH", "NY", "PA", "CA", "WA"],
    "counties_per_state": 6,
    "zips_per_county": 3,
    "years": [2021, 2022],
    "units_range": [30000, 250000],
    "incidents_per_county_month": 8.0,
    "hourly_weather_coverage": 0.95,
    "occurrence": {
        "state_effects": {"KS": 0.3, "OH": 0.2, "CA": -0.3, "WA": -0.2},
        "effects": {
            "bachelor_ratio": {"shape": "linear", "scale": -0.25},
            "senior_ratio": {"shape": "linear", "scale": 0.15},
            "urban_ratio": {"shape": "linear", "scale": -0.2},
            "monthly_avg_temp": {"shape": "linear", "scale": -0.3},
            "palmer_z": {"shape": "linear", "scale": -0.1},
            "transport_storage_ratio": {"shape": "sin", "scale": 0.15},
        },
    },
    "consequences": {
        "spread": {
            "base": [0.8, 0.0, -0.1, -0.9],
            "categorical": {
                "fire_origin_location": {"storage area": [-1.0, 0.0, 0.6, 1.2],
                                         "kitchen": [0.9, 0.0, -0.5, -0.9]},
                "detector_present": {"absent": [-0.7, 0.0, 0.4, 0.8]},
                "aes_present": {"present": [1.2, 0.0, -0.6, -1.2]},
                "first_ignited_material": {"structural component": [-1.0, 0.0, 0.5, 1.0]},
                "heat_source": {"multiple heat sources": [-0.8, 0.0, 0.4, 0.8]},
            },
            "numeric": {
                "relative_humidity": {"center": 60.0, "scale": 18.0, "coef": [0.5, 0.0, -0.25, -0.5]},
                "response_minutes": {"center": 6.0, "scale": 3.5, "coef": [-0.4, 0.0, 0.2, 0.4]},
            },
        },
        "injury": {
            "base": [0.4, 0.0, -0.6],
            "categorical": {
                "human_factor": {"asleep": [-0.9, 0.0, 0.9], "physically disabled": [-1.2, 0.0, 1.2]},
                "fire_origin_location": {"assembly area": [-0.8, 0.0, 0.8],
                                         "bedroom": [-0.4, 0.0, 0.4]},
                "detector_present": {"absent": [-0.6, 0.0, 0.6]},
                "state": {"NY": [-0.5, 0.0, 0.5]},
            },
            "numeric": {
                "temperature": {"center": 12.0, "scale": 10.0, "coef": [-0.3, 0.0, 0.3]},
                "black_ratio": {"center": 0.25, "scale": 0.14, "coef": [-0.3, 0.0, 0.3]},
            },
        },
        "loss": {
            "base": [0.3, 0.0, -0.4],
            "categorical": {
                "fire_origin_location": {"technical processing area": [-1.2, 0.0, 1.2],
                                         "storage area": [-0.6, 0.0, 0.6]},
                "property_use": {"warehouse": [-0.9, 0.0, 0.9], "manufacturing": [-0.7, 0.0, 0.7],
                                 "1 or 2 family dwelling": [0.4, 0.0, -0.4]},
            },
            "numeric": {
                "median_rent_usd": {"center": 1100.0, "scale": 350.0, "coef": [-0.6, 0.0, 0.6]},
                "median_income_usd": {"center": 62000.0, "scale": 18000.0, "coef": [-0.3, 0.0, 0.3]},
            },
        },
    },
}

# 2022-dollar medians of total loss per latent loss class.
_LOSS_MEDIANS = (900.0, 12000.0, 140000.0)


@dataclass
class SyntheticCorpus:
    incidents: pd.DataFrame
    zip_factors: pd.DataFrame
    county_factors: pd.DataFrame
    weather_hourly: pd.DataFrame
    cpi: CpiTable
    latent: pd.DataFrame
    config: dict = field(default_factory=dict)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in (
                "effects", "state_effects", "consequences"):
            out[key] = _merge(out[key], value)
        elif key == "consequences" and isinstance(value, dict):
            out[key] = {**out[key], **copy.deepcopy(value)}
        else:
            out[key] = copy.deepcopy(value)
    return out


def effect_value(spec, z):
    """Evaluate one configured occurrence effect on a standardized covariate."""
    shape = spec.get("shape", "linear")
    s = float(spec.get("scale", 0.0))
    if shape == "flat":
        return np.zeros_like(z)
    if shape == "linear":
        return s * z
    if shape == "sin":
        return s * np.sin(np.pi * z / 2)
    if shape == "quadratic":
        return s * (z ** 2 - 1)
    raise ConfigError(f"unknown effect shape {shape!r}")


def validate_config(cfg):
    for key in ("counties_per_state", "zips_per_county"):
        if int(cfg[key]) < 1:
            raise ConfigError(f"synthetic.{key} must be >= 1")
    unknown = [s for s in cfg["states"] if s not in STATE_FIPS]
    if unknown:
        raise ConfigError(f"unknown states in synthetic config: {unknown}")
    for y in cfg["years"]:
        if int(y) not in CPI_U:
            raise ConfigError(f"no built-in CPI for synthetic year {y}")
    if float(cfg["incidents_per_county_month"]) <= 0:
        raise ConfigError("incidents_per_county_month must be positive")
    for name, spec in cfg["occurrence"].get("effects", {}).items():
        if name not in COVARIATE_REF:
            raise ConfigError(f"occurrence effect on unknown covariate {name!r}")
        effect_value(spec, np.zeros(1))
    for target, spec in cfg["consequences"].items():
        if target not in N_CLASSES:
            raise ConfigError(f"unknown consequence target {target!r}")
        k = N_CLASSES[target]
        if "probs" in spec:
            p = np.asarray(spec["probs"], dtype=float)
            if p.shape != (k,) or (p < 0).any() or abs(p.sum() - 1) > 1e-9:
                raise ConfigError(f"{target}.probs must be {k} non-negative values summing to 1")
            continue
        if len(spec.get("base", [0] * k)) != k:
            raise ConfigError(f"{target}.base must have {k} entries")
        for feat, levels in spec.get("categorical", {}).items():
            for lvl, vec in levels.items():
                if len(vec) != k:
                    raise ConfigError(f"{target}.categorical.{feat}.{lvl} must have {k} entries")
        for feat, num in spec.get("numeric", {}).items():
            if len(num["coef"]) != k or float(num.get("scale", 1)) <= 0:
                raise ConfigError(f"{target}.numeric.{feat} needs {k} coefs and a positive scale")


def _class_probs(spec, frame, k):
    n = len(frame)
    if "probs" in spec:
        return np.tile(np.asarray(spec["probs"], dtype=float), (n, 1))
    logits = np.tile(np.asarray(spec.get("base", [0.0] * k), dtype=float), (n, 1))
    for feat, levels in spec.get("categorical", {}).items():
        values = frame[feat].to_numpy()
        for lvl, vec in levels.items():
            logits[values == lvl] += np.asarray(vec, dtype=float)
    for feat, num in spec.get("numeric", {}).items():
        x = frame[feat].to_numpy(dtype=float)
        z = np.nan_to_num((x - num["center"]) / num["scale"])
        logits += np.outer(z, np.asarray(num["coef"], dtype=float))
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def _draw_classes(rng, probs):
    u = rng.random(len(probs))
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    return (u[:, None] > cum).sum(axis=1)


def _injuries(rng, cls):
    n = len(cls)
    counts = {s: np.zeros(n, dtype=int) for s in SEVERITIES}
    mid = cls == 1
    counts["minor"][mid] = rng.integers(1, 4, mid.sum())
    counts["moderate"][mid] = rng.random(mid.sum()) < 0.5
    high = cls == 2
    m = int(high.sum())
    counts["minor"][high] = rng.integers(0, 3, m)
    sev = rng.choice(3, size=m, p=[0.6, 0.25, 0.15])
    for j, name in enumerate(("severe", "critical", "fatal")):
        counts[name][high] = (sev == j).astype(int)
    return counts


def generate_synthetic(config=None, seed=0):
    """Build a deterministic synthetic corpus.

    Parameters
    ----------
    config : dict, optional
        Overrides merged over :data:`DEFAULT_SYNTHETIC`.
    seed : int
        Seed for every random draw; equal seeds give identical tables.

    Returns
    -------
    SyntheticCorpus
    """
    cfg = _merge(DEFAULT_SYNTHETIC, config)
    validate_config(cfg)
    rng = np.random.default_rng(seed)
    years = [int(y) for y in cfg["years"]]

    counties = []
    for state in cfg["states"]:
        for c in range(int(cfg["counties_per_state"])):
            fips = STATE_FIPS[state] + f"{2 * c + 1:03d}"
            counties.append((state, fips))
    n_cty = len(counties)
    n_zip = int(cfg["zips_per_county"])
    zips = {fips: [f"{(i * n_zip + j) % 99000 + 1000:05d}" for j in range(n_zip)]
            for i, (_, fips) in enumerate(counties)}

    ratios = {name: rng.uniform(lo, hi, n_cty) for name, (lo, hi) in RATIO_RANGES.items()}
    base_temp = rng.uniform(6.0, 19.0, n_cty)
    lo_u, hi_u = cfg["units_range"]
    units0 = rng.integers(int(lo_u), int(hi_u) + 1, n_cty)
    rent_base = rng.lognormal(np.log(1100), 0.25, n_cty)
    income_base = rng.lognormal(np.log(62000), 0.25, n_cty)

    occ = cfg["occurrence"]
    intercept = math.log(float(cfg["incidents_per_county_month"]) * 1e5 / units0.mean())
    state_eff = {s: float(occ.get("state_effects", {}).get(s, 0.0)) for s in cfg["states"]}

    county_rows = []
    for i, (state, fips) in enumerate(counties):
        for y_i, year in enumerate(years):
            units = int(round(units0[i] * 1.01 ** y_i))
            for month in range(1, 13):
                row = {"geo_id": fips, "year": year, "month": month}
                for name in RATIO_RANGES:
                    lo, hi = RATIO_RANGES[name]
                    row[name] = float(np.clip(ratios[name][i], 0.0, 1.0))
                row["monthly_avg_temp"] = base_temp[i] - 10.0 * math.cos(2 * math.pi * (month - 1) / 12) \
                    + rng.normal(0, 1.5)
                row["palmer_z"] = rng.normal(0.0, 1.5)
                row["building_units"] = units
                county_rows.append(row)
    county_factors = pd.DataFrame(county_rows)

    # occurrence
    eta = np.full(len(county_factors), intercept)
    eta += county_factors["geo_id"].map(dict((f, state_eff[s]) for s, f in counties)).to_numpy()
    seasons = county_factors["month"].map(MONTH_SEASON).to_numpy()
    for name, spec in occ.get("effects", {}).items():
        center, scale = COVARIATE_REF[name]
        z = (county_factors[name].to_numpy() - center) / scale
        f = effect_value(spec, z)
        if spec.get("seasons"):
            f = np.where(np.isin(seasons, list(spec["seasons"])), f, 0.0)
        eta += f
    expected = np.exp(eta) * county_factors["building_units"].to_numpy() / 1e5
    counts = rng.poisson(expected)

    zip_rows = []
    for i, (state, fips) in enumerate(counties):
        for z_j, zc in enumerate(zips[fips]):
            jitter = rng.normal(0, 0.01, len(RATIO_RANGES))
            rent = rent_base[i] * rng.lognormal(0, 0.1)
            income = income_base[i] * rng.lognormal(0, 0.1)
            for y_i, year in enumerate(years):
                row = {"geo_id": zc, "year": year}
                for (name, (lo, hi)), eps in zip(RATIO_RANGES.items(), jitter):
                    row[name] = float(np.clip(ratios[name][i] + eps * (hi - lo), 0.0, 1.0))
                row["median_rent_usd"] = round(rent * 1.03 ** y_i, 2)
                row["median_income_usd"] = round(income * 1.02 ** y_i, 2)
                row["building_units"] = int(units0[i] // n_zip)
                zip_rows.append(row)
    zip_factors = pd.DataFrame(zip_rows)

    # incidents
    cf = county_factors.assign(count=counts)
    cf = cf[cf["count"] > 0]
    n = int(cf["count"].sum())
    rep = np.repeat(np.arange(len(cf)), cf["count"].to_numpy())
    fips_arr = cf["geo_id"].to_numpy()[rep]
    year_arr = cf["year"].to_numpy()[rep]
    month_arr = cf["month"].to_numpy()[rep]
    state_of = {f: s for s, f in counties}
    days_in = np.array([pd.Timestamp(int(y), int(m), 1).days_in_month
                        for y, m in zip(year_arr, month_arr)])
    day = (rng.random(n) * days_in).astype(int) + 1
    hour_p = np.array([3, 2, 2, 2, 2, 3, 4, 4, 4, 4, 4, 4, 5, 5, 5, 5, 5, 6, 7, 7, 6, 5, 4, 3], float)
    hour = rng.choice(24, size=n, p=hour_p / hour_p.sum())
    ts = pd.to_datetime(dict(year=year_arr, month=month_arr, day=day, hour=hour))
    zip_arr = np.array([zips[f][k] for f, k in zip(fips_arr, rng.integers(0, n_zip, n))])

    inc = pd.DataFrame({
        "incident_id": [f"SYN{i:07d}" for i in range(n)],
        "state": [state_of[f] for f in fips_arr],
        "county_fips": fips_arr,
        "zip": zip_arr,
        "timestamp": ts,
        "incident_year": year_arr.astype(int),
    })
    for name, levels in VOCAB.items():
        w = _PRESENCE_WEIGHTS.get(name)
        if w is None:
            w = 0.75 ** np.arange(len(levels))
        w = np.asarray(w, float) / np.sum(w)
        inc[name] = np.asarray(levels, dtype=object)[rng.choice(len(levels), size=n, p=w)]
    inc["stories_above"] = 1 + rng.poisson(1.0, n)
    inc["stories_below"] = (rng.random(n) < 0.3).astype(int)
    inc["total_sqft"] = np.round(rng.lognormal(np.log(1800), 0.6, n))
    inc["response_minutes"] = np.round(rng.gamma(3.0, 2.0, n), 1)

    # weather at incident hours
    keys = inc[["zip", "timestamp"]].drop_duplicates().sort_values(["zip", "timestamp"])
    keys = keys.reset_index(drop=True)
    kmonth = keys["timestamp"].dt.month.to_numpy()
    ktemp = county_factors.set_index(["geo_id", "year", "month"])["monthly_avg_temp"]
    zip_county = {zc: f for f, zl in zips.items() for zc in zl}
    base = ktemp.reindex(list(zip([zip_county[z] for z in keys["zip"]],
                                  keys["timestamp"].dt.year, kmonth))).to_numpy()
    m = len(keys)
    weather = keys.rename(columns={"zip": "geo_id", "timestamp": "datetime"})
    weather["temperature"] = np.round(base + rng.normal(0, 4.0, m), 2)
    weather["relative_humidity"] = np.round(np.clip(rng.normal(60, 18, m), 5, 100), 1)
    weather["wind_speed"] = np.round(rng.gamma(2.0, 2.5, m), 2)
    weather["precipitation"] = np.round(np.where(rng.random(m) < 0.2, rng.gamma(1.0, 1.5, m), 0.0), 2)
    keep = rng.random(m) < float(cfg["hourly_weather_coverage"])
    weather_hourly = weather[keep].reset_index(drop=True)

    # features used by the consequence generator
    feat = inc.merge(weather, how="left", left_on=["zip", "timestamp"],
                     right_on=["geo_id", "datetime"]).drop(columns=["geo_id", "datetime"])
    feat = feat.merge(zip_factors, how="left", left_on=["zip", "incident_year"],
                      right_on=["geo_id", "year"])

    latent = pd.DataFrame({"incident_id": inc["incident_id"]})
    for target, k in N_CLASSES.items():
        spec = cfg["consequences"].get(target, {"probs": [1.0 / k] * k})
        latent[target] = _draw_classes(rng, _class_probs(spec, feat, k))

    inc["spread_code"] = np.asarray(SPREAD_LEVELS, dtype=object)[latent["spread"].to_numpy()]
    inj = _injuries(rng, latent["injury"].to_numpy())
    for s in SEVERITIES:
        inc[f"injuries_{s}"] = inj[s]
    medians = np.asarray(_LOSS_MEDIANS)[latent["loss"].to_numpy()]
    total_2022 = rng.lognormal(np.log(medians), 0.6)
    deflate = np.array([1.0 / CPI_U.factor(y) for y in year_arr])
    total = total_2022 * deflate
    share = rng.uniform(0.55, 0.85, n)
    inc["property_loss_usd"] = np.round(total * share, 2)
    inc["content_loss_usd"] = np.round(total * (1 - share), 2)

    order = ["incident_id", "state", "county_fips", "zip", "timestamp", "incident_year",
             "property_use", "stories_above", "stories_below", "total_sqft",
             "detector_present", "aes_present", "ignition_cause", "fire_origin_location",
             "first_ignited_item", "first_ignited_material", "heat_source", "ignition_factor",
             "human_factor", "primary_action", "growth_factor", "response_minutes",
             "spread_code", *[f"injuries_{s}" for s in SEVERITIES],
             "property_loss_usd", "content_loss_usd"]
    inc = inc[order]
    cpi = CpiTable({y: v for y, v in CPI_U.values.items()})
    return SyntheticCorpus(inc, zip_factors, county_factors, weather_hourly, cpi, latent, cfg)
