"""Loading, validation and joining of incident and geo-level tables."""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import CpiLookupError, JoinError, LoadError, SchemaError
from .geo import STATE_FIPS

logger = logging.getLogger(__name__)

SEVERITIES = ("minor", "moderate", "severe", "critical", "fatal")
INJURY_COLUMNS = tuple(f"injuries_{s}" for s in SEVERITIES)

# Retained NFIRS spread levels, keyed by every accepted spelling.
SPREAD_LEVELS = (
    "confined to the room of origin",
    "confined to the floor of origin",
    "confined to the building of origin",
    "extending beyond the building of origin",
)
OBJECT_CONFINED = "confined to object of origin"
_SPREAD_ALIASES = {
    "1": OBJECT_CONFINED,
    "confined to object of origin": OBJECT_CONFINED,
    "confined to the object of origin": OBJECT_CONFINED,
    "2": SPREAD_LEVELS[0],
    "confined to room of origin": SPREAD_LEVELS[0],
    "3": SPREAD_LEVELS[1],
    "confined to floor of origin": SPREAD_LEVELS[1],
    "4": SPREAD_LEVELS[2],
    "confined to building of origin": SPREAD_LEVELS[2],
    "5": SPREAD_LEVELS[3],
    "beyond building of origin": SPREAD_LEVELS[3],
    "extends beyond building of origin": SPREAD_LEVELS[3],
}
_SPREAD_ALIASES.update({s: s for s in SPREAD_LEVELS})

CATEGORICAL_FIELDS = (
    "property_use", "ignition_cause", "fire_origin_location", "first_ignited_item",
    "first_ignited_material", "heat_source", "ignition_factor", "human_factor",
    "primary_action", "growth_factor",
)
PRESENCE_FIELDS = ("detector_present", "aes_present")
OPTIONAL_NUMERIC = ("stories_above", "stories_below", "total_sqft", "response_minutes")

REQUIRED_COLUMNS = (
    "incident_id", "state", "county_fips", "zip", "timestamp", "spread_code",
    *INJURY_COLUMNS, "property_loss_usd", "content_loss_usd", "incident_year",
)
CANONICAL_COLUMNS = (
    "incident_id", "state", "county_fips", "zip", "timestamp", "incident_year",
    "property_use", "stories_above", "stories_below", "total_sqft",
    "detector_present", "aes_present", *CATEGORICAL_FIELDS[1:], "response_minutes",
    "spread_code", *INJURY_COLUMNS, "property_loss_usd", "content_loss_usd",
)

UNKNOWN = "unknown"
_PRESENT = {"1", "present", "yes", "y", "true", "t"}
_ABSENT = {"0", "n", "no", "none", "absent", "false", "f", "none present"}

FAIL_FRACTION = 0.5


def normalize_spread(code):
    """Canonical spread text for any accepted spelling, or None."""
    if code is None or (isinstance(code, float) and np.isnan(code)):
        return None
    return _SPREAD_ALIASES.get(str(code).strip().lower())


@dataclass
class LoadReport:
    rows_in: int = 0
    rows_kept: int = 0
    rejects: Counter = field(default_factory=Counter)

    def to_dict(self):
        return {
            "rows_in": int(self.rows_in),
            "rows_kept": int(self.rows_kept),
            "rejects": {k: int(v) for k, v in sorted(self.rejects.items())},
        }

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


class CpiTable:
    """Consumer price index by year; must contain 2022."""

    def __init__(self, values):
        self.values = {int(k): float(v) for k, v in dict(values).items()}
        if 2022 not in self.values:
            raise CpiLookupError("CPI table must contain 2022")
        bad = [y for y, v in self.values.items() if not v > 0]
        if bad:
            raise CpiLookupError(f"CPI values must be positive; bad years: {sorted(bad)}")

    @classmethod
    def from_csv(cls, path):
        df = pd.read_csv(path)
        if not {"year", "cpi"} <= set(df.columns):
            raise SchemaError(f"{path}: CPI table needs columns 'year' and 'cpi'")
        return cls(zip(df["year"], df["cpi"]))

    def to_frame(self):
        return pd.DataFrame(sorted(self.values.items()), columns=["year", "cpi"])

    def factor(self, year):
        try:
            return self.values[2022] / self.values[int(year)]
        except KeyError:
            raise CpiLookupError(f"CPI table has no entry for year {year}") from None

    def __contains__(self, year):
        return int(year) in self.values


# Annual-average CPI-U (all items, U.S. city average).
CPI_U = CpiTable({
    2012: 229.594, 2013: 232.957, 2014: 236.736, 2015: 237.017, 2016: 240.007,
    2017: 245.120, 2018: 251.107, 2019: 255.657, 2020: 258.811, 2021: 270.970,
    2022: 292.655,
})


def adjust_to_2022(amount, year, cpi):
    """Convert incident-year dollars to 2022 dollars.

    Works elementwise when ``amount`` and ``year`` are arrays.
    """
    if np.ndim(year) == 0:
        return amount * cpi.factor(year)
    years = np.asarray(year)
    factors = np.array([cpi.factor(y) for y in years], dtype=float)
    return np.asarray(amount, dtype=float) * factors


def _as_digits(series, width):
    s = series.fillna("").astype(str).str.strip()
    s = s.str.replace(r"\.0$", "", regex=True)
    short = s.str.fullmatch(r"\d+") & (s.str.len() < width)
    return s.where(~short, s.str.zfill(width))


def _presence(series):
    s = series.fillna("").astype(str).str.strip().str.lower()
    out = pd.Series(UNKNOWN, index=series.index, dtype=object)
    out[s.isin(_PRESENT)] = "present"
    out[s.isin(_ABSENT)] = "absent"
    return out


def _category(series, known=None):
    s = series.fillna("").astype(str).str.strip()
    s = s.where(s != "", UNKNOWN)
    if known is not None:
        known = {str(k) for k in known}
        s = s.where(s.isin(known), UNKNOWN)
    return s


def validate_incidents(raw, filters=None, categories=None):
    """Validate a frame already in canonical column names.

    Returns ``(table, report)``.  Rows failing a parse or invariant check are
    counted under their reason; rows removed by the building-fire filters
    are counted under ``filtered: ...`` reasons.
    """
    filters = filters or {}
    categories = categories or {}
    missing = [c for c in REQUIRED_COLUMNS if c not in raw.columns]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")

    n = len(raw)
    df = pd.DataFrame(index=raw.index)
    reason = pd.Series(None, index=raw.index, dtype=object)

    def flag(mask, why):
        mask = mask & reason.isna()
        reason[mask] = why

    def text(col):
        return raw[col].fillna("").astype(str).str.strip()

    df["incident_id"] = text("incident_id")
    df["state"] = text("state").str.upper()
    df["county_fips"] = _as_digits(raw["county_fips"], 5)
    df["zip"] = _as_digits(raw["zip"], 5)

    ts_text = text("timestamp")
    ts = pd.to_datetime(ts_text, errors="coerce", format="mixed")
    flag(ts.isna(), "unparseable timestamp")
    df["timestamp"] = ts.dt.floor("h")

    year = pd.to_numeric(text("incident_year"), errors="coerce")
    flag(year.isna() | (year != year.round()), "unparseable incident_year")

    for col in (*INJURY_COLUMNS, "property_loss_usd", "content_loss_usd"):
        t = text(col)
        v = pd.to_numeric(t.where(t != "", "0"), errors="coerce")
        flag(v.isna(), f"unparseable {col}")
        df[col] = v
    for col in OPTIONAL_NUMERIC:
        if col in raw.columns:
            t = text(col)
            v = pd.to_numeric(t.where(t != ""), errors="coerce")
            flag(v.isna() & (t != ""), f"unparseable {col}")
        else:
            v = pd.Series(np.nan, index=raw.index)
        df[col] = v

    flag(df["incident_id"] == "", "missing incident_id")
    flag(~df["state"].isin(list(STATE_FIPS)), "unknown state")
    flag(~df["county_fips"].str.fullmatch(r"\d{5}"), "invalid county_fips")
    flag((df["zip"] != "") & ~df["zip"].str.fullmatch(r"\d{5}"), "invalid zip")

    dollars = df[["property_loss_usd", "content_loss_usd"]]
    flag((dollars < 0).any(axis=1), "negative dollars")
    counts = df[list(INJURY_COLUMNS) + ["stories_above", "stories_below"]]
    flag((counts < 0).any(axis=1), "negative count")
    flag((df[list(INJURY_COLUMNS)] % 1 != 0).any(axis=1), "non-integer count")
    flag((df[["total_sqft", "response_minutes"]] < 0).any(axis=1), "negative value")

    prefix = df["state"].map(STATE_FIPS)
    flag(prefix.notna() & (df["county_fips"].str[:2] != prefix), "county/state mismatch")
    flag(ts.notna() & year.notna() & (ts.dt.year != year), "timestamp year mismatch")

    spread = raw["spread_code"].map(normalize_spread)
    flag(spread.isna(), "unknown spread_code")
    failed = int(reason.notna().sum())

    excluded = {normalize_spread(c) or str(c).strip().lower()
                for c in filters.get("excluded_spread") or ()}
    flag(spread.isin(excluded), "filtered: confined to object of origin")
    allowed_use = filters.get("property_use")
    use = _category(raw["property_use"]) if "property_use" in raw.columns else None
    if allowed_use is not None and use is not None:
        flag(~use.isin({str(u) for u in allowed_use}), "filtered: property use")

    if n and failed / n > FAIL_FRACTION:
        top = reason.value_counts().head(3).to_dict()
        raise LoadError(f"{failed} of {n} rows failed validation (> 50%); top reasons: {top}")

    df["incident_year"] = year
    df["spread_code"] = spread
    for col in CATEGORICAL_FIELDS:
        if col in raw.columns:
            df[col] = _category(raw[col], categories.get(col))
        else:
            df[col] = UNKNOWN
    for col in PRESENCE_FIELDS:
        df[col] = _presence(raw[col]) if col in raw.columns else UNKNOWN

    keep = reason.isna()
    out = df.loc[keep, list(CANONICAL_COLUMNS)].reset_index(drop=True)
    out["incident_year"] = out["incident_year"].astype(int)
    for col in INJURY_COLUMNS:
        out[col] = out[col].astype(int)

    report = LoadReport(rows_in=n, rows_kept=int(keep.sum()),
                        rejects=Counter(reason.dropna().tolist()))
    return out, report


def load_incidents(path, schema=None, filters=None, categories=None):
    """Read an incidents CSV, map its columns and validate every row.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV with a header row.
    schema : dict, optional
        Canonical field name -> column name in the file.  Unlisted fields are
        looked up under their canonical name.
    filters : dict, optional
        ``excluded_spread`` codes and an optional ``property_use`` allow-list.
    categories : dict, optional
        Known code lists per categorical field.

    Returns
    -------
    (DataFrame, LoadReport)
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"incidents file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    rename = {src: canon for canon, src in (schema or {}).items() if src in raw.columns}
    raw = raw.rename(columns=rename)
    table, report = validate_incidents(raw, filters=filters, categories=categories)
    logger.info("loaded %d of %d incidents from %s", report.rows_kept, report.rows_in, path)
    return table, report


def _check_unique(df, keys, name):
    if df.duplicated(keys).any():
        dup = df.loc[df.duplicated(keys, keep=False), keys].head(3).to_dict("records")
        raise JoinError(f"{name} has duplicate keys, e.g. {dup}")


def join_factors(incidents, zip_factors, county_factors=None, weather_hourly=None):
    """Attach ZIP-year factors, county-month factors and incident-hour weather.

    Every incident is kept.  ``missing_local_factors`` marks incidents with
    no ZIP-year factor row; ``weather_source`` is ``hourly``, ``monthly``
    (fallback to the ZIP's monthly mean) or ``missing``.
    """
    if zip_factors is None or len(zip_factors) == 0:
        raise JoinError("ZIP factor table is empty")
    out = incidents.copy()
    out["timestamp"] = pd.to_datetime(out["timestamp"])
    out["month"] = out["timestamp"].dt.month
    out["hour"] = out["timestamp"].dt.hour

    zf = zip_factors.copy()
    zf["geo_id"] = _as_digits(zf["geo_id"], 5)
    _check_unique(zf, ["geo_id", "year"], "ZIP factor table")
    cols = [c for c in zf.columns if c not in ("geo_id", "year", "month") and c not in out.columns]
    zf = zf[["geo_id", "year", *cols]].assign(_zip_hit=True)
    out = out.merge(zf, how="left", left_on=["zip", "incident_year"],
                    right_on=["geo_id", "year"], validate="m:1").drop(columns=["geo_id", "year"])
    out["missing_local_factors"] = out.pop("_zip_hit").isna()

    if county_factors is not None and len(county_factors):
        cf = county_factors.copy()
        cf["geo_id"] = _as_digits(cf["geo_id"], 5)
        keys = ["geo_id", "year", "month"]
        _check_unique(cf, keys, "county factor table")
        cols = [c for c in cf.columns if c not in keys and c not in out.columns
                and c != "building_units"]
        cf = cf[[*keys, *cols]].rename(columns={"month": "_cmonth"}).assign(_county_hit=True)
        out = out.merge(cf, how="left", left_on=["county_fips", "incident_year", "month"],
                        right_on=["geo_id", "year", "_cmonth"], validate="m:1")
        out = out.drop(columns=["geo_id", "year", "_cmonth"])
        out["missing_county_factors"] = out.pop("_county_hit").isna()

    weather_cols = ["temperature", "relative_humidity", "wind_speed", "precipitation"]
    if weather_hourly is not None and len(weather_hourly):
        wh = weather_hourly.copy()
        wh["geo_id"] = _as_digits(wh["geo_id"], 5)
        wh["datetime"] = pd.to_datetime(wh["datetime"]).dt.floor("h")
        _check_unique(wh, ["geo_id", "datetime"], "hourly weather table")
        weather_cols = [c for c in weather_cols if c in wh.columns]
        hourly = wh[["geo_id", "datetime", *weather_cols]].assign(_w_hit=True)
        out = out.merge(hourly, how="left", left_on=["zip", "timestamp"],
                        right_on=["geo_id", "datetime"], validate="m:1")
        out = out.drop(columns=["geo_id", "datetime"])
        hit = out.pop("_w_hit").notna()

        wh["_y"] = wh["datetime"].dt.year
        wh["_m"] = wh["datetime"].dt.month
        monthly = wh.groupby(["geo_id", "_y", "_m"], sort=True)[weather_cols].mean()
        monthly = monthly.add_suffix("_monthly").reset_index()
        out = out.merge(monthly, how="left", left_on=["zip", "incident_year", "month"],
                        right_on=["geo_id", "_y", "_m"], validate="m:1")
        out = out.drop(columns=["geo_id", "_y", "_m"])
        fallback = out[f"{weather_cols[0]}_monthly"].notna() & ~hit
        for c in weather_cols:
            out[c] = out[c].where(hit, out.pop(f"{c}_monthly"))
        out["weather_source"] = np.where(hit, "hourly", np.where(fallback, "monthly", "missing"))
    else:
        for c in weather_cols:
            out[c] = np.nan
        out["weather_source"] = "missing"

    assert len(out) == len(incidents)
    return out


def read_factor_table(path, level):
    """Read a ZIP- or county-level factor CSV keeping geo ids as strings."""
    df = pd.read_csv(path, dtype={"geo_id": str})
    need = {"geo_id", "year"} | ({"month"} if level == "county" else set())
    missing = need - set(df.columns)
    if missing:
        raise SchemaError(f"{path}: missing column(s) {sorted(missing)}")
    ratios = [c for c in df.columns if c.endswith("_ratio")]
    bad = df[ratios].lt(0).any(axis=1) | df[ratios].gt(1).any(axis=1)
    if bad.any():
        raise SchemaError(f"{path}: ratio outside [0, 1] at row {int(bad.idxmax()) + 2}")
    if "building_units" in df.columns and (df["building_units"] < 0).any():
        raise SchemaError(f"{path}: negative building_units")
    return df


def write_table(df, path):
    """Write a table as CSV with a fixed float format (byte-stable reruns)."""
    out = df.copy()
    for col in out.columns:
        if pd.api.types.is_datetime64_any_dtype(out[col]):
            out[col] = out[col].dt.strftime("%Y-%m-%d %H:%M:%S")
    out.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
