"""County-month fire incidence rates per 100,000 building units."""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import RateError
from .geo import state_of_county

PER_UNITS = 100_000


def county_month_rates(incidents, units, min_count=3):
    """Aggregate incidents into county-month rates.

    Parameters
    ----------
    incidents : DataFrame
        Needs ``county_fips``, ``incident_year`` and ``timestamp`` (or ``month``).
    units : DataFrame
        County factor rows with ``geo_id``, ``year``, ``building_units`` and
        optionally ``month``.  The row for the incident year (and month, when
        present) supplies the denominator.
    min_count : int
        County-months with fewer incidents are excluded from the output and
        listed in the exclusion report.

    Returns
    -------
    rates : DataFrame
        county_fips, state, year, month, count, units, rate
    report : dict
        ``{"min_count", "n_excluded", "excluded_incidents", "excluded": [...]}``
    """
    inc = incidents
    valid = inc["county_fips"].astype(str).str.fullmatch(r"\d{5}")
    inc = inc[valid]
    month = inc["month"] if "month" in inc else pd.to_datetime(inc["timestamp"]).dt.month
    grouped = (pd.DataFrame({"county_fips": inc["county_fips"].astype(str),
                             "year": inc["incident_year"].astype(int),
                             "month": month.astype(int)})
               .groupby(["county_fips", "year", "month"], sort=True).size()
               .rename("count").reset_index())

    u = units.copy()
    u["geo_id"] = u["geo_id"].astype(str).str.zfill(5)
    if "month" in u.columns:
        keys = ["geo_id", "year", "month"]
        right_keys = ["county_fips", "year", "month"]
    else:
        keys = ["geo_id", "year"]
        right_keys = ["county_fips", "year"]
    u = u.drop_duplicates(keys)[keys + ["building_units"]]
    out = grouped.merge(u.rename(columns={"geo_id": "county_fips"}), how="left", on=right_keys)
    bad = out["building_units"].isna() | (out["building_units"] <= 0)
    if bad.any():
        counties = sorted(out.loc[bad, "county_fips"].unique())
        raise RateError(f"zero or missing building_units for counties: {', '.join(counties)}",
                        counties)
    out = out.rename(columns={"building_units": "units"})
    out["units"] = out["units"].astype(np.int64)
    out["rate"] = PER_UNITS * out["count"] / out["units"]
    out.insert(1, "state", out["county_fips"].map(state_of_county))

    low = out["count"] < min_count
    excluded = out[low]
    report = {
        "min_count": int(min_count),
        "n_excluded": int(low.sum()),
        "excluded_incidents": int(excluded["count"].sum()),
        "excluded": excluded[["county_fips", "year", "month", "count"]].to_dict("records"),
    }
    report["excluded"] = [{k: (int(v) if k != "county_fips" else v) for k, v in r.items()}
                          for r in report["excluded"]]
    return out[~low].reset_index(drop=True), report


def write_report(report, path):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


RATE_COLUMNS = ("county_fips", "state", "year", "month", "count", "units", "rate")


def read_rates(path):
    """Read a rates CSV written by :func:`county_month_rates`.

    Raises
    ------
    RateError
        Missing columns, or a row with an unparseable or non-positive value;
        the message gives the file line number (header is line 1).
    """
    path = Path(path)
    if not path.exists():
        raise RateError(f"rates file not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in RATE_COLUMNS if c not in df.columns]
    if missing:
        raise RateError(f"{path}: missing column(s) {missing}")
    out = df[list(RATE_COLUMNS)].copy()
    for col in ("year", "month", "count", "units", "rate"):
        num = pd.to_numeric(out[col], errors="coerce")
        bad = num.isna() | ~np.isfinite(num) | (num <= 0)
        if col == "month":
            bad |= ~num.between(1, 12)
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise RateError(f"{path}: row {i + 2}: invalid {col} value {out[col].iloc[i]!r}")
        out[col] = num
    for col in ("year", "month", "count", "units"):
        out[col] = out[col].astype(np.int64)
    out["county_fips"] = out["county_fips"].str.zfill(5)
    return out
