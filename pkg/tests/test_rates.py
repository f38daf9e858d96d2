import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from firerisk.errors import RateError
from firerisk.rates import county_month_rates, read_rates


def _incidents(n, fips="01001", month=3, year=2020):
    return pd.DataFrame({"county_fips": [fips] * n, "incident_year": [year] * n,
                         "month": [month] * n})


def _units(u, fips="01001", year=2020):
    return pd.DataFrame({"geo_id": [fips], "year": [year], "building_units": [u]})


def test_rate_per_100k():
    rates, _ = county_month_rates(_incidents(5), _units(50_000))
    assert rates.loc[0, "rate"] == 10.0
    assert rates.loc[0, "state"] == "AL"


def test_low_count_excluded_and_reported():
    inc = pd.concat([_incidents(2, month=1), _incidents(4, month=2)])
    rates, report = county_month_rates(inc, _units(1000))
    assert rates["month"].tolist() == [2]
    assert report["n_excluded"] == 1 and report["excluded_incidents"] == 2
    assert report["excluded"] == [{"county_fips": "01001", "year": 2020, "month": 1, "count": 2}]


def test_empty_month_emits_no_row():
    rates, _ = county_month_rates(_incidents(3, month=5), _units(1000))
    assert rates["month"].tolist() == [5]


def test_missing_units_names_county():
    with pytest.raises(RateError) as info:
        county_month_rates(_incidents(3, fips="01003"), _units(1000))
    assert info.value.counties == ["01003"]


def test_zero_units_rejected():
    with pytest.raises(RateError, match="01001"):
        county_month_rates(_incidents(3), _units(0))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["01001", "01003"]), st.integers(1, 12)), min_size=1, max_size=60))
def test_counts_conserved(keys):
    inc = pd.DataFrame({"county_fips": [k[0] for k in keys], "incident_year": 2020,
                        "month": [k[1] for k in keys]})
    units = pd.DataFrame({"geo_id": ["01001", "01003"], "year": 2020, "building_units": [500, 700]})
    rates, report = county_month_rates(inc, units)
    assert rates["count"].sum() + report["excluded_incidents"] == len(inc)


@given(st.integers(3, 500), st.integers(1000, 10**6))
def test_duplication_doubles_rate(k, u):
    r1, _ = county_month_rates(_incidents(k), _units(u))
    r2, _ = county_month_rates(_incidents(2 * k), _units(u))
    assert r2.loc[0, "rate"] == pytest.approx(2 * r1.loc[0, "rate"], rel=1e-12)


def test_read_rates_roundtrip(tmp_path):
    rates, _ = county_month_rates(_incidents(5), _units(50_000))
    rates.to_csv(tmp_path / "r.csv", index=False)
    back = read_rates(tmp_path / "r.csv")
    pd.testing.assert_frame_equal(back, rates, check_dtype=False)


def test_read_rates_reports_line(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("county_fips,state,year,month,count,units,rate\n"
                    "01001,AL,2020,3,5,50000,10\n"
                    "01001,AL,2020,4,5,50000,oops\n")
    with pytest.raises(RateError, match="row 3"):
        read_rates(path)
