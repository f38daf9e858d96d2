import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from firerisk.errors import FamilyError, RankError
from firerisk.gam import (BasisError, GamFit, ModelSpec, bspline_basis, fit_gam, fit_stratified,
                          partial_dependence, term_significance, uniform_knots)


def gamma_sample(rng, mu, shape=10.0):
    return rng.gamma(shape, mu / shape)


def sin_data(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    f = np.sin(2 * np.pi * x)
    return pd.DataFrame({"x": x, "rate": gamma_sample(rng, np.exp(1.0 + f))}), f


def state_data(n=5000, seed=1):
    rng = np.random.default_rng(seed)
    st_ = rng.choice(["A", "B"], n)
    x = rng.uniform(0, 1, n)
    mu = np.exp(0.5 + 0.5 * (st_ == "B") + 0.3 * x)
    return pd.DataFrame({"state": st_, "x": x, "rate": gamma_sample(rng, mu)})


# --- basis -------------------------------------------------------------------

@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=30))
def test_partition_of_unity(xs):
    knots = uniform_knots(-3, 3, 10)
    B = bspline_basis(np.array(xs), knots)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)


def test_clamped_endpoint():
    knots = np.r_[[0.0] * 4, 0.5, [1.0] * 4]
    B = bspline_basis(np.array([0.0, 1.0]), knots)
    np.testing.assert_allclose(B[0], np.eye(B.shape[1])[0], atol=1e-15)
    np.testing.assert_allclose(B[1], np.eye(B.shape[1])[-1], atol=1e-15)


def test_linear_hats_at_midpoint():
    knots = np.arange(6, dtype=float)
    B = bspline_basis(np.array([2.5]), knots, degree=1)
    nz = B[0][B[0] > 0]
    np.testing.assert_allclose(nz, [0.5, 0.5], atol=1e-15)


def test_outside_domain_raises():
    with pytest.raises(BasisError):
        bspline_basis(np.array([10.0]), uniform_knots(0, 1, 10))


# --- fitting -----------------------------------------------------------------

def test_intercept_only_is_log_mean():
    fit = fit_gam(pd.DataFrame({"rate": [1.0, 2.0, 3.0]}), ModelSpec(terms=[], state_col=None))
    assert fit.intercept == pytest.approx(math.log(2), abs=1e-6)


def test_sin_recovery():
    data, f = sin_data()
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None))
    eff = fit.term("x").effect(data["x"].to_numpy())
    truth = f - f.mean()
    rmse = np.sqrt(np.mean((eff - eff.mean() - truth) ** 2))
    assert rmse < 0.1
    assert fit.convergence["converged"]


def test_state_effect_recovery():
    fit = fit_gam(state_data(), ModelSpec(terms=["x"]))
    assert fit.reference_state == "A"
    assert fit.state_effects["A"] == 0.0
    assert 0.4 <= fit.state_effects["B"] <= 0.6


def test_deviance_trace_non_increasing():
    data, _ = sin_data(600, seed=3)
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None))
    pen = np.array(fit.convergence["penalized_deviance"])
    dev = fit.convergence["deviance"]
    assert np.all(np.diff(pen) <= 1e-9 * np.abs(pen[:-1]))
    assert dev[-1] <= dev[0]


def test_fitted_means_positive():
    data, _ = sin_data(400, seed=4)
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None))
    assert np.all(fit.predict(data) > 0)


def test_linear_truth_monotone_curve():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, 1500)
    data = pd.DataFrame({"x": x, "rate": gamma_sample(rng, np.exp(1 + x))})
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None))
    curve = partial_dependence(fit, "x", np.linspace(0.05, 0.95, 20))
    assert np.all(np.diff(curve["effect"]) > -0.02)


def test_effect_near_zero_at_mean():
    data, _ = sin_data(1000, seed=6)
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None))
    eff = fit.term("x").effect(data["x"].to_numpy())
    assert abs(eff.mean()) < 1e-8


def test_single_point_grid():
    data, _ = sin_data(300, seed=7)
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None))
    assert len(partial_dependence(fit, "x", [0.5])) == 1


def test_heavy_penalty_gives_straight_line():
    data, _ = sin_data(800, seed=8)
    fit = fit_gam(data, ModelSpec(terms=["x"], state_col=None, fixed_lambda={"x": 1e8}))
    g = np.linspace(0.02, 0.98, 25)
    eff = partial_dependence(fit, "x", g)["effect"].to_numpy()
    resid = eff - np.polyval(np.polyfit(g, eff, 1), g)
    assert np.max(np.abs(resid)) < 1e-3


@pytest.mark.parametrize("y", [[1.0, 0.0, 2.0], [1.0, -1.0, 2.0], [1.0, np.nan, 2.0]])
def test_non_positive_response_rejected(y):
    with pytest.raises(FamilyError):
        fit_gam(pd.DataFrame({"rate": y}), ModelSpec(terms=[], state_col=None))


def test_constant_covariate_names_term():
    data = pd.DataFrame({"c": [1.0] * 30, "rate": np.linspace(1, 2, 30)})
    with pytest.raises(RankError) as info:
        fit_gam(data, ModelSpec(terms=["c"], state_col=None))
    assert info.value.term == "c"


def test_json_roundtrip_predicts_identically():
    data = state_data(800, seed=9)
    fit = fit_gam(data, ModelSpec(terms=["x"]))
    import json
    back = GamFit.from_dict(json.loads(fit.to_json()))
    np.testing.assert_array_equal(back.predict(data), fit.predict(data))


# --- significance ------------------------------------------------------------

def test_noise_term_not_significant_most_seeds():
    hits = 0
    seeds = range(20)
    for seed in seeds:
        rng = np.random.default_rng(100 + seed)
        n = 5000
        data = pd.DataFrame({"x": rng.uniform(0, 1, n), "noise": rng.uniform(0, 1, n)})
        data["rate"] = gamma_sample(rng, np.exp(1 + np.sin(2 * np.pi * data["x"])))
        fit = fit_gam(data, ModelSpec(terms=["x", "noise"], state_col=None))
        diag = {d.term: d for d in term_significance(fit)}
        hits += diag["noise"].p_value > 0.05
    assert hits / len(seeds) >= 0.9


def test_strong_term_ranks_first():
    rng = np.random.default_rng(12)
    n = 2000
    data = pd.DataFrame({"x": rng.uniform(0, 1, n), "w": rng.uniform(0, 1, n)})
    data["rate"] = gamma_sample(rng, np.exp(1 + 1.5 * np.sin(2 * np.pi * data["x"]) + 0.1 * data["w"]))
    diag = term_significance(fit_gam(data, ModelSpec(terms=["w", "x"], state_col=None)))
    assert diag[0].term == "x" and diag[0].rank == 1 and diag[0].stars == "***"


def test_one_term_rank_list():
    data, _ = sin_data(400, seed=13)
    diag = term_significance(fit_gam(data, ModelSpec(terms=["x"], state_col=None)))
    assert [d.rank for d in diag] == [1]


# --- strata ------------------------------------------------------------------

def _monthly(months, n_per=120, seed=14, winter_effect=0.0):
    rng = np.random.default_rng(seed)
    rows = []
    for m in months:
        x = rng.uniform(0, 1, n_per)
        eff = winter_effect * np.sin(2 * np.pi * x) if m in (12, 1, 2) else 0.0
        mu = np.exp(1.0 + eff)
        rows.append(pd.DataFrame({"month": m, "state": rng.choice(["AL", "NY", "CA", "IL"], n_per),
                                  "x": x, "rate": gamma_sample(rng, mu)}))
    return pd.concat(rows, ignore_index=True)


def test_seasonal_partition():
    data = _monthly(range(1, 13), n_per=40)
    fits = fit_stratified(data, "season", ModelSpec(terms=["x"]))
    assert sorted(fits) == ["autumn", "spring", "summer", "winter"]
    assert sum(f.n for f in fits.values()) == len(data)


def test_july_only_warns():
    data = _monthly([7], n_per=80)
    with pytest.warns(UserWarning):
        fits = fit_stratified(data, "season", ModelSpec(terms=["x"]))
    assert list(fits) == ["summer"]
    assert len(fits.warnings) == 3


def test_region_strata():
    data = _monthly(range(1, 13), n_per=40)
    fits = fit_stratified(data, "region", ModelSpec(terms=["x"]))
    assert sorted(fits) == ["Midwest", "Northeast", "South", "West"]
    assert all(f.state_effects[f.reference_state] == 0.0 for f in fits.values())


def test_winter_only_effect_detected_in_winter():
    data = _monthly(range(1, 13), n_per=300, winter_effect=0.8)
    fits = fit_stratified(data, "season", ModelSpec(terms=["x"]))
    p = {s: term_significance(f)[0].p_value for s, f in fits.items()}
    assert p["winter"] < 0.001
    assert p["summer"] > 0.05


def test_unidentifiable_stratum_skipped():
    data = _monthly(range(1, 13), n_per=40)
    # x carries no variation in winter months
    data.loc[data["month"].isin([12, 1, 2]), "x"] = 0.5
    with pytest.warns(UserWarning, match="winter"):
        fits = fit_stratified(data, "season", ModelSpec(terms=["x"]))
    assert sorted(fits) == ["autumn", "spring", "summer"]
    assert "constant" in fits.warnings["winter"]
