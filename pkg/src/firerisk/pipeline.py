"""Glue between the modules: data assembly, labels, fitting, evaluation."""

import logging

import numpy as np
import pandas as pd

from .config import GAM_COVARIATES
from .errors import ConfigError, LabelError
from .firecat import BoostParams, fit_baseline, fit_firecat, split_indices
from .ingest import CPI_U, CpiTable, join_factors, load_incidents, read_factor_table, validate_incidents
from .metrics import evaluate
from .targets import RISK_NAMES, SPREAD_NAMES, fit_thresholds, injury_index_frame, loss_totals_2022, spread_label

logger = logging.getLogger(__name__)

TARGETS = ("spread", "injury", "loss")
CLASS_NAMES = {"spread": SPREAD_NAMES, "injury": RISK_NAMES, "loss": RISK_NAMES}


def load_inputs(cfg):
    """Validated incidents plus factor tables and CPI from the configured paths."""
    paths = cfg["paths"]
    if not paths.get("incidents"):
        raise ConfigError("paths.incidents is not set")
    if not paths.get("zip_factors"):
        raise ConfigError("paths.zip_factors is not set")
    incidents, report = load_incidents(paths["incidents"], cfg["schema"], cfg["filters"],
                                       cfg["categories"])
    zip_f = read_factor_table(paths["zip_factors"], "zip")
    county_f = read_factor_table(paths["county_factors"], "county") if paths.get("county_factors") else None
    weather = pd.read_csv(paths["weather"], dtype={"geo_id": str}) if paths.get("weather") else None
    cpi = CpiTable.from_csv(paths["cpi"]) if paths.get("cpi") else CPI_U
    return incidents, report, zip_f, county_f, weather, cpi


def ingest_corpus(corpus, cfg):
    """Validate a synthetic corpus exactly as a file-based load would."""
    raw = corpus.incidents.copy()
    raw["timestamp"] = raw["timestamp"].dt.strftime("%Y-%m-%d %H:%M:%S")
    raw = raw.astype(str)
    incidents, report = validate_incidents(raw, cfg["filters"], cfg["categories"])
    return incidents, report


def join(incidents, zip_f, county_f, weather):
    return join_factors(incidents, zip_f, county_f, weather)


def derive_labels(joined, cfg, cpi):
    """Train/test split and labels for every target.

    Quantile thresholds come from training rows only.

    Returns
    -------
    labels : DataFrame
        ``incident_id, split, spread, injury, loss`` (injury is -1 for rows
        excluded by ``exclude_zero_injury``).
    thresholds : dict
        target -> QuantileThresholds
    """
    tcfg = cfg["targets"]
    n = len(joined)
    tr, _ = split_indices(n, tcfg["train_fraction"], cfg["seed"])
    is_train = np.zeros(n, dtype=bool)
    is_train[tr] = True

    try:
        spread = np.array([spread_label(c) for c in joined["spread_code"]], dtype=int)
    except LabelError as exc:
        raise LabelError(f"spread labeling failed: {exc}") from exc
    inj_index = injury_index_frame(joined)
    keep_inj = inj_index > 0 if tcfg.get("exclude_zero_injury") else np.ones(n, dtype=bool)
    th_inj = fit_thresholds(inj_index[is_train & keep_inj], tcfg["cuts"], "injury")
    injury = np.where(keep_inj, th_inj.apply(inj_index), -1)
    loss_2022 = loss_totals_2022(joined, cpi)
    th_loss = fit_thresholds(loss_2022[is_train], tcfg["cuts"], "loss")
    loss = th_loss.apply(loss_2022)

    labels = pd.DataFrame({
        "incident_id": joined["incident_id"].to_numpy(),
        "split": np.where(is_train, "train", "test"),
        "injury_index": inj_index,
        "loss_2022_usd": loss_2022,
        "spread": spread,
        "injury": injury,
        "loss": loss,
    })
    return labels, {"injury": th_inj, "loss": th_loss}


def gam_frame(rates, county_f):
    """County-month rates with their county-level covariates attached."""
    cf = county_f.rename(columns={"geo_id": "county_fips"}).copy()
    cf["county_fips"] = cf["county_fips"].astype(str).str.zfill(5)
    cols = ["county_fips", "year", "month"] + [c for c in GAM_COVARIATES if c in cf.columns]
    out = rates.merge(cf[cols], how="left", on=["county_fips", "year", "month"])
    return out.dropna(subset=[c for c in GAM_COVARIATES if c in out.columns]).reset_index(drop=True)


def target_rows(joined, labels, target):
    """Train and test rows (features, labels) for one target."""
    y = labels[target].to_numpy()
    usable = y >= 0
    train = usable & (labels["split"].to_numpy() == "train")
    test = usable & (labels["split"].to_numpy() == "test")
    return (joined[train].reset_index(drop=True), y[train],
            joined[test].reset_index(drop=True), y[test])


def fit_target(joined, labels, target, cfg):
    """Fit FireCat and the baseline for one target and score both on the test rows.

    Returns ``(model, baseline, report_firecat, report_baseline)``.
    """
    fc = cfg["firecat"]
    K = len(CLASS_NAMES[target])
    params = BoostParams.from_config(fc, seed=int(cfg["seed"]), n_classes=K)
    Xtr, ytr, Xte, yte = target_rows(joined, labels, target)
    model = fit_firecat(Xtr, ytr, fc["manifest"], params, target=target)
    base = fit_baseline(ytr, K, target)
    mcfg = cfg["metrics"]
    kw = dict(target=target, weights=mcfg.get("wmse_weights"), average=mcfg.get("average", "macro"),
              taus=mcfg.get("taus"), class_names=CLASS_NAMES[target])
    rep_m = evaluate(model.predict_proba(Xte), yte, model="firecat", **kw)
    rep_b = evaluate(base.predict_proba(Xte), yte, model="baseline", **kw)
    logger.info("%s: firecat acc %.4f vs baseline %.4f", target, rep_m.accuracy, rep_b.accuracy)
    return model, base, rep_m, rep_b
