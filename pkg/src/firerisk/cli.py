"""Command-line entry point: ``firerisk <command> --config run.yaml``.

Every command reads its inputs from the config (or from an earlier
command's outputs under the output directory) and writes CSV/JSON
artifacts.  Exit status is 0 on success, 2 for bad input or configuration
and 1 for anything else.
"""

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .attribution import (category_effects, feature_grid, pdp2, rank_factors, shap_long,
                          tree_shap_all, write_json)
from .config import INCIDENT_CATEGORICALS, load_config
from .errors import ConfigError, FireRiskError, UserError
from .firecat import BoostModel, fit_baseline
from .gam import ModelSpec, fit_gam, fit_stratified, partial_dependence, term_significance
from .geo import REGION_MAP
from .ingest import CpiTable, read_factor_table, write_table
from .metrics import evaluate
from .pipeline import (CLASS_NAMES, TARGETS, derive_labels, fit_target, gam_frame, ingest_corpus,
                       join, load_inputs, target_rows)
from .rates import county_month_rates, read_rates, write_report
from .synthetic import generate_synthetic

logger = logging.getLogger("firerisk")

OUTPUT_ENV = "FIRERISK_OUTPUT_DIR"
_ID_COLUMNS = ("incident_id", "state", "county_fips", "zip")


class Run:
    """Resolved config plus the output directory layout."""

    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = Path(out)

    def dir(self, *parts):
        d = self.out.joinpath(*parts)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def need(self, *parts):
        p = self.out.joinpath(*parts)
        if not p.exists():
            raise UserError(f"missing {p}; run the earlier pipeline step first")
        return p


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_joined(path):
    dtype = {c: str for c in (*_ID_COLUMNS, *INCIDENT_CATEGORICALS)}
    df = pd.read_csv(path, dtype=dtype, keep_default_na=True)
    df["timestamp"] = pd.to_datetime(df["timestamp"])
    return df


# --- commands -------------------------------------------------------------

def cmd_synth(run):
    cfg = run.cfg
    corpus = generate_synthetic(cfg["synthetic"], int(cfg["seed"]))
    d = run.dir("synthetic")
    write_table(corpus.incidents, d / "incidents.csv")
    write_table(corpus.zip_factors, d / "zip_factors.csv")
    write_table(corpus.county_factors, d / "county_factors.csv")
    write_table(corpus.weather_hourly, d / "weather_hourly.csv")
    write_table(corpus.cpi.to_frame(), d / "cpi.csv")
    write_table(corpus.latent, d / "latent_classes.csv")
    logger.info("synthetic corpus: %d incidents -> %s", len(corpus.incidents), d)
    return corpus


def cmd_ingest(run, synthetic=False):
    cfg = run.cfg
    if synthetic:
        cmd_synth(run)
        d = run.out / "synthetic"
        cfg["paths"].update(incidents=str(d / "incidents.csv"), zip_factors=str(d / "zip_factors.csv"),
                            county_factors=str(d / "county_factors.csv"),
                            weather=str(d / "weather_hourly.csv"), cpi=str(d / "cpi.csv"))
        cfg["schema"] = {}
    incidents, report, zip_f, county_f, weather, cpi = load_inputs(cfg)
    if county_f is None:
        raise ConfigError("paths.county_factors is required (building units and GAM covariates)")
    joined = join(incidents, zip_f, county_f, weather)
    d = run.dir("ingest")
    write_table(incidents, d / "incidents.csv")
    write_table(joined, d / "joined.csv")
    write_table(county_f, d / "county_factors.csv")
    write_table(cpi.to_frame(), d / "cpi.csv")
    report.write(d / "load_report.json")
    logger.info("ingest: kept %d of %d rows", report.rows_kept, report.rows_in)
    return joined


def cmd_targets(run):
    joined = read_joined(run.need("ingest", "joined.csv"))
    cpi = CpiTable.from_csv(run.need("ingest", "cpi.csv"))
    labels, thresholds = derive_labels(joined, run.cfg, cpi)
    d = run.dir("targets")
    write_table(labels, d / "labels.csv")
    for name, th in thresholds.items():
        th.write(d / f"thresholds_{name}.json")
    counts = {t: {str(k): int(v) for k, v in labels.loc[labels[t] >= 0, t]
                  .value_counts().sort_index().items()} for t in TARGETS}
    _write_json({"n": len(labels), "n_train": int((labels["split"] == "train").sum()),
                 "class_counts": counts}, d / "summary.json")
    return labels


def cmd_rates(run):
    incidents = pd.read_csv(run.need("ingest", "incidents.csv"), dtype={"county_fips": str, "zip": str})
    units = read_factor_table(run.need("ingest", "county_factors.csv"), "county")
    rates, report = county_month_rates(incidents, units, run.cfg["rates"]["min_count"])
    d = run.dir("rates")
    write_table(rates, d / "rates.csv")
    write_report(report, d / "exclusions.json")
    return rates


def _gam_outputs(fit, d, spec, points):
    (d / f"{fit.label}.json").write_text(fit.to_json())
    frames = []
    for t in fit.terms:
        lo, hi = t.x_range
        frames.append(partial_dependence(fit, t.name, np.linspace(lo, hi, points)))
    write_table(pd.concat(frames, ignore_index=True), d / f"pdp_{fit.label}.csv")
    diag = pd.DataFrame([x.to_dict() for x in term_significance(fit)])
    diag.insert(0, "fit", fit.label)
    return diag


def cmd_fit_gam(run, rates_path=None):
    cfg = run.cfg
    rates = read_rates(rates_path or run.need("rates", "rates.csv"))
    county_f = read_factor_table(run.need("ingest", "county_factors.csv"), "county")
    data = gam_frame(rates, county_f)
    spec = ModelSpec.from_config(cfg["gam"])
    points = int(cfg["gam"]["pdp_points"])
    d = run.dir("gam")
    diags = [_gam_outputs(fit_gam(data, spec, label="national"), d, spec, points)]
    skipped = {}
    for stratifier in cfg["gam"]["stratify"]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fits = fit_stratified(data, stratifier, spec, REGION_MAP)
        skipped.update(fits.warnings)
        for fit in fits.values():
            diags.append(_gam_outputs(fit, d, spec, points))
    write_table(pd.concat(diags, ignore_index=True), d / "diagnostics.csv")
    if skipped:
        _write_json(skipped, d / "skipped_strata.json")
    return data


def _targets_arg(target):
    return list(TARGETS) if target in (None, "all") else [target]


def _load_labelled(run):
    joined = read_joined(run.need("ingest", "joined.csv"))
    labels = pd.read_csv(run.need("targets", "labels.csv"), dtype={"incident_id": str})
    if not labels["incident_id"].equals(joined["incident_id"]):
        raise UserError("labels.csv does not match joined.csv; rerun the targets step")
    return joined, labels


def cmd_fit_firecat(run, target="all"):
    joined, labels = _load_labelled(run)
    for t in _targets_arg(target):
        model, base, rep_m, rep_b = fit_target(joined, labels, t, run.cfg)
        d = run.dir("firecat", t)
        model.save(d / "model.json")
        _write_json(base.to_dict(), d / "baseline.json")
        rep_m.write(d, "eval_firecat")
        rep_b.write(d, "eval_baseline")
        _write_json({"target": t, "firecat": rep_m.metrics(), "baseline": rep_b.metrics(),
                     "firecat_better": rep_m.beats(rep_b)}, d / "comparison.json")


def _model_path(run, target, model_path):
    p = Path(model_path) if model_path else run.out / "firecat" / target / "model.json"
    if not p.exists():
        raise UserError(f"model file not found: {p}")
    return p


def cmd_evaluate(run, target="all", model_path=None):
    joined, labels = _load_labelled(run)
    mcfg = run.cfg["metrics"]
    for t in _targets_arg(target):
        model = BoostModel.load(_model_path(run, t, model_path))
        Xtr, ytr, Xte, yte = target_rows(joined, labels, t)
        kw = dict(target=t, weights=mcfg.get("wmse_weights"), average=mcfg.get("average", "macro"),
                  taus=mcfg.get("taus"), class_names=CLASS_NAMES[t])
        rep_m = evaluate(model.predict_proba(Xte), yte, model="firecat", **kw)
        base = fit_baseline(ytr, model.n_classes, t)
        rep_b = evaluate(base.predict_proba(Xte), yte, model="baseline", **kw)
        d = run.dir("evaluate", t)
        rep_m.write(d, "firecat")
        rep_b.write(d, "baseline")
        _write_json({"target": t, "firecat": rep_m.metrics(), "baseline": rep_b.metrics(),
                     "firecat_better": rep_m.beats(rep_b)}, d / "comparison.json")


def _pdp2_csv(model, rows, fx, fy, points, path):
    gx = feature_grid(rows[fx], points)
    gy = feature_grid(rows[fy], points)
    Z = pdp2(model, rows, fx, fy, gx, gy)
    out = pd.DataFrame({"x": np.repeat(np.asarray(gx, dtype=object), len(gy)),
                        "y": np.tile(np.asarray(gy, dtype=object), len(gx)),
                        "value": Z.ravel()})
    write_table(out, path)


def cmd_explain(run, target="all", model_path=None):
    ecfg = run.cfg["explain"]
    joined, labels = _load_labelled(run)
    for t in _targets_arg(target):
        model = BoostModel.load(_model_path(run, t, model_path))
        _, _, Xte, _ = target_rows(joined, labels, t)
        rows = Xte.iloc[: int(ecfg["n_rows"])].reset_index(drop=True)
        mats = tree_shap_all(model, rows)
        worst = max(m.max_error() for m in mats)
        d = run.dir("explain", t)
        write_table(shap_long(mats, rows), d / "shap_long.csv")
        ranking = rank_factors(mats, model.manifest).to_dict()
        ranking["local_accuracy_max_error"] = worst
        write_json(ranking, d / "ranking.json")
        effects = {}
        for f in model.manifest:
            if f.kind == "categorical":
                effects[f.name] = {str(m.class_index): category_effects(m, rows, f.name, model.manifest)
                                   for m in mats}
        write_json(effects, d / "category_effects.json")
        pdp_rows = Xte.iloc[: int(ecfg["pdp_rows"])].reset_index(drop=True)
        for fx, fy in ecfg["pdp_pairs"]:
            _pdp2_csv(model, pdp_rows, fx, fy, int(ecfg["grid_points"]), d / f"pdp2_{fx}__{fy}.csv")


def cmd_pdp2(run, target, fx, fy, model_path=None):
    ecfg = run.cfg["explain"]
    joined, labels = _load_labelled(run)
    model = BoostModel.load(_model_path(run, target, model_path))
    for f in (fx, fy):
        if f not in model.feature_names:
            raise UserError(f"feature {f!r} is not in the model manifest")
    _, _, Xte, _ = target_rows(joined, labels, target)
    rows = Xte.iloc[: int(ecfg["pdp_rows"])].reset_index(drop=True)
    d = run.dir("explain", target)
    _pdp2_csv(model, rows, fx, fy, int(ecfg["grid_points"]), d / f"pdp2_{fx}__{fy}.csv")


def cmd_run(run, synthetic=False):
    cmd_ingest(run, synthetic=synthetic)
    cmd_targets(run)
    cmd_rates(run)
    cmd_fit_gam(run)
    cmd_fit_firecat(run)
    cmd_evaluate(run)
    cmd_explain(run)


# --- argument parsing -----------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="firerisk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML run configuration")
    common.add_argument("-o", "--output-dir", help=f"output directory (overrides ${OUTPUT_ENV})")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="write a synthetic input corpus")
    s = sub.add_parser("ingest", parents=[common], help="validate and join input tables")
    s.add_argument("--synthetic", action="store_true", help="generate a synthetic corpus first")
    sub.add_parser("targets", parents=[common], help="derive consequence labels")
    sub.add_parser("rates", parents=[common], help="county-month incidence rates")
    s = sub.add_parser("fit-gam", parents=[common], help="national, seasonal and regional GAMs")
    s.add_argument("--rates", help="rates CSV (default: output of the rates step)")
    for name, helptext in (("fit-firecat", "fit FireCat and the baseline"),
                           ("evaluate", "score saved models on the test split"),
                           ("explain", "SHAP attribution and partial dependence")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--target", choices=[*TARGETS, "all"], default="all")
        if name != "fit-firecat":
            s.add_argument("--model", help="model file (default: output of fit-firecat)")
    s = sub.add_parser("pdp2", parents=[common], help="two-factor partial dependence grid")
    s.add_argument("--target", choices=TARGETS, required=True)
    s.add_argument("--fx", required=True)
    s.add_argument("--fy", required=True)
    s.add_argument("--model")
    s = sub.add_parser("run", parents=[common], help="the whole pipeline")
    s.add_argument("--synthetic", action="store_true")
    return p


def resolve_run(args):
    overrides = {"seed": args.seed} if args.seed is not None else None
    cfg = load_config(args.config, overrides)
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg["paths"]["output_dir"]
    return Run(cfg, out)


def dispatch(args):
    run = resolve_run(args)
    c = args.command
    if c == "synth":
        cmd_synth(run)
    elif c == "ingest":
        cmd_ingest(run, synthetic=args.synthetic)
    elif c == "targets":
        cmd_targets(run)
    elif c == "rates":
        cmd_rates(run)
    elif c == "fit-gam":
        cmd_fit_gam(run, args.rates)
    elif c == "fit-firecat":
        cmd_fit_firecat(run, args.target)
    elif c == "evaluate":
        cmd_evaluate(run, args.target, args.model)
    elif c == "explain":
        cmd_explain(run, args.target, args.model)
    elif c == "pdp2":
        cmd_pdp2(run, args.target, args.fx, args.fy, args.model)
    elif c == "run":
        cmd_run(run, synthetic=args.synthetic)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(args)
    except UserError as exc:
        print(f"firerisk: error: {exc}", file=sys.stderr)
        return 2
    except FireRiskError as exc:
        print(f"firerisk: internal error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        logger.debug("unhandled", exc_info=True)
        print(f"firerisk: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
