"""Consequence labels: fire spread, weighted injury risk, economic loss risk."""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import LabelError
from .ingest import INJURY_COLUMNS, OBJECT_CONFINED, SEVERITIES, SPREAD_LEVELS, adjust_to_2022, normalize_spread

SPREAD_NAMES = ("room", "floor", "building", "beyond")
RISK_NAMES = ("low", "moderate", "high")

INJURY_WEIGHTS = {
    "minor": 0.003,
    "moderate": 0.047,
    "severe": 0.266,
    "critical": 0.593,
    "fatal": 1.0,
}
DEFAULT_CUTS = (0.40, 0.75)


def spread_label(spread_code):
    """Ordinal spread level 0..3 (room, floor, building, beyond)."""
    canon = normalize_spread(spread_code)
    if canon == OBJECT_CONFINED:
        raise LabelError("object-confined fires must be filtered before labeling")
    if canon is None:
        raise LabelError(f"unknown spread code {spread_code!r}")
    return SPREAD_LEVELS.index(canon)


def injury_index(injuries, weights=INJURY_WEIGHTS):
    """Severity-weighted injury count."""
    total = 0.0
    for severity, count in injuries.items():
        if count < 0:
            raise LabelError(f"negative injury count for {severity}")
        total += weights[severity] * count
    return total


def injury_index_frame(df, weights=INJURY_WEIGHTS):
    """Vectorized :func:`injury_index` over the ``injuries_*`` columns."""
    w = np.array([weights[s] for s in SEVERITIES])
    return df[list(INJURY_COLUMNS)].to_numpy(dtype=float) @ w


def loss_totals_2022(df, cpi):
    total = df["property_loss_usd"].to_numpy(float) + df["content_loss_usd"].to_numpy(float)
    return adjust_to_2022(total, df["incident_year"].to_numpy(), cpi)


@dataclass(frozen=True)
class QuantileThresholds:
    target: str
    t_low: float
    t_high: float
    cuts: tuple
    n_train: int

    def apply(self, values):
        """Label values: low if v <= t_low, moderate if v <= t_high, else high."""
        v = np.asarray(values, dtype=float)
        return np.where(v <= self.t_low, 0, np.where(v <= self.t_high, 1, 2)).astype(int)

    def to_dict(self):
        d = asdict(self)
        d["cuts"] = list(self.cuts)
        return d

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path):
        d = json.loads(Path(path).read_text())
        return cls(d["target"], float(d["t_low"]), float(d["t_high"]), tuple(d["cuts"]),
                   int(d["n_train"]))


def fit_thresholds(values, cuts=DEFAULT_CUTS, target=""):
    """Type-7 (linear interpolation) quantiles of the training values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise LabelError("cannot compute quantile thresholds of an empty list")
    lo, hi = cuts
    if not 0 < lo < hi < 1:
        raise LabelError(f"invalid quantile cuts {cuts}")
    t_low, t_high = np.quantile(v, [lo, hi], method="linear")
    return QuantileThresholds(target, float(t_low), float(t_high), (float(lo), float(hi)), int(v.size))


def quantile_levels(values, cuts=DEFAULT_CUTS, target=""):
    """Label training values by their own quantiles.

    Returns ``(labels, thresholds)``; keep the thresholds to label test rows.
    """
    th = fit_thresholds(values, cuts, target)
    return th.apply(values), th


def loss_label(property_loss, content_loss, year, cpi, thresholds):
    if property_loss < 0 or content_loss < 0:
        raise LabelError("loss amounts must be non-negative")
    total = adjust_to_2022(property_loss + content_loss, year, cpi)
    return int(thresholds.apply([total])[0])
