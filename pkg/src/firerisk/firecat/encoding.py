"""Ordered target statistics for categorical features."""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

UNKNOWN = "unknown"


@dataclass
class EncodingTable:
    """Full-training-data target statistic per category, used at inference."""

    feature: str
    stats: dict
    prior: float
    prior_weight: float
    seed: int = None
    counts: dict = field(default_factory=dict)

    def transform(self, values):
        s = pd.Series(values, copy=False).astype(object)
        s = s.where(s.notna(), UNKNOWN).astype(str)
        return s.map(self.stats).fillna(self.prior).to_numpy(dtype=float)

    def to_dict(self):
        return {
            "feature": self.feature,
            "prior": self.prior,
            "prior_weight": self.prior_weight,
            "seed": self.seed,
            "stats": dict(sorted(self.stats.items())),
            "counts": dict(sorted(self.counts.items())),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], dict(d["stats"]), d["prior"], d["prior_weight"], d.get("seed"),
                   dict(d.get("counts", {})))


def _as_categories(column):
    s = pd.Series(column, copy=False).astype(object)
    return s.where(s.notna(), UNKNOWN).astype(str).to_numpy()


def encode_categorical(column, labels, permutation, a=1.0, prior=None, prior_init=0.0,
                       feature="", seed=None):
    """Ordered target statistic of a categorical column.

    Rows are visited in ``permutation`` order.  Row i gets
    ``(sum of earlier same-category labels + a * P) / (count of them + a)``,
    so its own label never enters its encoding.

    Parameters
    ----------
    column : array-like
        Raw category values.
    labels : array-like of int
        Ordinal class index per row.
    permutation : array-like of int
        Visiting order (a permutation of ``range(n)``).
    a : float
        Prior weight, > 0.
    prior : float, optional
        Fixed prior P.  By default P is the running mean of all labels
        visited before row i (``prior_init`` for the first row), which keeps
        the prior itself free of row i's label.

    Returns
    -------
    encoded : ndarray
    table : EncodingTable
        Statistics over the full column for inference; unseen categories
        map to the global label mean.
    """
    if a <= 0:
        raise ValueError("prior weight a must be positive")
    cats = _as_categories(column)
    y = np.asarray(labels, dtype=float)
    perm = np.asarray(permutation, dtype=np.int64)
    n = len(cats)
    if len(y) != n or len(perm) != n:
        raise ValueError("column, labels and permutation must have the same length")

    codes, uniques = pd.factorize(cats[perm])
    yp = y[perm]
    grouped = pd.Series(yp).groupby(codes)
    prefix_sum = grouped.cumsum().to_numpy() - yp
    prefix_n = grouped.cumcount().to_numpy()
    if prior is None:
        seen = np.arange(n)
        running = np.cumsum(yp) - yp
        P = np.where(seen > 0, running / np.maximum(seen, 1), prior_init)
    else:
        P = np.full(n, float(prior))
    enc_perm = (prefix_sum + a * P) / (prefix_n + a)
    encoded = np.empty(n)
    encoded[perm] = enc_perm

    global_mean = float(y.mean()) if n else 0.0
    full = pd.DataFrame({"c": cats, "y": y}).groupby("c", sort=True)["y"].agg(["sum", "count"])
    stats = ((full["sum"] + a * global_mean) / (full["count"] + a)).to_dict()
    counts = {k: int(v) for k, v in full["count"].items()}
    return encoded, EncodingTable(feature, stats, global_mean, float(a), seed, counts)
