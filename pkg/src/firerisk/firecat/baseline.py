"""Input-free reference model: empirical class frequencies."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BaselineModel:
    probs: tuple
    target: str = ""

    @property
    def n_classes(self):
        return len(self.probs)

    def predict_proba(self, rows):
        return np.tile(np.asarray(self.probs, dtype=float), (len(rows), 1))

    def predict(self, rows):
        return np.full(len(rows), int(np.argmax(self.probs)))

    def to_dict(self):
        return {"kind": "baseline", "target": self.target, "probs": list(self.probs)}


def fit_baseline(labels, n_classes=None, target=""):
    """Class frequencies of ``labels``.

    >>> fit_baseline([0, 0, 1, 2]).probs
    (0.5, 0.25, 0.25)
    """
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("cannot fit a baseline on empty labels")
    K = int(n_classes or y.max() + 1)
    counts = np.bincount(y, minlength=K)
    return BaselineModel(tuple(float(c) for c in counts / y.size), target)
