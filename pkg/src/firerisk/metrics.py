"""Probabilistic and point metrics for ordinal class predictions."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

METRIC_NAMES = ("accuracy", "precision", "f1", "mse", "wmse", "brier", "rps")
# metrics where larger is better; the rest are errors
HIGHER_IS_BETTER = {"accuracy", "precision", "f1"}
DEFAULT_TAUS = tuple(round(0.05 * i, 2) for i in range(21))


def _check(probs, labels):
    P = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if P.ndim != 2:
        raise ValueError(f"probs must be a 2-d array, got shape {P.shape}")
    if y.ndim != 1 or len(y) != P.shape[0]:
        raise ValueError(f"labels shape {y.shape} does not match probs shape {P.shape}")
    if len(y) and (y.min() < 0 or y.max() >= P.shape[1]):
        raise ValueError("label outside the class range of probs")
    return P, y


def _onehot(y, K):
    O = np.zeros((len(y), K))
    O[np.arange(len(y)), y] = 1.0
    return O


def brier(probs, labels):
    """Mean over rows of the summed squared error against one-hot outcomes."""
    P, y = _check(probs, labels)
    return float(np.mean(np.sum((P - _onehot(y, P.shape[1])) ** 2, axis=1)))


def rps(probs, labels):
    """Ranked probability score, normalized by ``K - 1`` per row and averaged."""
    P, y = _check(probs, labels)
    K = P.shape[1]
    if K < 2:
        raise ValueError("ranked probability score needs at least two classes")
    diff = np.cumsum(P, axis=1) - np.cumsum(_onehot(y, K), axis=1)
    return float(np.mean(np.sum(diff ** 2, axis=1) / (K - 1)))


def argmax_lower(probs):
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(np.asarray(probs, dtype=float), axis=1)


def class_weights(labels, K):
    """Inverse-frequency weights ``N / (K * N_k)``; absent classes get 0."""
    y = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(y, minlength=K).astype(float)
    with np.errstate(divide="ignore"):
        w = np.where(counts > 0, len(y) / (K * counts), 0.0)
    return w


def confusion_matrix(labels, preds, K):
    cm = np.zeros((K, K), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def _precision_f1(cm, average):
    tp = np.diag(cm).astype(float)
    pred_n = cm.sum(axis=0).astype(float)
    true_n = cm.sum(axis=1).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(pred_n > 0, tp / pred_n, 0.0)
        rec = np.where(true_n > 0, tp / true_n, 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    present = (pred_n > 0) | (true_n > 0)
    if average == "macro":
        return float(prec[present].mean()), float(f1[present].mean())
    if average == "weighted":
        w = true_n / true_n.sum()
        return float(np.sum(w * prec)), float(np.sum(w * f1))
    raise ValueError(f"unknown average {average!r}; use 'macro' or 'weighted'")


def point_metrics(probs, labels, weights=None, average="macro"):
    """Accuracy, precision, F1, MSE, WMSE and confusion of argmax predictions.

    Parameters
    ----------
    probs : (n, K) array
    labels : (n,) int array
    weights : sequence of K floats, optional
        Per-class WMSE weights; defaults to :func:`class_weights`.
    average : {"macro", "weighted"}
        Macro excludes classes absent from both truth and predictions.

    Returns
    -------
    dict
        Keys ``accuracy, precision, f1, mse, wmse, confusion, weights``.
    """
    P, y = _check(probs, labels)
    if len(y) == 0:
        raise ValueError("no rows to score")
    K = P.shape[1]
    pred = argmax_lower(P)
    w = class_weights(y, K) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (K,):
        raise ValueError(f"expected {K} class weights, got {w.shape}")
    sq = (pred - y).astype(float) ** 2
    wy = w[y]
    cm = confusion_matrix(y, pred, K)
    precision, f1 = _precision_f1(cm, average)
    return {
        "accuracy": float(np.mean(pred == y)),
        "precision": precision,
        "f1": f1,
        "mse": float(sq.mean()),
        "wmse": float(np.sum(wy * sq) / np.sum(wy)),
        "confusion": cm,
        "weights": w,
    }


def confidence_curve(probs, labels, taus=DEFAULT_TAUS):
    """Coverage and accuracy of rows whose top probability is at least tau.

    Accuracy is ``None`` when no row reaches the threshold.
    """
    P, y = _check(probs, labels)
    conf = P.max(axis=1)
    correct = argmax_lower(P) == y
    out = []
    for tau in taus:
        if not 0 <= tau <= 1:
            raise ValueError(f"threshold {tau} outside [0, 1]")
        keep = conf >= tau
        k = int(keep.sum())
        acc = float(correct[keep].mean()) if k else None
        out.append((float(tau), k / len(y) if len(y) else 0.0, acc))
    return out


@dataclass
class EvalReport:
    model: str
    target: str
    n: int
    accuracy: float
    precision: float
    f1: float
    mse: float
    wmse: float
    brier: float
    rps: float
    confusion: list
    confidence_curve: list
    wmse_weights: list
    average: str = "macro"
    class_names: list = field(default_factory=list)

    def metrics(self):
        return {k: getattr(self, k) for k in METRIC_NAMES}

    def beats(self, other):
        """Per-metric strict improvement over ``other``."""
        out = {}
        for k in METRIC_NAMES:
            a, b = getattr(self, k), getattr(other, k)
            out[k] = a > b if k in HIGHER_IS_BETTER else a < b
        return out

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, directory, stem):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}.json").write_text(self.to_json())
        K = len(self.confusion)
        names = self.class_names or [str(k) for k in range(K)]
        lines = ["true," + ",".join(names)]
        lines += [f"{names[i]}," + ",".join(str(v) for v in row) for i, row in enumerate(self.confusion)]
        (d / f"{stem}_confusion.csv").write_text("\n".join(lines) + "\n")
        lines = ["tau,coverage,accuracy"]
        lines += [f"{t!r},{c!r},{'' if a is None else repr(a)}" for t, c, a in self.confidence_curve]
        (d / f"{stem}_confidence.csv").write_text("\n".join(lines) + "\n")


def evaluate(probs, labels, model="", target="", weights=None, average="macro",
             taus=DEFAULT_TAUS, class_names=()):
    """All seven metrics plus confusion and confidence curve in one report."""
    pm = point_metrics(probs, labels, weights, average)
    return EvalReport(
        model=model, target=target, n=int(len(labels)),
        accuracy=pm["accuracy"], precision=pm["precision"], f1=pm["f1"],
        mse=pm["mse"], wmse=pm["wmse"], brier=brier(probs, labels), rps=rps(probs, labels),
        confusion=pm["confusion"].tolist(),
        confidence_curve=[list(t) for t in confidence_curve(probs, labels, taus)],
        wmse_weights=[float(v) for v in pm["weights"]], average=average,
        class_names=list(class_names),
    )
