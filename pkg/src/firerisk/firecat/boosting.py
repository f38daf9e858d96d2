"""Multiclass gradient boosting over mixed categorical / numeric factors."""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError, DegenerateFitError
from .encoding import EncodingTable, encode_categorical
from .tree import Tree, bin_matrix, forest_predict, grow_tree, make_cuts

logger = logging.getLogger(__name__)

MODEL_FORMAT = "firecat-model"
MODEL_VERSION = 1


@dataclass
class BoostParams:
    n_rounds: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    prior_weight: float = 1.0
    reg_lambda: float = 1.0
    min_samples_leaf: int = 20
    min_child_weight: float = 1e-3
    max_bins: int = 64
    early_stopping_rounds: int = None
    validation_fraction: float = 0.0
    n_classes: int = None
    seed: int = 0

    @classmethod
    def from_config(cls, cfg, **overrides):
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in cfg.items() if k in names}
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = "numeric"
    group: str = "incident"


def as_manifest(manifest):
    out = []
    for m in manifest:
        f = m if isinstance(m, Feature) else Feature(**m)
        if f.kind not in ("numeric", "categorical"):
            raise DataError(f"feature {f.name!r} has unknown kind {f.kind!r}", f.name)
        out.append(f)
    return out


def softmax(margins):
    z = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(probs, labels):
    p = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.clip(p, 1e-15, None))))


def _numeric(df, name):
    col = pd.to_numeric(df[name], errors="coerce").to_numpy(dtype=float)
    if np.isinf(col).any():
        raise DataError(f"feature {name!r} has infinite values", name)
    return col


@dataclass
class BoostModel:
    target: str
    n_classes: int
    params: BoostParams
    manifest: list
    encodings: dict
    trees: list = field(default_factory=list)  # rounds x classes
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)

    @property
    def feature_names(self):
        return [f.name for f in self.manifest]

    @property
    def n_rounds(self):
        return len(self.trees)

    def encode(self, df):
        """Numeric design matrix using the full-data encoding tables."""
        missing = [f.name for f in self.manifest if f.name not in df.columns]
        if missing:
            raise DataError(f"rows lack manifest feature(s): {missing}", missing[0])
        X = np.empty((len(df), len(self.manifest)))
        for j, f in enumerate(self.manifest):
            if f.kind == "categorical":
                X[:, j] = self.encodings[f.name].transform(df[f.name].to_numpy())
            else:
                X[:, j] = _numeric(df, f.name)
        return X

    def margins_from_matrix(self, X):
        F = np.zeros((X.shape[0], self.n_classes))
        for k in range(self.n_classes):
            F[:, k] = forest_predict([rnd[k] for rnd in self.trees], X)
        return F

    def margins(self, df):
        return self.margins_from_matrix(self.encode(df))

    def predict_proba(self, df):
        return softmax(self.margins(df))

    def predict(self, df):
        return np.argmax(self.predict_proba(df), axis=1)

    def to_dict(self):
        names = self.feature_names
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "target": self.target,
            "n_classes": self.n_classes,
            "params": asdict(self.params),
            "manifest": [asdict(f) for f in self.manifest],
            "encodings": {k: v.to_dict() for k, v in sorted(self.encodings.items())},
            "train_loss": self.train_loss,
            "valid_loss": self.valid_loss,
            "trees": [[t.to_nested(names) for t in rnd] for rnd in self.trees],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise DataError("not a FireCat model file")
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')}")
        manifest = [Feature(**f) for f in d["manifest"]]
        index_of = {f.name: i for i, f in enumerate(manifest)}
        trees = [[Tree.from_nested(t, index_of) for t in rnd] for rnd in d["trees"]]
        return cls(d["target"], d["n_classes"], BoostParams(**d["params"]), manifest,
                   {k: EncodingTable.from_dict(v) for k, v in d["encodings"].items()},
                   trees, list(d.get("train_loss", [])), list(d.get("valid_loss", [])))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def encode_training(train, labels, manifest, params, n_classes):
    """Training matrix: ordered statistics for categoricals, raw numerics."""
    rng = np.random.default_rng(params.seed)
    perm = rng.permutation(len(train))
    X = np.empty((len(train), len(manifest)))
    encodings = {}
    for j, f in enumerate(manifest):
        if f.name not in train.columns:
            raise DataError(f"training data lacks manifest feature {f.name!r}", f.name)
        if f.kind == "categorical":
            enc, table = encode_categorical(train[f.name].to_numpy(), labels, perm,
                                            a=params.prior_weight, prior_init=(n_classes - 1) / 2,
                                            feature=f.name, seed=params.seed)
            if np.isnan(enc).any():
                raise DataError(f"encoding of {f.name!r} produced NaN", f.name)
            X[:, j] = enc
            encodings[f.name] = table
        else:
            X[:, j] = _numeric(train, f.name)
    return X, encodings


def fit_firecat(train, labels, manifest, params=None, target="", eval_set=None):
    """Fit a multiclass boosted tree model.

    Each round computes softmax cross-entropy gradients at the current
    margins and fits one regression tree per class; margins start at zero.

    Parameters
    ----------
    train : DataFrame
        Rows with every manifest feature.
    labels : array-like of int
        Class index per row, 0..K-1.
    manifest : list of Feature or dict
    params : BoostParams
    eval_set : (DataFrame, labels), optional
        Validation data for early stopping.  When absent and
        ``params.validation_fraction > 0``, that share of ``train`` is held out.

    Returns
    -------
    BoostModel
    """
    params = params or BoostParams()
    manifest = as_manifest(manifest)
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0 or np.unique(y).size < 2:
        raise DegenerateFitError("need at least two classes to fit")
    if y.min() < 0:
        raise DataError("class labels must be non-negative integers")
    K = int(params.n_classes or y.max() + 1)
    if y.max() >= K:
        raise DataError(f"label {y.max()} out of range for {K} classes")
    if not 1 <= params.max_bins <= 255:
        raise ValueError("max_bins must be in [1, 255]")

    train = train.reset_index(drop=True)
    if eval_set is None and params.early_stopping_rounds and params.validation_fraction > 0:
        from .split import split_indices
        tr, va = split_indices(len(train), 1 - params.validation_fraction, params.seed + 1)
        eval_set = (train.iloc[va].reset_index(drop=True), y[va])
        train, y = train.iloc[tr].reset_index(drop=True), y[tr]

    X, encodings = encode_training(train, y, manifest, params, K)
    model = BoostModel(target, K, params, manifest, encodings)
    cuts = [make_cuts(X[:, j], params.max_bins) for j in range(X.shape[1])]
    binned = bin_matrix(X, cuts, params.max_bins)
    onehot = np.eye(K)[y]
    F = np.zeros((len(y), K))

    X_val = y_val = F_val = None
    if eval_set is not None:
        X_val = model.encode(eval_set[0])
        y_val = np.asarray(eval_set[1], dtype=np.int64)
        F_val = np.zeros((len(y_val), K))
    best, best_round, stall = np.inf, 0, 0

    for r in range(params.n_rounds):
        P = softmax(F)
        round_trees = []
        for k in range(K):
            g = P[:, k] - onehot[:, k]
            h = np.maximum(P[:, k] * (1 - P[:, k]), 1e-16)
            tree, leaf = grow_tree(binned, cuts, g, h, params.max_depth, params.reg_lambda,
                                   params.min_samples_leaf, params.min_child_weight,
                                   params.learning_rate, params.max_bins)
            F[:, k] += tree.value[leaf]
            round_trees.append(tree)
            if F_val is not None:
                F_val[:, k] += tree.predict(X_val)
        model.trees.append(round_trees)
        model.train_loss.append(log_loss(softmax(F), y))
        if F_val is not None:
            vl = log_loss(softmax(F_val), y_val)
            model.valid_loss.append(vl)
            if vl < best - 1e-12:
                best, best_round, stall = vl, r + 1, 0
            else:
                stall += 1
            if params.early_stopping_rounds and stall >= params.early_stopping_rounds:
                logger.info("early stop at round %d (best %d)", r + 1, best_round)
                model.trees = model.trees[:best_round]
                model.train_loss = model.train_loss[:best_round]
                break
    return model


def grid_search(train, labels, manifest, grid, base=None, fraction=0.8, seed=0):
    """Validation log-loss for every combination in ``grid``.

    Returns the list of ``(params, loss)`` pairs sorted best first.
    """
    import itertools

    from .split import split_indices

    base = base or BoostParams(seed=seed)
    y = np.asarray(labels)
    tr, va = split_indices(len(train), fraction, seed)
    train = train.reset_index(drop=True)
    results = []
    keys = sorted(grid)
    for combo in itertools.product(*(grid[k] for k in keys)):
        p = BoostParams(**{**asdict(base), **dict(zip(keys, combo))})
        m = fit_firecat(train.iloc[tr], y[tr], manifest, p)
        probs = m.predict_proba(train.iloc[va])
        results.append((p, log_loss(probs, y[va])))
    results.sort(key=lambda t: t[1])
    return results
