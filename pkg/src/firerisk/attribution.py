"""Exact path-dependent TreeSHAP for boosted models, plus factor summaries."""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
import pandas as pd

from .firecat.boosting import as_manifest, softmax

GROUPS = ("incident", "local")

# numba falls back to another threading layer; the notice is noise for users
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)


# --- core recursion -------------------------------------------------------
# Path state lives in 2-d buffers indexed by tree depth; each node works on
# its own row, copied from its parent's.

@numba.njit(cache=True)
def _extend(pf, pz, po, pw, d, ud, zero, one, feat):
    pf[d, ud] = feat
    pz[d, ud] = zero
    po[d, ud] = one
    pw[d, ud] = 1.0 if ud == 0 else 0.0
    for i in range(ud - 1, -1, -1):
        pw[d, i + 1] += one * pw[d, i] * (i + 1) / (ud + 1)
        pw[d, i] = zero * pw[d, i] * (ud - i) / (ud + 1)


@numba.njit(cache=True)
def _unwind(pf, pz, po, pw, d, ud, idx):
    one = po[d, idx]
    zero = pz[d, idx]
    nxt = pw[d, ud]
    for i in range(ud - 1, -1, -1):
        if one != 0.0:
            tmp = pw[d, i]
            pw[d, i] = nxt * (ud + 1) / ((i + 1) * one)
            nxt = tmp - pw[d, i] * zero * (ud - i) / (ud + 1)
        else:
            pw[d, i] = pw[d, i] * (ud + 1) / (zero * (ud - i))
    for i in range(idx, ud):
        pf[d, i] = pf[d, i + 1]
        pz[d, i] = pz[d, i + 1]
        po[d, i] = po[d, i + 1]


@numba.njit(cache=True)
def _unwound_sum(pz, po, pw, d, ud, idx):
    one = po[d, idx]
    zero = pz[d, idx]
    nxt = pw[d, ud]
    total = 0.0
    for i in range(ud - 1, -1, -1):
        if one != 0.0:
            tmp = nxt * (ud + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[d, i] - tmp * zero * (ud - i) / (ud + 1)
        elif zero != 0.0:
            total += pw[d, i] / zero * (ud + 1) / (ud - i)
    return total


@numba.njit(cache=True)
def _tree_shap_row(x, feature, threshold, left, right, default_left, value, cover, base, phi,
                   pf, pz, po, pw, stack_i, stack_f):
    # depth-first walk with an explicit stack; per depth d:
    # stack_i[d] = node, unique depth, split feature, stage, cold child, child unique depth
    # stack_f[d] = zero fraction, one fraction, cold zero fraction
    d = 0
    stack_i[0, 0] = 0
    stack_i[0, 1] = 0
    stack_i[0, 2] = -1
    stack_i[0, 3] = 0
    stack_f[0, 0] = 1.0
    stack_f[0, 1] = 1.0
    while d >= 0:
        stage = stack_i[d, 3]
        if stage == 0:
            ud = stack_i[d, 1]
            if d > 0:
                for i in range(ud):
                    pf[d, i] = pf[d - 1, i]
                    pz[d, i] = pz[d - 1, i]
                    po[d, i] = po[d - 1, i]
                    pw[d, i] = pw[d - 1, i]
            _extend(pf, pz, po, pw, d, ud, stack_f[d, 0], stack_f[d, 1], stack_i[d, 2])
            n = base + stack_i[d, 0]
            f = feature[n]
            if f < 0:
                for i in range(1, ud + 1):
                    w = _unwound_sum(pz, po, pw, d, ud, i)
                    phi[pf[d, i]] += w * (po[d, i] - pz[d, i]) * value[n]
                d -= 1
                continue
            v = x[f]
            if np.isnan(v):
                go_left = default_left[n]
            else:
                go_left = v <= threshold[n]
            hot = left[n] if go_left else right[n]
            cold = right[n] if go_left else left[n]
            w = cover[n]
            in_zero = 1.0
            in_one = 1.0
            k = 0
            while k <= ud:
                if pf[d, k] == f:
                    break
                k += 1
            if k != ud + 1:
                in_zero = pz[d, k]
                in_one = po[d, k]
                _unwind(pf, pz, po, pw, d, ud, k)
                ud -= 1
            stack_i[d, 3] = 1
            stack_i[d, 4] = cold
            stack_i[d, 5] = ud + 1
            stack_f[d, 2] = cover[base + cold] / w * in_zero
            stack_i[d + 1, 0] = hot
            stack_i[d + 1, 1] = ud + 1
            stack_i[d + 1, 2] = f
            stack_i[d + 1, 3] = 0
            stack_f[d + 1, 0] = cover[base + hot] / w * in_zero
            stack_f[d + 1, 1] = in_one
            d += 1
        elif stage == 1:
            stack_i[d, 3] = 2
            stack_i[d + 1, 0] = stack_i[d, 4]
            stack_i[d + 1, 1] = stack_i[d, 5]
            stack_i[d + 1, 2] = feature[base + stack_i[d, 0]]
            stack_i[d + 1, 3] = 0
            stack_f[d + 1, 0] = stack_f[d, 2]
            stack_f[d + 1, 1] = 0.0
            d += 1
        else:
            d -= 1


@numba.njit(cache=True, parallel=True)
def _shap_rows(X, feature, threshold, left, right, default_left, value, cover, offsets,
               max_depth):
    n, n_feat = X.shape
    out = np.zeros((n, n_feat))
    size = max_depth + 2
    for r in numba.prange(n):
        pf = np.full((size, size), -1, dtype=np.int64)
        pz = np.zeros((size, size))
        po = np.zeros((size, size))
        pw = np.zeros((size, size))
        stack_i = np.zeros((size, 6), dtype=np.int64)
        stack_f = np.zeros((size, 3))
        phi = np.zeros(n_feat)
        for t in range(len(offsets) - 1):
            _tree_shap_row(X[r], feature, threshold, left, right, default_left, value, cover,
                           offsets[t], phi, pf, pz, po, pw, stack_i, stack_f)
        out[r] = phi
    return out


def _depth(tree, i=0):
    if tree.feature[i] < 0:
        return 0
    return 1 + max(_depth(tree, tree.left[i]), _depth(tree, tree.right[i]))


def expected_value(tree):
    """Cover-weighted mean leaf value."""
    leaf = tree.feature < 0
    return float(np.sum(tree.value[leaf] * tree.cover[leaf]) / tree.cover[0])


def shap_trees(trees, X):
    """SHAP values of the summed output of ``trees`` for each row of ``X``.

    Returns ``(phi, base)`` with ``phi`` of shape ``(n_rows, n_features)``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if not trees:
        return np.zeros(X.shape), 0.0
    cat = lambda name: np.concatenate([getattr(t, name) for t in trees])
    offsets = np.cumsum([0] + [t.n_nodes for t in trees]).astype(np.int64)
    depth = max(_depth(t) for t in trees)
    phi = _shap_rows(X, cat("feature").astype(np.int64), cat("threshold").astype(float),
                     cat("left").astype(np.int64), cat("right").astype(np.int64),
                     cat("default_left").astype(np.bool_), cat("value").astype(float),
                     cat("cover").astype(float), offsets, depth)
    return phi, float(sum(expected_value(t) for t in trees))


# --- model-level API ------------------------------------------------------

@dataclass
class ShapMatrix:
    """Per-row additive contributions to one class's margin."""

    values: np.ndarray
    base: float
    features: list
    class_index: int
    margins: np.ndarray = None
    inputs: np.ndarray = None  # encoded feature values the model saw

    def max_error(self):
        """Largest ``|base + sum(values) - margin|`` over rows."""
        if self.margins is None or not len(self.values):
            return 0.0
        return float(np.max(np.abs(self.base + self.values.sum(axis=1) - self.margins)))

    def mean_abs(self):
        return np.abs(self.values).mean(axis=0)


def tree_shap(model, rows, class_index):
    """Exact TreeSHAP of ``model``'s margin for ``class_index`` on ``rows``.

    ``rows`` is a DataFrame of raw features or an already encoded matrix.
    """
    if not 0 <= class_index < model.n_classes:
        raise IndexError(f"class index {class_index} out of range for {model.n_classes} classes")
    X = rows if isinstance(rows, np.ndarray) else model.encode(rows)
    trees = [rnd[class_index] for rnd in model.trees]
    phi, base = shap_trees(trees, X)
    margins = model.margins_from_matrix(X)[:, class_index]
    return ShapMatrix(phi, base, model.feature_names, class_index, margins, X)


def tree_shap_all(model, rows):
    X = rows if isinstance(rows, np.ndarray) else model.encode(rows)
    return [tree_shap(model, X, k) for k in range(model.n_classes)]


@dataclass
class FactorRanking:
    importance: dict  # group -> list of (feature, mean |SHAP|), descending
    top_n: int = 8

    def top(self, group):
        return self.importance[group][: self.top_n]

    def to_dict(self):
        return {
            "top_n": self.top_n,
            "groups": {g: [{"feature": f, "mean_abs_shap": v} for f, v in items]
                       for g, items in self.importance.items()},
            "top": {g: [f for f, _ in self.top(g)] for g in self.importance},
        }


def rank_factors(shap, manifest, top_n=8):
    """Mean |SHAP| per feature, split by group and sorted descending.

    ``shap`` may be one :class:`ShapMatrix` or a list (one per class), in
    which case importances are averaged over classes.  Equal importances keep
    manifest order.
    """
    mats = shap if isinstance(shap, (list, tuple)) else [shap]
    if not mats or not len(mats[0].values):
        raise ValueError("no SHAP values to rank")
    imp = np.mean([m.mean_abs() for m in mats], axis=0)
    manifest = as_manifest(manifest)
    groups = {}
    for j, f in enumerate(manifest):
        groups.setdefault(f.group, []).append((j, f.name))
    out = {}
    for g in sorted(groups):
        items = sorted(groups[g], key=lambda t: (-imp[t[0]], t[0]))
        out[g] = [(name, float(imp[j])) for j, name in items]
    return FactorRanking(out, top_n)


def category_effects(shap, rows, feature, manifest):
    """Mean SHAP of a categorical feature per raw subcategory.

    Returns ``{subcategory: {"mean": float, "count": int}}`` in sorted order;
    subcategories absent from ``rows`` are omitted.
    """
    kinds = {f.name: f.kind for f in as_manifest(manifest)}
    if feature not in kinds:
        raise KeyError(f"unknown feature {feature!r}")
    if kinds[feature] != "categorical":
        raise ValueError(f"feature {feature!r} is not categorical")
    j = shap.features.index(feature)
    raw = pd.Series(rows[feature].to_numpy(), dtype=object).fillna("unknown").astype(str)
    g = pd.Series(shap.values[:, j]).groupby(raw.to_numpy(), sort=True)
    return {str(k): {"mean": float(m), "count": int(c)}
            for (k, m), c in zip(g.mean().items(), g.size().to_numpy())}


def _encoded_grid(model, feature, grid):
    f = next(f for f in model.manifest if f.name == feature)
    if f.kind == "categorical":
        return model.encodings[feature].transform(np.asarray(grid, dtype=object))
    return np.asarray(grid, dtype=float)


def feature_grid(values, n_points):
    """Evenly spaced grid over the observed range (or the sorted categories)."""
    s = pd.Series(values)
    if s.dtype == object:
        return sorted(s.dropna().astype(str).unique())[:n_points]
    v = pd.to_numeric(s, errors="coerce").dropna().to_numpy(float)
    if v.size == 0:
        raise ValueError("no observed values for grid")
    return list(np.unique(np.linspace(v.min(), v.max(), n_points)))


def _expected_class(model, X):
    P = softmax(model.margins_from_matrix(X))
    return P @ np.arange(model.n_classes)


def pdp1(model, data, feature, grid):
    """Mean expected class index with ``feature`` fixed at each grid value."""
    if len(data) == 0:
        raise ValueError("partial dependence needs at least one data row")
    X = model.encode(data)
    j = model.feature_names.index(feature)
    gx = _encoded_grid(model, feature, grid)
    out = np.empty(len(gx))
    for i, v in enumerate(gx):
        Xi = X.copy()
        Xi[:, j] = v
        out[i] = _expected_class(model, Xi).mean()
    return out


def pdp2(model, data, fx, fy, grid_x, grid_y):
    """Two-factor partial dependence of the expected class index.

    Cell ``(i, j)`` is the mean over ``data`` rows of ``sum_k k * p_k`` with
    ``fx`` set to ``grid_x[i]`` and ``fy`` set to ``grid_y[j]``.
    """
    if fx == fy:
        raise ValueError("pdp2 needs two distinct features")
    if len(data) == 0:
        raise ValueError("partial dependence needs at least one data row")
    X = model.encode(data)
    names = model.feature_names
    jx, jy = names.index(fx), names.index(fy)
    gx, gy = _encoded_grid(model, fx, grid_x), _encoded_grid(model, fy, grid_y)
    n = len(X)
    out = np.empty((len(gx), len(gy)))
    for i, vx in enumerate(gx):
        block = np.tile(X, (len(gy), 1))
        block[:, jx] = vx
        block[:, jy] = np.repeat(gy, n)
        e = _expected_class(model, block).reshape(len(gy), n)
        # sorted summation keeps the mean independent of row order
        out[i] = np.sort(e, axis=1).mean(axis=1)
    return out


def shap_long(shap_mats, rows, feature_names=None):
    """Long table ``row_id, feature, value, shap, class`` for beeswarm plots."""
    frames = []
    for m in shap_mats:
        names = feature_names or m.features
        n = len(m.values)
        raw = {f: rows[f].to_numpy() for f in names}
        frames.append(pd.DataFrame({
            "row_id": np.repeat(np.arange(n), len(names)),
            "feature": np.tile(np.asarray(names, dtype=object), n),
            "value": np.stack([raw[f] for f in names], axis=1).ravel().astype(object),
            "shap": m.values.ravel(),
            "class": m.class_index,
        }))
    return pd.concat(frames, ignore_index=True)


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
