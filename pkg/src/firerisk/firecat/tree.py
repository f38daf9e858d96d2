"""Depth-limited regression trees grown on binned features.

Split search accumulates gradient/hessian histograms per node and scores
every bin boundary, with missing values sent to whichever side gains more.
"""

from dataclasses import dataclass

import numba
import numpy as np


@numba.njit(cache=True)
def _histograms(binned, slot, g, h, n_slots, n_bins):
    n, n_feat = binned.shape
    hist = np.zeros((n_slots, n_feat, n_bins, 3))
    for i in range(n):
        s = slot[i]
        if s < 0:
            continue
        gi = g[i]
        hi = h[i]
        for f in range(n_feat):
            b = binned[i, f]
            hist[s, f, b, 0] += gi
            hist[s, f, b, 1] += hi
            hist[s, f, b, 2] += 1.0
    return hist


@numba.njit(cache=True)
def _best_splits(hist, n_real, reg_lambda, min_leaf, min_hess):
    n_slots, n_feat, n_bins, _ = hist.shape
    miss = n_bins - 1
    best_gain = np.full(n_slots, -np.inf)
    best_feat = np.full(n_slots, -1, dtype=np.int64)
    best_bin = np.zeros(n_slots, dtype=np.int64)
    best_left = np.zeros(n_slots, dtype=np.bool_)
    for s in range(n_slots):
        G = 0.0
        H = 0.0
        C = 0.0
        for b in range(n_bins):
            G += hist[s, 0, b, 0]
            H += hist[s, 0, b, 1]
            C += hist[s, 0, b, 2]
        parent = G * G / (H + reg_lambda)
        for f in range(n_feat):
            gm = hist[s, f, miss, 0]
            hm = hist[s, f, miss, 1]
            cm = hist[s, f, miss, 2]
            gl = 0.0
            hl = 0.0
            cl = 0.0
            for b in range(n_real[f] - 1):
                gl += hist[s, f, b, 0]
                hl += hist[s, f, b, 1]
                cl += hist[s, f, b, 2]
                for variant in range(2):
                    if variant == 1 and cm == 0:
                        continue
                    GL = gl + gm * variant
                    HL = hl + hm * variant
                    CL = cl + cm * variant
                    GR = G - GL
                    HR = H - HL
                    CR = C - CL
                    if CL < min_leaf or CR < min_leaf or HL < min_hess or HR < min_hess:
                        continue
                    gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
                    if gain > best_gain[s]:
                        best_gain[s] = gain
                        best_feat[s] = f
                        best_bin[s] = b
                        if cm == 0:
                            best_left[s] = CL >= CR
                        else:
                            best_left[s] = variant == 1
    return best_gain, best_feat, best_bin, best_left


@dataclass
class Tree:
    """Flat binary tree; ``feature < 0`` marks a leaf.  Rows go left when
    ``x <= threshold``; NaN follows ``default_left``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    default_left: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    def apply(self, X):
        """Leaf index reached by each row of ``X``."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            x = X[rows, np.where(inner, f, 0)]
            go_left = np.where(np.isnan(x), self.default_left[node], x <= self.threshold[node])
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_nested(self, names, i=0):
        if self.feature[i] < 0:
            return {"leaf": float(self.value[i]), "cover": float(self.cover[i])}
        return {
            "split": names[self.feature[i]],
            "threshold": float(self.threshold[i]),
            "default_left": bool(self.default_left[i]),
            "cover": float(self.cover[i]),
            "left": self.to_nested(names, int(self.left[i])),
            "right": self.to_nested(names, int(self.right[i])),
        }

    @classmethod
    def from_nested(cls, node, index_of):
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "default_left",
                                "value", "cover")}

        def visit(d):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(0)
            cols["cover"][i] = d["cover"]
            if "leaf" in d:
                cols["feature"][i] = -1
                cols["left"][i] = cols["right"][i] = -1
                cols["value"][i] = d["leaf"]
                cols["default_left"][i] = False
                return i
            cols["feature"][i] = index_of[d["split"]]
            cols["threshold"][i] = d["threshold"]
            cols["default_left"][i] = d["default_left"]
            cols["left"][i] = visit(d["left"])
            cols["right"][i] = visit(d["right"])
            return i

        visit(node)
        return cls(np.array(cols["feature"], dtype=np.int64), np.array(cols["threshold"], float),
                   np.array(cols["left"], dtype=np.int64), np.array(cols["right"], dtype=np.int64),
                   np.array(cols["default_left"], dtype=bool), np.array(cols["value"], float),
                   np.array(cols["cover"], float))


def make_cuts(x, max_bins):
    """Bin boundaries for one feature: midpoints between distinct values, or
    quantiles when there are more than ``max_bins`` of them."""
    v = x[~np.isnan(x)]
    if v.size == 0:
        return np.zeros(0)
    u = np.unique(v)
    if u.size <= max_bins:
        return (u[:-1] + u[1:]) / 2
    q = np.quantile(v, np.linspace(0, 1, max_bins + 1)[1:-1])
    return np.unique(q)


def bin_matrix(X, cuts, max_bins):
    """Bin index per cell; NaN goes to the reserved last bin ``max_bins``."""
    out = np.empty(X.shape, dtype=np.uint8)
    for f, c in enumerate(cuts):
        col = X[:, f]
        b = np.searchsorted(c, col, side="left")
        b[np.isnan(col)] = max_bins
        out[:, f] = b
    return out


def grow_tree(binned, cuts, g, h, max_depth, reg_lambda, min_samples_leaf, min_child_weight,
              learning_rate, max_bins):
    """Grow one tree level by level on gradients ``g`` and hessians ``h``.

    Leaf values are the regularized Newton step ``-G / (H + lambda)`` scaled
    by ``learning_rate``.  Returns the tree and the leaf index of every row.
    """
    n = len(g)
    n_real = np.array([len(c) + 1 for c in cuts], dtype=np.int64)
    feature, threshold, left, right, default_left = [-1], [0.0], [-1], [-1], [False]
    node_of_row = np.zeros(n, dtype=np.int64)
    active = [0]
    slot = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for _ in range(max_depth):
        if not active:
            break
        hist = _histograms(binned, slot, g, h, len(active), max_bins + 1)
        gain, feat, bbin, dleft = _best_splits(hist, n_real, reg_lambda, float(min_samples_leaf),
                                               min_child_weight)
        split_feat = np.full(len(active), -1, dtype=np.int64)
        child_l = np.full(len(active), -1, dtype=np.int64)
        child_r = np.full(len(active), -1, dtype=np.int64)
        new_active = []
        for s, node in enumerate(active):
            if feat[s] < 0 or not gain[s] > 0:
                continue
            f = int(feat[s])
            feature[node] = f
            threshold[node] = float(cuts[f][bbin[s]])
            default_left[node] = bool(dleft[s])
            for side in (left, right):
                side[node] = len(feature)
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                default_left.append(False)
            split_feat[s] = f
            child_l[s] = len(new_active)
            child_r[s] = len(new_active) + 1
            new_active += [left[node], right[node]]
        live = slot >= 0
        live[live] = split_feat[slot[live]] >= 0
        new_slot = np.full(n, -1, dtype=np.int64)
        if live.any():
            s_live = slot[live]
            b = binned[rows[live], split_feat[s_live]].astype(np.int64)
            go_left = np.where(b == max_bins, dleft[s_live], b <= bbin[s_live])
            new_slot[live] = np.where(go_left, child_l[s_live], child_r[s_live])
            arr = np.asarray(new_active)
            node_of_row[live] = arr[new_slot[live]]
        slot = new_slot
        active = new_active

    n_nodes = len(feature)
    G = np.bincount(node_of_row, weights=g, minlength=n_nodes)
    H = np.bincount(node_of_row, weights=h, minlength=n_nodes)
    cover = np.bincount(node_of_row, minlength=n_nodes).astype(float)
    feature = np.array(feature, dtype=np.int64)
    left = np.array(left, dtype=np.int64)
    right = np.array(right, dtype=np.int64)
    # inner-node cover accumulates bottom-up (children always have larger ids)
    for i in range(n_nodes - 1, -1, -1):
        if feature[i] >= 0:
            cover[i] = cover[left[i]] + cover[right[i]]
    value = np.where(feature < 0, -G / (H + reg_lambda) * learning_rate, 0.0)
    tree = Tree(feature, np.array(threshold, float), left, right,
                np.array(default_left, dtype=bool), value, cover)
    return tree, node_of_row


@numba.njit(cache=True)
def _forest_sum(X, feature, threshold, left, right, default_left, value, offsets):
    n = X.shape[0]
    out = np.zeros(n)
    for t in range(len(offsets) - 1):
        base = offsets[t]
        for r in range(n):
            node = 0
            while feature[base + node] >= 0:
                i = base + node
                v = X[r, feature[i]]
                if np.isnan(v):
                    go_left = default_left[i]
                else:
                    go_left = v <= threshold[i]
                node = left[i] if go_left else right[i]
            out[r] += value[base + node]
    return out


def forest_predict(trees, X):
    """Summed output of ``trees`` for each row of ``X`` (same order as adding
    the trees one by one)."""
    X = np.ascontiguousarray(X, dtype=float)
    if not trees:
        return np.zeros(X.shape[0])
    cat = lambda name: np.concatenate([getattr(t, name) for t in trees])
    offsets = np.cumsum([0] + [t.n_nodes for t in trees]).astype(np.int64)
    return _forest_sum(X, cat("feature").astype(np.int64), cat("threshold").astype(float),
                       cat("left").astype(np.int64), cat("right").astype(np.int64),
                       cat("default_left").astype(np.bool_), cat("value").astype(float), offsets)
