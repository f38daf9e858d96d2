"""Gamma / log-link additive models fitted by penalized IRLS.

The linear predictor is an intercept, treatment-coded state fixed effects
and one penalized cubic B-spline smooth per covariate.  Smoothing
parameters are chosen by GCV on a log-spaced grid, one term at a time.
"""

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg, stats

from ..errors import ConfigError, FamilyError, RankError
from ..geo import MONTH_SEASON, REGION_MAP, REGIONS, SEASON_MONTHS
from .basis import bspline_basis, difference_penalty, sum_to_zero, uniform_knots

logger = logging.getLogger(__name__)

_ETA_CLIP = 700.0


@dataclass
class ModelSpec:
    terms: list
    response: str = "rate"
    state_col: str = "state"
    k: int = 10
    degree: int = 3
    lambda_grid: tuple = (-4.0, 4.0, 25)
    max_iter: int = 200
    tol: float = 1e-8
    max_outer: int = 20
    fixed_lambda: dict = None

    @classmethod
    def from_config(cls, gam_cfg, **kw):
        grid = gam_cfg.get("lambda_grid", {})
        return cls(
            terms=list(gam_cfg["terms"]),
            k=int(gam_cfg.get("k", 10)),
            lambda_grid=(float(grid.get("low", -4)), float(grid.get("high", 4)),
                         int(grid.get("n", 25))),
            max_iter=int(gam_cfg.get("max_iter", 200)),
            tol=float(gam_cfg.get("tol", 1e-8)),
            **kw,
        )


@dataclass
class SmoothTerm:
    name: str
    center: float
    scale: float
    knots: np.ndarray
    degree: int
    k: int
    constraint: np.ndarray  # k x (k-1)
    penalty: np.ndarray  # (k-1) x (k-1), already rescaled
    x_range: tuple
    lam: float = 1.0
    coef: np.ndarray = None
    edf: float = float("nan")

    def raw_basis(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.scale
        lo, hi = self.knots[self.degree], self.knots[self.k]
        # evaluation beyond the training range holds the boundary value
        return bspline_basis(np.clip(z, lo, hi), self.knots, self.degree)

    def design(self, x):
        return self.raw_basis(x) @ self.constraint

    def effect(self, x):
        return self.design(x) @ self.coef

    def to_dict(self):
        return {
            "name": self.name, "center": self.center, "scale": self.scale,
            "knots": self.knots.tolist(), "degree": self.degree, "k": self.k,
            "constraint": self.constraint.tolist(), "penalty": self.penalty.tolist(),
            "x_range": list(self.x_range), "lambda": self.lam,
            "coef": self.coef.tolist(), "edf": self.edf,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], d["center"], d["scale"], np.array(d["knots"]), d["degree"], d["k"],
                   np.array(d["constraint"]), np.array(d["penalty"]), tuple(d["x_range"]),
                   d["lambda"], np.array(d["coef"]), d["edf"])


@dataclass
class GamFit:
    intercept: float
    state_effects: dict
    reference_state: str
    terms: list
    dispersion: float
    deviance: float
    edf_total: float
    gcv: float
    n: int
    convergence: dict
    cov: np.ndarray
    response: str = "rate"
    state_col: str = "state"
    label: str = "national"

    @property
    def edf(self):
        return {t.name: t.edf for t in self.terms}

    def term(self, name):
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(f"no smooth term named {name!r}")

    def linear_predictor(self, data):
        eta = np.full(len(data), self.intercept)
        if self.state_effects:
            s = data[self.state_col].astype(str).map(self.state_effects)
            eta = eta + s.fillna(0.0).to_numpy()
        for t in self.terms:
            eta = eta + t.effect(data[t.name].to_numpy(dtype=float))
        return eta

    def predict(self, data):
        return np.exp(np.clip(self.linear_predictor(data), -_ETA_CLIP, _ETA_CLIP))

    def to_dict(self):
        return {
            "label": self.label,
            "family": "gamma", "link": "log",
            "response": self.response, "state_col": self.state_col,
            "intercept": self.intercept,
            "reference_state": self.reference_state,
            "state_effects": dict(sorted(self.state_effects.items())),
            "terms": [t.to_dict() for t in self.terms],
            "dispersion": self.dispersion, "deviance": self.deviance,
            "edf_total": self.edf_total, "gcv": self.gcv, "n": self.n,
            "convergence": self.convergence,
            "cov": self.cov.tolist(),
            "diagnostics": [d.to_dict() for d in term_significance(self)],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(d["intercept"], d["state_effects"], d["reference_state"],
                   [SmoothTerm.from_dict(t) for t in d["terms"]], d["dispersion"], d["deviance"],
                   d["edf_total"], d["gcv"], d["n"], d["convergence"], np.array(d["cov"]),
                   d["response"], d["state_col"], d.get("label", "national"))


@dataclass
class TermDiagnostic:
    term: str
    statistic: float
    p_value: float
    stars: str
    rank: int
    edf: float
    ref_df: int

    def to_dict(self):
        return dict(self.__dict__)


def gamma_deviance(y, mu):
    return float(2.0 * np.sum((y - mu) / mu - np.log(y / mu)))


def significance_stars(p):
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


class _Design:
    """Model matrix, penalty blocks and column bookkeeping for one fit."""

    def __init__(self, data, spec):
        self.spec = spec
        n = len(data)
        cols = [np.ones((n, 1))]
        self.names = ["(intercept)"]
        self.blocks = {}
        start = 1

        self.states = []
        self.reference = None
        if spec.state_col and spec.state_col in data.columns:
            st = data[spec.state_col].astype(str)
            levels = sorted(st.unique())
            self.reference = levels[0]
            self.states = levels[1:]
            if self.states:
                dummies = (st.to_numpy()[:, None] == np.array(self.states)[None, :]).astype(float)
                cols.append(dummies)
                self.blocks["state"] = slice(start, start + len(self.states))
                start += len(self.states)
                self.names += [f"state[{s}]" for s in self.states]

        self.terms = []
        for name in spec.terms:
            if name not in data.columns:
                raise ConfigError(f"model term {name!r} not found in data")
            x = data[name].to_numpy(dtype=float)
            if not np.all(np.isfinite(x)):
                raise FamilyError(f"covariate {name!r} has non-finite values")
            sd = x.std()
            if not sd > 0:
                raise RankError(f"covariate {name!r} is constant; its smooth is not identifiable",
                                term=name)
            center = x.mean()
            z = (x - center) / sd
            knots = uniform_knots(z.min(), z.max(), spec.k, spec.degree)
            B = bspline_basis(z, knots, spec.degree)
            Z = sum_to_zero(B)
            Xj = B @ Z
            S = Z.T @ difference_penalty(spec.k) @ Z
            S *= np.linalg.norm(Xj.T @ Xj) / np.linalg.norm(S)
            term = SmoothTerm(name, float(center), float(sd), knots, spec.degree, spec.k, Z, S,
                              (float(x.min()), float(x.max())))
            self.terms.append(term)
            cols.append(Xj)
            self.blocks[name] = slice(start, start + Xj.shape[1])
            start += Xj.shape[1]
            self.names += [f"s({name}).{i}" for i in range(Xj.shape[1])]
        self.X = np.hstack(cols)
        self.p = self.X.shape[1]

    def penalty(self, lams):
        S = np.zeros((self.p, self.p))
        for t, lam in zip(self.terms, lams):
            sl = self.blocks[t.name]
            S[sl, sl] = lam * t.penalty
        return S

    def offending_term(self, A, S):
        """Name of the block whose removal makes the penalized system definite."""
        M = A + S
        for name, sl in self.blocks.items():
            keep = np.ones(self.p, bool)
            keep[sl] = False
            try:
                linalg.cho_factor(M[np.ix_(keep, keep)])
                return name
            except linalg.LinAlgError:
                continue
        return None


def _cho(M, design, A, S):
    try:
        return linalg.cho_factor(M)
    except linalg.LinAlgError:
        term = design.offending_term(A, S)
        raise RankError(f"penalized system is singular (offending term: {term})", term=term) from None


def _pirls(X, y, S, beta, max_iter, tol, design, A):
    """Fisher scoring with step halving on deviance + beta' S beta.

    For the Gamma family with log link the IRLS weights are identically 1,
    so X'WX = X'X is fixed across iterations.
    """
    def objective(b):
        eta = np.clip(X @ b, -_ETA_CLIP, _ETA_CLIP)
        mu = np.exp(eta)
        dev = gamma_deviance(y, mu)
        return dev + float(b @ S @ b), dev, eta, mu

    pen, dev, eta, mu = objective(beta)
    pen_trace, dev_trace = [pen], [dev]
    cho = _cho(A + S, design, A, S)
    change = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        z = eta + (y - mu) / mu
        target = linalg.cho_solve(cho, X.T @ z)
        step = 1.0
        accepted = False
        for _ in range(40):
            trial = beta + step * (target - beta)
            t_pen, t_dev, t_eta, t_mu = objective(trial)
            if np.isfinite(t_pen) and t_pen <= pen:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            change = 0.0
            converged = True
            break
        change = abs(pen - t_pen) / (abs(t_pen) + 0.1)
        beta, pen, dev, eta, mu = trial, t_pen, t_dev, t_eta, t_mu
        pen_trace.append(pen)
        dev_trace.append(dev)
        if change < tol:
            converged = True
            break
    return beta, mu, {
        "iterations": it, "final_change": float(change), "converged": bool(converged),
        "penalized_deviance": [float(v) for v in pen_trace],
        "deviance": [float(v) for v in dev_trace],
    }


def _select_lambdas(A, b, c, n, design, lams, grid):
    """Coordinate descent over the grid minimising working-model GCV."""
    def gcv(lv):
        S = design.penalty(lv)
        M = A + S
        try:
            cho = linalg.cho_factor(M)
        except linalg.LinAlgError:
            return np.inf
        beta = linalg.cho_solve(cho, b)
        rss = c - 2 * beta @ b + beta @ A @ beta
        tau = np.trace(linalg.cho_solve(cho, A))
        if tau >= n:
            return np.inf
        return n * max(rss, 0.0) / (n - tau) ** 2

    idx = [int(np.argmin(np.abs(np.log10(grid) - np.log10(l)))) for l in lams]
    best = gcv([grid[i] for i in idx])
    for _ in range(5):
        moved = False
        for j in range(len(idx)):
            scores = []
            for g in range(len(grid)):
                trial = list(idx)
                trial[j] = g
                scores.append(gcv([grid[i] for i in trial]))
            g_best = int(np.argmin(scores))
            if scores[g_best] < best and g_best != idx[j]:
                idx[j] = g_best
                best = scores[g_best]
                moved = True
        if not moved:
            break
    return [float(grid[i]) for i in idx]


def fit_gam(data, spec, label="national"):
    """Fit a Gamma/log-link additive model with state fixed effects.

    Parameters
    ----------
    data : DataFrame
        One row per observation with the response, the state column and
        every smooth covariate.
    spec : ModelSpec

    Returns
    -------
    GamFit
    """
    y = data[spec.response].to_numpy(dtype=float)
    if y.size == 0:
        raise FamilyError("no observations to fit")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise FamilyError("Gamma family needs strictly positive, finite responses")
    design = _Design(data, spec)
    X, n, p = design.X, len(y), design.p
    if n < 10 * p:
        logger.warning("%s: %d observations for %d coefficients (< 10 per coefficient)", label, n, p)
    A = X.T @ X

    lo, hi, npts = spec.lambda_grid
    grid = np.logspace(lo, hi, int(npts))
    if spec.fixed_lambda is not None:
        lams = [float(spec.fixed_lambda.get(t.name, 1.0)) for t in design.terms]
    else:
        lams = [1.0] * len(design.terms)

    null = np.zeros(p)
    null[0] = np.log(y.mean())
    beta = null
    history = []
    for outer in range(1, spec.max_outer + 1):
        S = design.penalty(lams)
        beta, mu, record = _pirls(X, y, S, beta, spec.max_iter, spec.tol, design, A)
        history.append(list(lams))
        if spec.fixed_lambda is not None or not design.terms:
            break
        eta = np.log(mu)
        z = eta + (y - mu) / mu
        new = _select_lambdas(A, X.T @ z, float(z @ z), n, design, lams, grid)
        if new == lams:
            break
        lams = new
    if outer > 1:
        # warm starts speed up the lambda search; the reported fit restarts from
        # the null model so its trace starts at the null deviance
        beta, mu, record = _pirls(X, y, design.penalty(lams), null, spec.max_iter, spec.tol,
                                  design, A)
    record["outer_iterations"] = outer
    record["lambda_history"] = history

    S = design.penalty(lams)
    cho = _cho(A + S, design, A, S)
    Minv = linalg.cho_solve(cho, np.eye(p))
    F = Minv @ A
    edf_all = np.diag(F)
    tau = float(edf_all.sum())
    dev = gamma_deviance(y, mu)
    dispersion = float(np.sum(((y - mu) / mu) ** 2) / max(n - tau, 1.0))
    for t, lam in zip(design.terms, lams):
        sl = design.blocks[t.name]
        t.lam = lam
        t.coef = beta[sl].copy()
        t.edf = float(edf_all[sl].sum())
    states = {design.reference: 0.0} if design.reference is not None else {}
    if "state" in design.blocks:
        for s, v in zip(design.states, beta[design.blocks["state"]]):
            states[s] = float(v)
    return GamFit(
        intercept=float(beta[0]), state_effects=states, reference_state=design.reference,
        terms=design.terms, dispersion=dispersion, deviance=dev, edf_total=tau,
        gcv=float(n * dev / (n - tau) ** 2), n=n, convergence=record,
        cov=dispersion * Minv, response=spec.response, state_col=spec.state_col, label=label,
    )


def partial_dependence(fit, term, grid):
    """Centered smooth effect (log scale) of ``term`` at original-scale ``grid``."""
    t = fit.term(term)
    x = np.atleast_1d(np.asarray(grid, dtype=float))
    return pd.DataFrame({"term": term, "x": x, "effect": t.effect(x)})


def _block(fit, name):
    start = 1 + sum(1 for s in fit.state_effects if s != fit.reference_state)
    for t in fit.terms:
        width = t.constraint.shape[1]
        if t.name == name:
            return slice(start, start + width)
        start += width
    raise KeyError(name)


def term_significance(fit):
    """Wald-type test of each smooth against zero.

    The statistic uses the penalized (Bayesian) covariance truncated to
    rank ``round(edf)``; p-values come from an F reference distribution with
    residual degrees of freedom ``n - edf_total``.  Results are ranked by
    the F statistic, largest first.
    """
    out = []
    df2 = max(fit.n - fit.edf_total, 1.0)
    for t in fit.terms:
        sl = _block(fit, t.name)
        V = fit.cov[sl, sl]
        b = t.coef
        r = int(min(max(1, round(t.edf)), len(b)))
        w, U = np.linalg.eigh(V)
        order = np.argsort(w)[::-1][:r]
        w, U = w[order], U[:, order]
        keep = w > w.max() * 1e-12 if w.size and w.max() > 0 else np.zeros(0, bool)
        proj = U[:, keep].T @ b
        stat = float(np.sum(proj ** 2 / w[keep])) / r if keep.any() else 0.0
        pval = float(stats.f.sf(stat, r, df2))
        out.append(TermDiagnostic(t.name, stat, pval, significance_stars(pval), 0, t.edf, r))
    out.sort(key=lambda d: -d.statistic)
    for i, d in enumerate(out, 1):
        d.rank = i
    return out


class StratifiedFits(dict):
    """Stratum -> GamFit; skipped strata are listed in ``warnings``."""

    def __init__(self):
        super().__init__()
        self.warnings = {}


def strata(data, stratifier, region_map=None, month_col="month", state_col="state"):
    if stratifier == "season":
        keys = data[month_col].astype(int).map(MONTH_SEASON)
        names = list(SEASON_MONTHS)
    elif stratifier == "region":
        region_map = REGION_MAP if region_map is None else region_map
        st = data[state_col].astype(str)
        unknown = sorted(set(st) - set(region_map))
        if unknown:
            raise ConfigError(f"states missing from region map: {unknown}")
        keys = st.map(region_map)
        names = list(dict.fromkeys([*REGIONS, *sorted(set(region_map.values()))]))
        names = [r for r in names if r in set(region_map.values())]
    else:
        raise ConfigError(f"unknown stratifier {stratifier!r}")
    return keys, names


def fit_stratified(data, stratifier, spec, region_map=None, month_col="month"):
    """Refit ``spec`` separately on each season or region subset."""
    keys, names = strata(data, stratifier, region_map, month_col, spec.state_col)
    out = StratifiedFits()
    for name in names:
        subset = data[keys.to_numpy() == name]
        if len(subset) == 0:
            msg = f"{stratifier} stratum {name!r} has no rows; skipped"
            out.warnings[name] = msg
            warnings.warn(msg, stacklevel=2)
            continue
        try:
            out[name] = fit_gam(subset.reset_index(drop=True), spec, label=f"{stratifier}_{name}")
        except RankError as exc:
            msg = f"{stratifier} stratum {name!r} could not be fitted ({exc}); skipped"
            out.warnings[name] = msg
            warnings.warn(msg, stacklevel=2)
    return out
