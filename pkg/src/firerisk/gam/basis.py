"""B-spline bases and difference penalties."""

import numpy as np


class BasisError(ValueError):
    pass


def bspline_basis(x, knots, degree=3):
    """Evaluate all B-splines of ``degree`` on ``knots`` at ``x``.

    Uses the Cox-de Boor recursion.  The valid domain is
    ``[knots[degree], knots[-degree - 1]]``; the right end belongs to the last
    non-empty interval so clamped bases reach 1 there.

    Returns
    -------
    ndarray, shape (len(x), len(knots) - degree - 1)
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.asarray(knots, dtype=float)
    if np.any(np.diff(t) < 0):
        raise BasisError("knots must be non-decreasing")
    n_basis = len(t) - degree - 1
    if n_basis < 1:
        raise BasisError("too few knots for the requested degree")
    lo, hi = t[degree], t[n_basis]
    span = hi - lo
    tol = 1e-12 * max(span, 1.0)
    if np.any(~np.isfinite(x)) or np.any(x < lo - tol) or np.any(x > hi + tol):
        raise BasisError(f"x outside basis domain [{lo}, {hi}]")
    x = np.clip(x, lo, hi)

    last = np.searchsorted(t, hi, side="left") - 1
    idx = np.searchsorted(t, x, side="right") - 1
    idx = np.clip(idx, degree, last)
    B = np.zeros((x.size, len(t) - 1))
    B[np.arange(x.size), idx] = 1.0
    for d in range(1, degree + 1):
        m = len(t) - 1 - d
        left_den = t[d:d + m] - t[:m]
        right_den = t[d + 1:d + 1 + m] - t[1:1 + m]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(left_den > 0, (x[:, None] - t[:m]) / left_den, 0.0)
            b = np.where(right_den > 0, (t[d + 1:d + 1 + m] - x[:, None]) / right_den, 0.0)
        B = a * B[:, :m] + b * B[:, 1:m + 1]
    return B


def uniform_knots(lo, hi, k, degree=3):
    """Equally spaced knots giving ``k`` basis functions on ``[lo, hi]``."""
    nseg = k - degree
    if nseg < 1:
        raise BasisError(f"basis dimension {k} too small for degree {degree}")
    dx = (hi - lo) / nseg
    return lo + dx * np.arange(-degree, nseg + degree + 1)


def difference_penalty(k, order=2):
    D = np.diff(np.eye(k), n=order, axis=0)
    return D.T @ D


def sum_to_zero(B):
    """Null-space basis Z of the column-sum constraint ``1' B beta = 0``."""
    c = B.sum(axis=0)[:, None]
    q, _ = np.linalg.qr(c, mode="complete")
    return q[:, 1:]
