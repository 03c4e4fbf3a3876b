"""Bounded global minimisation of single-variable expressions.

A coarse grid locates the basins, then Brent's bounded method polishes the
best few grid minima.  Affine expressions short-circuit to the endpoints.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import fminbound

from ..errors import ParameterError
from .expr import Expr, Func

__all__ = ["DEFAULT_GRID", "minimize_expr", "maximize_expr"]

DEFAULT_GRID = 256
X_RTOL = 1e-9
N_REFINE = 3


def _check_bounds(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ParameterError(f"bounds must be finite, got [{lo}, {hi}]")
    if lo > hi:
        raise ParameterError(f"lower bound {lo} exceeds upper bound {hi}")


def minimize_expr(e: Expr, lo: float, hi: float, grid: int = DEFAULT_GRID) -> tuple[float, float]:
    """Return ``(argmin, min)`` of ``e`` over ``[lo, hi]``.

    Evaluation errors anywhere on the grid propagate as :class:`EvalError`.
    """
    _check_bounds(lo, hi)
    lo, hi = float(lo), float(hi)
    fn = e.fn
    if lo == hi:
        return lo, fn(lo)
    aff = e.affine
    if aff is not None:
        x = lo if aff[0] >= 0 else hi
        return x, fn(x)

    if grid < 2:
        raise ParameterError(f"grid needs at least 2 points, got {grid}")
    xs = np.linspace(lo, hi, grid)
    ys = e.vfn(xs)
    best = int(np.argmin(ys))
    best_x, best_y = float(xs[best]), float(ys[best])

    # Interior grid points that are no worse than both neighbours seed the polish.
    inner = ys[1:-1]
    local = np.flatnonzero((inner <= ys[:-2]) & (inner <= ys[2:])) + 1
    seeds = local[np.argsort(ys[local], kind="stable")][:N_REFINE]
    xtol = X_RTOL * max(1.0, abs(lo), abs(hi))
    for i in seeds:
        a, b = float(xs[i - 1]), float(xs[i + 1])
        x = float(fminbound(fn, a, b, xtol=xtol, disp=0))
        y = fn(x)
        if y < best_y:
            best_x, best_y = x, y
    return best_x, best_y


def maximize_expr(e: Expr, lo: float, hi: float, grid: int = DEFAULT_GRID) -> tuple[float, float]:
    """Return ``(argmax, max)``; computed as the negated minimum of ``-e``."""
    x, y = minimize_expr(Func("neg", e), lo, hi, grid)
    return x, -y
