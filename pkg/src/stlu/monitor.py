"""Strong and weak STL-U satisfaction over flowpipes, boolean STL over traces.

Strong satisfaction asks that every value inside the confidence interval
satisfies an atom, weak satisfaction that some value does.  Negation swaps
the two.  Temporal operators quantify over the closed integer window
``[t + lo, t + hi]``; the left operand of ``until`` is checked on the open
range ``(t, t')``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import Flowpipe, Trace, _quantile
from .errors import ConfidenceRequiredError, EvalError, HorizonError, ShapeError
from .formula.nodes import (Always, And, Atom, Eventually, Formula, Not, Or, Until,
                            horizon, to_text)
from .formula.optimize import DEFAULT_GRID, maximize_expr, minimize_expr

__all__ = ["Verdict", "strong_sat", "weak_sat", "trace_sat", "verdict", "check_horizon",
           "atom_holds"]


@dataclass(frozen=True)
class Verdict:
    strong: bool
    weak: bool

    def __post_init__(self):
        if self.strong and not self.weak:
            raise AssertionError("strong satisfaction without weak satisfaction")


def check_horizon(phi: Formula, signal, t: int) -> None:
    """Raise :class:`HorizonError` unless ``phi`` can be evaluated at ``t``."""
    need = horizon(phi)
    if t < signal.start or t + need > signal.end:
        raise HorizonError(
            f"insufficient horizon: evaluating at t={t} needs timestamps {t}..{t + need} "
            f"({need + 1} steps), signal covers {signal.start}..{signal.end}",
            required=need + 1,
        )


def atom_holds(expr, mean: float, spread: float, eps: float, strong: bool,
               grid: int = DEFAULT_GRID) -> bool:
    """Atom verdict on the interval ``mean +- quantile(eps) * spread``."""
    half = _quantile(float(eps)) * spread
    lo, hi = mean - half, mean + half
    if lo == hi:
        return expr.fn(mean) > 0
    if strong:
        return minimize_expr(expr, lo, hi, grid)[1] > 0
    return maximize_expr(expr, lo, hi, grid)[1] > 0


class _FlowpipeMonitor:
    """One evaluation session; memoises per (node, t, mode)."""

    def __init__(self, fp: Flowpipe, eps: float | None, grid: int):
        self.fp = fp
        self.eps = eps
        self.grid = grid
        self.memo = {}

    def atom(self, atom: Atom, t: int, strong: bool) -> bool:
        eps = atom.conf if atom.conf is not None else self.eps
        if eps is None:
            raise ConfidenceRequiredError(
                f"atom {to_text(atom)} has no confidence level; annotate it or pass eps")
        var = atom.variable
        if var not in self.fp.variables:
            raise ShapeError(f"flowpipe has no variable {var!r}")
        i = t - self.fp.start
        mean = float(self.fp.mean(var)[i])
        spread = float(self.fp.effective_std(var)[i])
        try:
            return atom_holds(atom.expr, mean, spread, eps, strong, self.grid)
        except EvalError as exc:
            raise exc.at(t, to_text(atom)) from None

    def sat(self, phi: Formula, t: int, strong: bool) -> bool:
        key = (id(phi), t, strong)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        result = self._sat(phi, t, strong)
        self.memo[key] = result
        return result

    def _sat(self, phi, t, strong):
        if isinstance(phi, Atom):
            return self.atom(phi, t, strong)
        if isinstance(phi, Not):
            return not self.sat(phi.arg, t, not strong)
        if isinstance(phi, And):
            return self.sat(phi.left, t, strong) and self.sat(phi.right, t, strong)
        if isinstance(phi, Or):
            return self.sat(phi.left, t, strong) or self.sat(phi.right, t, strong)
        lo, hi = phi.interval.lo, phi.interval.hi
        if isinstance(phi, Always):
            return all(self.sat(phi.arg, t + k, strong) for k in range(lo, hi + 1))
        if isinstance(phi, Eventually):
            return any(self.sat(phi.arg, t + k, strong) for k in range(lo, hi + 1))
        if isinstance(phi, Until):
            for k in range(lo, hi + 1):
                tp = t + k
                if self.sat(phi.right, tp, strong) and all(
                        self.sat(phi.left, s, strong) for s in range(t + 1, tp)):
                    return True
            return False
        raise TypeError(f"not a formula: {phi!r}")


def strong_sat(phi: Formula, fp: Flowpipe, t: int = 0, eps: float | None = None,
               grid: int = DEFAULT_GRID) -> bool:
    """Whether every trace inside the ``eps`` confidence band satisfies ``phi``.

    ``eps`` fills in atoms whose confidence level is unspecified.
    """
    check_horizon(phi, fp, t)
    return _FlowpipeMonitor(fp, eps, grid).sat(phi, t, True)


def weak_sat(phi: Formula, fp: Flowpipe, t: int = 0, eps: float | None = None,
             grid: int = DEFAULT_GRID) -> bool:
    """Whether some value inside the confidence band satisfies ``phi``."""
    check_horizon(phi, fp, t)
    return _FlowpipeMonitor(fp, eps, grid).sat(phi, t, False)


def verdict(phi: Formula, fp: Flowpipe, t: int = 0, eps: float | None = None,
            grid: int = DEFAULT_GRID) -> Verdict:
    """Strong and weak satisfaction computed in one shared session."""
    check_horizon(phi, fp, t)
    mon = _FlowpipeMonitor(fp, eps, grid)
    return Verdict(mon.sat(phi, t, True), mon.sat(phi, t, False))


def trace_sat(phi: Formula, trace: Trace, t: int = 0) -> bool:
    """Classical boolean satisfaction; confidence annotations are ignored."""
    check_horizon(phi, trace, t)
    memo = {}

    def sat(node, s):
        key = (id(node), s)
        if key in memo:
            return memo[key]
        if isinstance(node, Atom):
            var = node.variable
            if var not in trace.variables:
                raise ShapeError(f"trace has no variable {var!r}")
            try:
                out = node.expr.fn(float(trace.values(var)[s - trace.start])) > 0
            except EvalError as exc:
                raise exc.at(s, to_text(node)) from None
        elif isinstance(node, Not):
            out = not sat(node.arg, s)
        elif isinstance(node, And):
            out = sat(node.left, s) and sat(node.right, s)
        elif isinstance(node, Or):
            out = sat(node.left, s) or sat(node.right, s)
        elif isinstance(node, Always):
            out = all(sat(node.arg, s + k) for k in range(node.interval.lo, node.interval.hi + 1))
        elif isinstance(node, Eventually):
            out = any(sat(node.arg, s + k) for k in range(node.interval.lo, node.interval.hi + 1))
        elif isinstance(node, Until):
            out = any(
                sat(node.right, s + k) and all(sat(node.left, u) for u in range(s + 1, s + k))
                for k in range(node.interval.lo, node.interval.hi + 1))
        else:
            raise TypeError(f"not a formula: {node!r}")
        memo[key] = out
        return out

    return sat(phi, t)
