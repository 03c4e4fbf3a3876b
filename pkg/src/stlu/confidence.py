"""Confidence-level guarantee ranges for strong and weak satisfaction.

Ranges are finite unions of subintervals of (0, 1), held in
:class:`IntervalSet`.  For an atom ``f(x) > 0`` at a Gaussian with mean
``m`` and spread ``s = std / sqrt(N)``, let ``eta`` be the distance from
``m`` to the nearest violating (strong) or satisfying (weak) point; the
guarantee is ``(0, erf(eta / (s sqrt 2)))`` for strong satisfaction and
``(erf(eta / (s sqrt 2)), 1)`` for weak satisfaction.  Connectives map to
set operations, and negation to the complement of the dual range.
"""
from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import Flowpipe, GaussianPoint, coverage
from .errors import EvalError, ParameterError, ShapeError
from .formula.expr import Expr
from .formula.nodes import Always, And, Atom, Eventually, Formula, Not, Or, Until, to_text
from .formula.optimize import DEFAULT_GRID, maximize_expr, minimize_expr
from .monitor import atom_holds, check_horizon

__all__ = [
    "Piece", "IntervalSet", "is_union", "is_intersect", "is_complement",
    "nearest_distance", "atom_strong_range", "atom_weak_range",
    "strong_range", "weak_range",
]

SCAN_STEPS = 64       # scan resolution, steps per effective std
SCAN_RADIUS = 12.0    # effective stds searched on each side of the mean
ETA_TOL = 1e-9        # bisection tolerance bound, in effective stds

_FLAGS = {(False, False): "oo", (False, True): "oc", (True, False): "co", (True, True): "cc"}


class Piece(NamedTuple):
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __contains__(self, x):
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    @property
    def empty(self):
        return self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed))

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{self.lo:g}, {self.hi:g}{']' if self.hi_closed else ')'}"


def _normalize(pieces: Iterable[Piece]) -> tuple[Piece, ...]:
    items = []
    for p in pieces:
        lo, hi, lc, hc = Piece(*p)
        if lo < 0.0:
            lo, lc = 0.0, True
        if hi > 1.0:
            hi, hc = 1.0, True
        p = Piece(float(lo), float(hi), bool(lc), bool(hc))
        if not p.empty:
            items.append(p)
    items.sort(key=lambda p: (p.lo, not p.lo_closed))
    merged: list[Piece] = []
    for p in items:
        if merged:
            q = merged[-1]
            if p.lo < q.hi or (p.lo == q.hi and (q.hi_closed or p.lo_closed)):
                if p.hi > q.hi:
                    merged[-1] = Piece(q.lo, p.hi, q.lo_closed, p.hi_closed)
                elif p.hi == q.hi and p.hi_closed and not q.hi_closed:
                    merged[-1] = Piece(q.lo, q.hi, q.lo_closed, True)
                continue
        merged.append(p)
    return tuple(merged)


class IntervalSet:
    """Normalised finite union of intervals inside [0, 1].

    Pieces are sorted, disjoint and non-adjacent; the empty tuple is the
    empty set.  Instances are immutable and compare by their pieces.
    """

    __slots__ = ("pieces",)

    def __init__(self, pieces: Iterable[Sequence] = ()):
        object.__setattr__(self, "pieces", _normalize(pieces))

    def __setattr__(self, name, value):
        raise AttributeError("IntervalSet is immutable")

    @classmethod
    def open(cls, lo: float, hi: float) -> "IntervalSet":
        return cls([Piece(lo, hi, False, False)])

    @classmethod
    def full(cls) -> "IntervalSet":
        """The open unit interval (0, 1)."""
        return cls.open(0.0, 1.0)

    @classmethod
    def empty_set(cls) -> "IntervalSet":
        return cls()

    def __bool__(self):
        return bool(self.pieces)

    @property
    def is_empty(self):
        return not self.pieces

    def __contains__(self, x):
        return any(x in p for p in self.pieces)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self.pieces == other.pieces

    def __hash__(self):
        return hash(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def __len__(self):
        return len(self.pieces)

    def __or__(self, other):
        return is_union(self, other)

    def __and__(self, other):
        return is_intersect(self, other)

    def __invert__(self):
        return is_complement(self)

    def sup(self) -> float:
        """Supremum; 0 for the empty set."""
        return self.pieces[-1].hi if self.pieces else 0.0

    def inf(self) -> float:
        """Infimum; 1 for the empty set."""
        return self.pieces[0].lo if self.pieces else 1.0

    def measure(self) -> float:
        return sum(p.hi - p.lo for p in self.pieces)

    def to_json(self) -> list:
        return [[p.lo, p.hi, _FLAGS[(p.lo_closed, p.hi_closed)]] for p in self.pieces]

    @classmethod
    def from_json(cls, data) -> "IntervalSet":
        inverse = {v: k for k, v in _FLAGS.items()}
        pieces = []
        for item in data:
            lo, hi, flags = item
            if flags not in inverse:
                raise ParameterError(f"bad endpoint flags {flags!r}")
            pieces.append(Piece(float(lo), float(hi), *inverse[flags]))
        return cls(pieces)

    def __repr__(self):
        return f"IntervalSet({list(self.pieces)!r})"

    def __str__(self):
        return " u ".join(str(p) for p in self.pieces) if self.pieces else "{}"


def is_union(*sets: IntervalSet) -> IntervalSet:
    return IntervalSet(p for s in sets for p in s.pieces)


def _intersect_pieces(p: Piece, q: Piece) -> Piece:
    if p.lo > q.lo:
        lo, lc = p.lo, p.lo_closed
    elif q.lo > p.lo:
        lo, lc = q.lo, q.lo_closed
    else:
        lo, lc = p.lo, p.lo_closed and q.lo_closed
    if p.hi < q.hi:
        hi, hc = p.hi, p.hi_closed
    elif q.hi < p.hi:
        hi, hc = q.hi, q.hi_closed
    else:
        hi, hc = p.hi, p.hi_closed and q.hi_closed
    return Piece(lo, hi, lc, hc)


def is_intersect(*sets: IntervalSet) -> IntervalSet:
    if not sets:
        return IntervalSet.full()
    acc = sets[0].pieces
    for s in sets[1:]:
        acc = _normalize(_intersect_pieces(p, q) for p in acc for q in s.pieces)
        if not acc:
            break
    return IntervalSet(acc)


def is_complement(a: IntervalSet) -> IntervalSet:
    """Complement relative to the open unit interval (0, 1)."""
    gaps = []
    lo, lc = 0.0, False
    for p in a.pieces:
        gaps.append(Piece(lo, p.lo, lc, not p.lo_closed))
        lo, lc = p.hi, not p.hi_closed
    gaps.append(Piece(lo, 1.0, lc, False))
    return IntervalSet(gaps)


def _bisect(fn, inside, outside, satisfied, tol):
    """Shrink ``[inside, outside]`` around the first point leaving ``satisfied``.

    Runs to adjacent floats when that is reachable; ``tol`` only caps the
    work for pathological inputs.
    """
    for k in range(200):
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside or (k >= 100 and abs(outside - inside) <= tol):
            break
        if (fn(mid) > 0) == satisfied:
            inside = mid
        else:
            outside = mid
    return inside, outside


def nearest_distance(expr: Expr, mean: float, spread: float, violating: bool) -> float:
    """Distance from ``mean`` to the nearest point where ``f <= 0`` (or ``f > 0``).

    ``violating=True`` looks for ``f <= 0``, ``violating=False`` for
    ``f > 0``.  An outward scan brackets the first crossing on each side and
    bisection tightens it; the ball inside the bracket is then re-checked
    with the bounded optimiser so a feature narrower than the scan step is
    not skipped.  For violations the inner end of the bracket is returned,
    for satisfying points the outer end.  Nothing within ``SCAN_RADIUS``
    spreads counts as nothing at all (``inf``).
    """
    fn = expr.fn
    if (fn(mean) <= 0) == violating:
        return 0.0
    aff = expr.affine
    if aff is not None:
        slope, icpt = aff
        return math.inf if slope == 0 else abs(-icpt / slope - mean)

    tol = ETA_TOL * spread
    step = spread / SCAN_STEPS
    offsets = np.arange(1, int(SCAN_RADIUS * SCAN_STEPS) + 1) * step
    r_in, r_out = SCAN_RADIUS * spread, math.inf
    for sign in (1.0, -1.0):
        xs = mean + sign * offsets
        ys = expr.vfn(xs)
        hits = np.flatnonzero(ys <= 0 if violating else ys > 0)
        if hits.size == 0:
            continue
        k = int(hits[0])
        prev = mean if k == 0 else float(xs[k - 1])
        inside, outside = _bisect(fn, prev, float(xs[k]), violating, tol)
        if abs(outside - mean) < r_out:
            r_in, r_out = abs(inside - mean), abs(outside - mean)

    search = minimize_expr if violating else maximize_expr
    for _ in range(64):
        if r_in <= 0:
            break
        x, y = search(expr, mean - r_in, mean + r_in, DEFAULT_GRID)
        if (y <= 0) != violating:
            break
        inside, outside = _bisect(fn, mean, x, violating, tol)
        r_in, r_out = abs(inside - mean), abs(outside - mean)
    return r_in if violating else r_out


def _spread(point: GaussianPoint, n: int) -> float:
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    # same rounding as Flowpipe.effective_std
    return point.std * (1.0 / math.sqrt(n))


SETTLE_ULPS = 1 << 40   # furthest an endpoint may move, in ulps


def _bits(x: float) -> int:
    return int(np.float64(x).view(np.int64))


def _float(k: int) -> float:
    return float(np.int64(k).view(np.float64))


def _settle(edge: float, holds, upper: bool) -> float:
    """Move a range endpoint to the exact float where ``holds`` flips.

    For an upper endpoint ``b`` the result satisfies ``holds(prev(b))`` and
    not ``holds(b)``; for a lower endpoint ``a``, ``holds(next(a))`` and not
    ``holds(a)``.  Endpoints then agree with the monitor bit for bit, so
    levels just inside an open end and closed ends made by complements both
    give the verdict the range promises.  Non-negative doubles are ordered
    like their bit patterns, so the search gallops and bisects over those.
    If no flip lies within ``SETTLE_ULPS`` of ``edge`` it is returned as is.
    """
    lo_k, hi_k = _bits(np.nextafter(0.0, 1.0)), _bits(np.nextafter(1.0, 0.0))

    def beyond(k):  # monotone in k: False inside the range side, True past the flip
        h = holds(_float(k))
        return not h if upper else h

    k0 = min(max(_bits(edge), lo_k), hi_k)
    if beyond(k0):
        good, bad, step = None, k0, 1
        while step <= SETTLE_ULPS:
            k = max(k0 - step, lo_k)
            if not beyond(k):
                good = k
                break
            bad = k
            if k == lo_k:
                break
            step <<= 1
    else:
        good, bad, step = k0, None, 1
        while step <= SETTLE_ULPS:
            k = min(k0 + step, hi_k)
            if beyond(k):
                bad = k
                break
            good = k
            if k == hi_k:
                break
            step <<= 1
    if good is None or bad is None:
        return edge
    while bad - good > 1:
        mid = (good + bad) // 2
        if beyond(mid):
            bad = mid
        else:
            good = mid
    # first index past the flip is the upper end; last index before it the lower end
    return _float(bad) if upper else _float(good)


def atom_strong_range(expr: Expr, point: GaussianPoint, n: int = 1) -> IntervalSet:
    """Levels under which ``f(x) > 0`` holds on the whole confidence interval."""
    s = _spread(point, n)
    if expr.fn(point.mean) <= 0:
        return IntervalSet()
    if s == 0:
        return IntervalSet.full()
    eta = nearest_distance(expr, point.mean, s, violating=True)
    if math.isinf(eta):
        return IntervalSet.full()
    b = _settle(float(coverage(eta / s)),
                lambda e: atom_holds(expr, point.mean, s, e, True), upper=True)
    return IntervalSet.open(0.0, b)


def atom_weak_range(expr: Expr, point: GaussianPoint, n: int = 1) -> IntervalSet:
    """Levels under which some point of the confidence interval has ``f(x) > 0``."""
    s = _spread(point, n)
    if expr.fn(point.mean) > 0:
        return IntervalSet.full()
    if s == 0:
        return IntervalSet()
    eta = nearest_distance(expr, point.mean, s, violating=False)
    if math.isinf(eta):
        return IntervalSet()
    a = _settle(float(coverage(eta / s)),
                lambda e: atom_holds(expr, point.mean, s, e, False), upper=False)
    return IntervalSet.open(a, 1.0)


class _RangeSession:
    def __init__(self, fp: Flowpipe):
        self.fp = fp
        self.memo = {}

    def atom(self, atom: Atom, t: int, strong: bool) -> IntervalSet:
        var = atom.variable
        if var not in self.fp.variables:
            raise ShapeError(f"flowpipe has no variable {var!r}")
        point = self.fp.point(var, t)
        try:
            if strong:
                return atom_strong_range(atom.expr, point, self.fp.sample_count)
            return atom_weak_range(atom.expr, point, self.fp.sample_count)
        except EvalError as exc:
            raise exc.at(t, to_text(atom)) from None

    def range(self, phi: Formula, t: int, strong: bool) -> IntervalSet:
        key = (id(phi), t, strong)
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = self._range(phi, t, strong)
        return hit

    def _range(self, phi, t, strong):
        if isinstance(phi, Atom):
            return self.atom(phi, t, strong)
        if isinstance(phi, Not):
            return is_complement(self.range(phi.arg, t, not strong))
        if isinstance(phi, And):
            return is_intersect(self.range(phi.left, t, strong), self.range(phi.right, t, strong))
        if isinstance(phi, Or):
            return is_union(self.range(phi.left, t, strong), self.range(phi.right, t, strong))
        window = range(t + phi.interval.lo, t + phi.interval.hi + 1)
        if isinstance(phi, Always):
            return is_intersect(*(self.range(phi.arg, u, strong) for u in window))
        if isinstance(phi, Eventually):
            return is_union(*(self.range(phi.arg, u, strong) for u in window))
        if isinstance(phi, Until):
            parts = []
            for u in window:
                # the empty intersection over (t, t') is the full set (0, 1)
                hold = is_intersect(IntervalSet.full(),
                                    *(self.range(phi.left, v, strong) for v in range(t + 1, u)))
                parts.append(is_intersect(self.range(phi.right, u, strong), hold))
            return is_union(*parts)
        raise TypeError(f"not a formula: {phi!r}")


def strong_range(phi: Formula, fp: Flowpipe, t: int = 0) -> IntervalSet:
    """Confidence levels under which ``fp`` strongly satisfies ``phi`` at ``t``."""
    check_horizon(phi, fp, t)
    return _RangeSession(fp).range(phi, t, True)


def weak_range(phi: Formula, fp: Flowpipe, t: int = 0) -> IntervalSet:
    """Confidence levels under which ``fp`` weakly satisfies ``phi`` at ``t``."""
    check_horizon(phi, fp, t)
    return _RangeSession(fp).range(phi, t, False)
