"""STL-U formula syntax tree.

Atoms assert ``f(x) > 0`` for a single-variable expression ``f`` and carry an
optional confidence level (``None`` means unspecified, written ``@ ?``).
Temporal operators take a closed integer interval ``[lo, hi]`` of offsets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from ..errors import ConfidenceRangeError, ParameterError, SingleVariableError
from .expr import Expr, _fmt_number

__all__ = [
    "Formula", "Interval", "Atom", "Not", "And", "Or", "Always", "Eventually", "Until",
    "horizon", "to_text", "walk", "atoms", "with_confidence",
]


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if not (isinstance(self.lo, int) and isinstance(self.hi, int)):
            raise ParameterError(f"interval bounds must be integers, got [{self.lo}, {self.hi}]")
        if not 0 <= self.lo <= self.hi:
            raise ParameterError(f"interval must satisfy 0 <= lo <= hi, got [{self.lo}, {self.hi}]")

    def __str__(self):
        return f"[{self.lo},{self.hi}]"


class Formula:
    """Base class of formula nodes."""

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Atom(Formula):
    expr: Expr
    conf: float | None = None

    def __post_init__(self):
        names = self.expr.variables()
        if len(names) != 1:
            raise SingleVariableError(
                f"single-variable atom required, {self.expr} references {sorted(names) or 'no variables'}")
        if self.conf is not None:
            if not (isinstance(self.conf, (int, float)) and 0.0 < self.conf < 1.0):
                raise ConfidenceRangeError(f"confidence level must lie in (0, 1), got {self.conf!r}")
            object.__setattr__(self, "conf", float(self.conf))

    @property
    def variable(self) -> str:
        return self.expr.variable


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


def horizon(phi: Formula) -> int:
    """Largest time offset any sub-formula evaluation can reach."""
    if isinstance(phi, Atom):
        return 0
    if isinstance(phi, (Always, Eventually)):
        return phi.interval.hi + horizon(phi.arg)
    if isinstance(phi, Until):
        return phi.interval.hi + max(horizon(phi.left), horizon(phi.right))
    return max(horizon(c) for c in phi.children())


def walk(phi: Formula) -> Iterator[Formula]:
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def atoms(phi: Formula) -> list[Atom]:
    return [n for n in walk(phi) if isinstance(n, Atom)]


def with_confidence(phi: Formula, eps: float | None, *, override: bool = False) -> Formula:
    """Copy of ``phi`` with unspecified atom levels set to ``eps``.

    With ``override=True`` every atom gets ``eps``.
    """
    if isinstance(phi, Atom):
        if phi.conf is None or override:
            return Atom(phi.expr, eps)
        return phi
    if isinstance(phi, Not):
        return Not(with_confidence(phi.arg, eps, override=override))
    if isinstance(phi, (And, Or)):
        return type(phi)(with_confidence(phi.left, eps, override=override),
                         with_confidence(phi.right, eps, override=override))
    if isinstance(phi, (Always, Eventually)):
        return type(phi)(phi.interval, with_confidence(phi.arg, eps, override=override))
    return Until(phi.interval, with_confidence(phi.left, eps, override=override),
                 with_confidence(phi.right, eps, override=override))


def to_text(phi: Formula) -> str:
    """Canonical, fully parenthesised text that parses back to ``phi``."""
    if isinstance(phi, Atom):
        conf = "?" if phi.conf is None else _fmt_number(phi.conf)
        return f"{phi.expr} > 0 @ {conf}"
    if isinstance(phi, Not):
        return f"not {_wrap(phi.arg)}"
    if isinstance(phi, And):
        return f"({to_text(phi.left)} and {to_text(phi.right)})"
    if isinstance(phi, Or):
        return f"({to_text(phi.left)} or {to_text(phi.right)})"
    if isinstance(phi, Always):
        return f"always{phi.interval} {_wrap(phi.arg)}"
    if isinstance(phi, Eventually):
        return f"eventually{phi.interval} {_wrap(phi.arg)}"
    if isinstance(phi, Until):
        return f"({to_text(phi.left)} until{phi.interval} {to_text(phi.right)})"
    raise TypeError(f"not a formula: {phi!r}")


def _wrap(phi):
    text = to_text(phi)
    return text if not isinstance(phi, Atom) else f"({text})"
