"""Single-variable arithmetic expressions used inside atomic predicates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import EvalError

__all__ = ["Expr", "Const", "Var", "BinOp", "Func", "FUNCTIONS", "eval_expr"]

BINARY_OPS = ("+", "-", "*", "/", "^")
FUNCTIONS = ("neg", "abs", "sin", "cos", "exp", "log", "sqrt")

_SCALAR_BIN = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": math.pow,
}
_SCALAR_FUN = {
    "neg": lambda a: -a,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}
_VECTOR_BIN = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}
_VECTOR_FUN = {
    "neg": np.negative,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}


class Expr:
    """Base class for expression nodes.

    Nodes are immutable and compare structurally.  ``fn`` and ``vfn`` are
    compiled scalar and numpy evaluators; both raise :class:`EvalError` when
    the result leaves the reals.
    """

    def variables(self) -> frozenset[str]:
        raise NotImplementedError

    def _scalar(self):
        raise NotImplementedError

    def _vector(self):
        raise NotImplementedError

    def _affine(self):
        raise NotImplementedError

    @property
    def variable(self) -> str | None:
        names = self.variables()
        return next(iter(names)) if len(names) == 1 else None

    @cached_property
    def fn(self):
        inner = self._scalar()

        def call(x):
            try:
                y = inner(x)
            except (ZeroDivisionError, ValueError, OverflowError) as exc:
                raise EvalError(f"cannot evaluate {self} at x={x!r}: {exc}", x=x) from None
            if isinstance(y, complex) or not math.isfinite(y):
                raise EvalError(f"cannot evaluate {self} at x={x!r}: result {y!r}", x=x)
            return y

        return call

    @cached_property
    def vfn(self):
        inner = self._vector()
        scalar = self.fn

        def call(xs):
            xs = np.asarray(xs, dtype=float)
            with np.errstate(all="ignore"):
                ys = np.broadcast_to(inner(xs), xs.shape).astype(float, copy=False)
            bad = ~np.isfinite(ys)
            if bad.any():
                x = float(xs[bad][0])
                scalar(x)
                raise EvalError(f"cannot evaluate {self} at x={x!r}", x=x)
            return ys

        return call

    @cached_property
    def affine(self) -> tuple[float, float] | None:
        """``(slope, intercept)`` when the expression is affine in x, else None."""
        return self._affine()

    def __add__(self, other):
        return BinOp("+", self, _lift(other))

    def __radd__(self, other):
        return BinOp("+", _lift(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _lift(other))

    def __rsub__(self, other):
        return BinOp("-", _lift(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _lift(other))

    def __rmul__(self, other):
        return BinOp("*", _lift(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _lift(other))

    def __rtruediv__(self, other):
        return BinOp("/", _lift(other), self)

    def __pow__(self, other):
        return BinOp("^", self, _lift(other))

    def __neg__(self):
        return Func("neg", self)


def _lift(value):
    return value if isinstance(value, Expr) else Const(float(value))


def _fmt_number(v):
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", float(self.value))

    def variables(self):
        return frozenset()

    def _scalar(self):
        v = self.value
        return lambda x: v

    def _vector(self):
        v = self.value
        return lambda xs: np.full(xs.shape, v)

    def _affine(self):
        return (0.0, self.value)

    def __str__(self):
        text = _fmt_number(self.value)
        return f"({text})" if self.value < 0 else text


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def variables(self):
        return frozenset((self.name,))

    def _scalar(self):
        return lambda x: x

    def _vector(self):
        return lambda xs: xs

    def _affine(self):
        return (1.0, 0.0)

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown operator {self.op!r}")

    def variables(self):
        return self.left.variables() | self.right.variables()

    def _scalar(self):
        f, a, b = _SCALAR_BIN[self.op], self.left._scalar(), self.right._scalar()
        return lambda x: f(a(x), b(x))

    def _vector(self):
        f, a, b = _VECTOR_BIN[self.op], self.left._vector(), self.right._vector()
        return lambda xs: f(a(xs), b(xs))

    def _affine(self):
        la, ra = self.left.affine, self.right.affine
        if la is None or ra is None:
            return None
        (a1, b1), (a2, b2) = la, ra
        if self.op == "+":
            return (a1 + a2, b1 + b2)
        if self.op == "-":
            return (a1 - a2, b1 - b2)
        if self.op == "*":
            if a1 == 0:
                return (b1 * a2, b1 * b2)
            if a2 == 0:
                return (a1 * b2, b1 * b2)
            return None
        if self.op == "/":
            if a2 == 0 and b2 != 0:
                return (a1 / b2, b1 / b2)
            return None
        if a1 == 0 and a2 == 0:
            try:
                return (0.0, math.pow(b1, b2))
            except (ValueError, OverflowError, ZeroDivisionError):
                return None
        if a2 == 0 and b2 == 1:
            return (a1, b1)
        return None

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")

    def variables(self):
        return self.arg.variables()

    def _scalar(self):
        f, a = _SCALAR_FUN[self.name], self.arg._scalar()
        return lambda x: f(a(x))

    def _vector(self):
        f, a = _VECTOR_FUN[self.name], self.arg._vector()
        return lambda xs: f(a(xs))

    def _affine(self):
        inner = self.arg.affine
        if inner is None:
            return None
        if self.name == "neg":
            return (-inner[0], -inner[1])
        if inner[0] == 0:
            try:
                return (0.0, _SCALAR_FUN[self.name](inner[1]))
            except (ValueError, OverflowError):
                return None
        return None

    def __str__(self):
        return f"{self.name}({self.arg})"


def eval_expr(e: Expr, x: float) -> float:
    """Evaluate ``e`` at ``x``; domain violations raise :class:`EvalError`."""
    if not math.isfinite(x):
        raise EvalError(f"non-finite input x={x!r}", x=x)
    return e.fn(float(x))
