"""STL-U formula language: expressions, syntax tree, parser and minimiser."""
from .expr import BinOp, Const, Expr, Func, Var, eval_expr
from .nodes import (Always, And, Atom, Eventually, Formula, Interval, Not, Or, Until,
                    atoms, horizon, to_text, walk, with_confidence)
from .optimize import DEFAULT_GRID, maximize_expr, minimize_expr
from .parser import parse, parse_expr

__all__ = [
    "Expr", "Const", "Var", "BinOp", "Func", "eval_expr",
    "Formula", "Interval", "Atom", "Not", "And", "Or", "Always", "Eventually", "Until",
    "atoms", "horizon", "to_text", "walk", "with_confidence",
    "DEFAULT_GRID", "minimize_expr", "maximize_expr",
    "parse", "parse_expr",
]
