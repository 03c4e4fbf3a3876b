"""Recursive-descent parser for STL-U formula text.

Grammar (whitespace-insensitive, keywords case-insensitive)::

    formula  := until
    until    := or ( ("U" | "until") interval or )?
    or       := and ( ("or" | "|") and )*
    and      := unary ( ("and" | "&") unary )*
    unary    := ("not" | "!") unary
              | ("G" | "always") interval unary
              | ("F" | "eventually") interval unary
              | "(" formula ")" | atom
    interval := "[" nat "," nat "]"
    atom     := expr cmp expr ( "@" (number | "?") )?
    cmp      := "<" | "<=" | ">" | ">="
    expr     := arithmetic with + - * / ^, unary minus, parentheses and
                the functions neg abs sin cos exp log sqrt

``a > b`` becomes the atom ``a - b > 0`` and ``a < b`` becomes ``b - a > 0``
(a literal zero on the far side is dropped).  ``<=`` and ``>=`` are read as
their strict forms.  A missing ``@`` leaves the confidence unspecified.
Keywords, including the single letters G, F and U, cannot name variables.
"""
from __future__ import annotations

import re
from typing import NamedTuple

from ..errors import ConfidenceRangeError, ParseError, SingleVariableError
from .expr import FUNCTIONS, BinOp, Const, Expr, Func, Var
from .nodes import Always, And, Atom, Eventually, Formula, Interval, Not, Or, Until

__all__ = ["parse", "parse_expr"]

KEYWORDS = {
    "not": "NOT", "and": "AND", "or": "OR",
    "always": "ALWAYS", "g": "ALWAYS",
    "eventually": "EVENTUALLY", "f": "EVENTUALLY",
    "until": "UNTIL", "u": "UNTIL",
}
SYMBOLS = {
    "!": "NOT", "&": "AND", "|": "OR",
    "<=": "CMP", ">=": "CMP", "<": "CMP", ">": "CMP",
    "(": "(", ")": ")", "[": "[", "]": "]", ",": ",", "@": "@", "?": "?",
    "+": "+", "-": "-", "*": "*", "/": "/", "^": "^",
}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<sym><=|>=|[!&|<>()\[\],@?+\-*/^])
""", re.VERBOSE)


class Token(NamedTuple):
    kind: str
    text: str
    pos: int


def _tokenize(text):
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        value = m.group()
        if kind == "number":
            tokens.append(Token("NUMBER", value, pos))
        elif kind == "ident":
            low = value.lower()
            if low in KEYWORDS:
                tokens.append(Token(KEYWORDS[low], value, pos))
            elif low in FUNCTIONS:
                tokens.append(Token("FUNC", low, pos))
            else:
                tokens.append(Token("IDENT", value, pos))
        elif kind == "sym":
            tokens.append(Token(SYMBOLS[value], value, pos))
        pos = m.end()
    tokens.append(Token("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def peek(self, offset=1):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def error(self, message, tok=None, cls=ParseError):
        tok = tok or self.tok
        return cls(message, tok.pos, self.text)

    def expect(self, kind, what=None):
        tok = self.tok
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise self.error(f"expected {what or kind}, found {found!r}")
        self.i += 1
        return tok

    def accept(self, kind):
        if self.tok.kind == kind:
            self.i += 1
            return True
        return False

    # formulas

    def formula(self):
        left = self.disjunction()
        if self.tok.kind == "UNTIL":
            self.i += 1
            interval = self.interval()
            right = self.disjunction()
            return Until(interval, left, right)
        return left

    def disjunction(self):
        node = self.conjunction()
        while self.accept("OR"):
            node = Or(node, self.conjunction())
        return node

    def conjunction(self):
        node = self.unary()
        while self.accept("AND"):
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        kind = self.tok.kind
        if kind == "NOT":
            self.i += 1
            return Not(self.unary())
        if kind in ("ALWAYS", "EVENTUALLY"):
            self.i += 1
            interval = self.interval()
            arg = self.unary()
            return Always(interval, arg) if kind == "ALWAYS" else Eventually(interval, arg)
        if kind == "(":
            start = self.i
            try:
                return self.atom()
            except ParseError as atom_err:
                if isinstance(atom_err, (SingleVariableError, ConfidenceRangeError)):
                    raise
                self.i = start + 1
                try:
                    node = self.formula()
                    self.expect(")", "')'")
                except ParseError as formula_err:
                    pa = atom_err.position or 0
                    pf = formula_err.position or 0
                    raise (atom_err if pa > pf else formula_err) from None
                return node
        return self.atom()

    def interval(self):
        open_tok = self.expect("[", "'[' opening a time interval")
        lo = self.nat()
        self.expect(",", "','")
        hi = self.nat()
        self.expect("]", "']'")
        if lo > hi:
            raise self.error(f"empty interval [{lo},{hi}]", open_tok)
        return Interval(lo, hi)

    def nat(self):
        tok = self.expect("NUMBER", "a non-negative integer")
        if not tok.text.isdigit():
            raise self.error(f"interval bound must be a non-negative integer, got {tok.text!r}", tok)
        return int(tok.text)

    def atom(self):
        first = self.tok
        lhs = self.expr()
        cmp_tok = self.expect("CMP", "a comparison (<, <=, >, >=)")
        rhs = self.expr()
        zero = Const(0.0)
        if cmp_tok.text in ("<", "<="):
            body = rhs if lhs == zero else BinOp("-", rhs, lhs)
        else:
            body = lhs if rhs == zero else BinOp("-", lhs, rhs)
        conf = None
        if self.accept("@"):
            if not self.accept("?"):
                tok = self.expect("NUMBER", "a confidence level or '?'")
                conf = float(tok.text)
                if not 0.0 < conf < 1.0:
                    raise self.error(f"confidence level must lie in (0, 1), got {tok.text}",
                                     tok, ConfidenceRangeError)
        names = body.variables()
        if len(names) != 1:
            raise self.error(
                f"single-variable atom required, found {sorted(names) or 'no variables'}",
                first, SingleVariableError)
        return Atom(body, conf)

    # arithmetic

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.tok.kind
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.signed()
        while self.tok.kind in ("*", "/"):
            op = self.tok.kind
            self.i += 1
            node = BinOp(op, node, self.signed())
        return node

    def signed(self):
        if self.accept("+"):
            return self.signed()
        if self.tok.kind == "-":
            self.i += 1
            literal = self.tok.kind == "NUMBER" and self.peek().kind != "^"
            operand = self.signed()
            if literal:
                return Const(-operand.value)
            return Func("neg", operand)
        return self.power()

    def power(self):
        base = self.primary()
        if self.accept("^"):
            return BinOp("^", base, self.signed())
        return base

    def primary(self):
        tok = self.tok
        if tok.kind == "NUMBER":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "IDENT":
            self.i += 1
            return Var(tok.text)
        if tok.kind == "FUNC":
            self.i += 1
            self.expect("(", f"'(' after {tok.text}")
            arg = self.expr()
            self.expect(")", "')'")
            return Func(tok.text, arg)
        if tok.kind == "(":
            self.i += 1
            node = self.expr()
            self.expect(")", "')'")
            return node
        found = tok.text or "end of input"
        raise self.error(f"expected a number, variable, function or '(', found {found!r}")


def parse(text: str) -> Formula:
    """Parse formula text into a :class:`Formula` tree."""
    p = _Parser(text)
    node = p.formula()
    if p.tok.kind != "EOF":
        raise p.error(f"unexpected {p.tok.text!r} after complete formula")
    return node


def parse_expr(text: str) -> Expr:
    """Parse a bare arithmetic expression."""
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "EOF":
        raise p.error(f"unexpected {p.tok.text!r} after complete expression")
    return node
