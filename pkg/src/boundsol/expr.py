"""Coefficient and potential expressions.

A small recursive-descent parser producing an immutable tree, a vectorised
evaluator (scalars or numpy arrays) and symbolic differentiation.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' INTEGER)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

so ``-2^2`` is ``-(2^2)``. Exponents are non-negative integer literals.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Pow",
    "ExprError", "ExprSyntaxError", "UnknownFunction", "UnboundVariable",
    "ExprDivisionByZero", "FUNCTIONS", "parse", "evaluate", "diff",
    "variables", "as_expr", "substitute",
]

Number = Union[float, np.ndarray]

FUNCTIONS = ("sin", "cos", "exp", "tanh", "abs", "sgn")


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError, SyntaxError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


class UnknownFunction(ExprError):
    pass


class UnboundVariable(ExprError, KeyError):
    def __str__(self):
        return f"unbound variable {self.args[0]!r}"


class ExprDivisionByZero(ExprError, ZeroDivisionError):
    pass


class Expr:
    """Base node. Subclasses are frozen dataclasses."""

    def __call__(self, env: Mapping[str, Number] | None = None, **kw) -> Number:
        return evaluate(self, {**(env or {}), **kw})

    def __str__(self) -> str:
        return to_text(self)

    def __add__(self, other): return add(self, as_expr(other))
    def __radd__(self, other): return add(as_expr(other), self)
    def __sub__(self, other): return sub(self, as_expr(other))
    def __rsub__(self, other): return sub(as_expr(other), self)
    def __mul__(self, other): return mul(self, as_expr(other))
    def __rmul__(self, other): return mul(as_expr(other), self)
    def __truediv__(self, other): return div(self, as_expr(other))
    def __rtruediv__(self, other): return div(as_expr(other), self)
    def __neg__(self): return neg(self)

    def __pow__(self, n: int):
        return power(self, n)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Unary(Expr):
    op: str  # "neg" or a name from FUNCTIONS
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Binary(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(Expr):
    base: Expr
    exponent: int


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    return Const(float(x))


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors: only trivial identities, no general folding.

def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(a: Expr, n: int) -> Expr:
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ExprError(f"exponent must be a non-negative integer, got {n!r}")
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownFunction(name)
    return Unary(name, a)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                skip = len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(
                    f"unexpected character {text[pos + skip]!r}", pos + skip, text)
            kind = m.lastgroup
            value = m.group(kind)
            start = m.start(kind)
            if kind == "op" and value == "**":
                value = "^"
            self.tokens.append((kind, value, start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, off = self.take()
        if v != value or kind == "end":
            got = "end of input" if kind == "end" else repr(v)
            raise ExprSyntaxError(f"expected {value!r}, got {got}", off, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, v, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {v!r}", off, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        kind, v, _ = self.peek()
        if kind == "op" and v == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and v == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, v, _ = self.peek()
        if kind == "op" and v == "^":
            self.take()
            kind, v, off = self.take()
            if kind != "num" or not v.isdigit():
                raise ExprSyntaxError(
                    "exponent must be a non-negative integer literal", off, self.text)
            base = Pow(base, int(v))
            if self.peek()[1] == "^":
                raise ExprSyntaxError("chained exponents are not supported",
                                      self.peek()[2], self.text)
        return base

    def atom(self) -> Expr:
        kind, v, off = self.take()
        if kind == "num":
            return Const(float(v))
        if kind == "name":
            if self.peek()[1] == "(":
                if v not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {v!r} at offset {off}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(v, arg)
            return Var(v)
        if kind == "op" and v == "(":
            e = self.expr()
            self.expect(")")
            return e
        got = "end of input" if kind == "end" else repr(v)
        raise ExprSyntaxError(f"unexpected {got}", off, self.text)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        With ``offset`` pointing at the offending character.
    UnknownFunction
        For ``name(...)`` where ``name`` is not a supported function.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text or "")
    return _Parser(text).parse()


# ------------------------------------------------------------- evaluation

def _sgn(x):
    return np.sign(x)


_UNARY = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
    "sgn": _sgn,
}


def evaluate(e: Expr, env: Mapping[str, Number]) -> Number:
    """Evaluate ``e`` with variables bound by ``env``.

    Values in ``env`` may be floats or broadcast-compatible arrays; the
    result is a float when every input is scalar.
    """
    out = _eval(e, env)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _eval(e: Expr, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Unary):
        return _UNARY[e.op](_eval(e.arg, env))
    if isinstance(e, Pow):
        base = _eval(e.base, env)
        if e.exponent == 2:
            return base * base
        return base ** e.exponent
    if isinstance(e, Binary):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise ExprDivisionByZero(f"division by zero in {to_text(e)}")
        return np.true_divide(a, b)
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------- differentiation

def diff(e: Expr, var: str) -> Expr:
    """Symbolic derivative of ``e`` with respect to ``var``.

    ``d|x|/dx`` uses ``sgn``, so the derivative of ``abs`` at 0 is 0.
    """
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Binary):
        da, db = diff(e.left, var), diff(e.right, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        # quotient rule
        num = sub(mul(da, e.right), mul(e.left, db))
        return div(num, power(e.right, 2)) if not _is_const(num, 0.0) else ZERO
    if isinstance(e, Pow):
        db = diff(e.base, var)
        if _is_const(db, 0.0) or e.exponent == 0:
            return ZERO
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), db)
    if isinstance(e, Unary):
        da = diff(e.arg, var)
        if _is_const(da, 0.0):
            return ZERO
        a = e.arg
        if e.op == "neg":
            return neg(da)
        if e.op == "sin":
            outer = Unary("cos", a)
        elif e.op == "cos":
            outer = neg(Unary("sin", a))
        elif e.op == "exp":
            outer = e
        elif e.op == "tanh":
            outer = sub(ONE, power(e, 2))
        elif e.op == "abs":
            outer = Unary("sgn", a)
        elif e.op == "sgn":
            return ZERO
        else:
            raise UnknownFunction(e.op)
        return mul(outer, da)
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    return set()


# ---------------------------------------------------------------- printing

def _num_text(v: float) -> str:
    text = repr(float(v))
    if v < 0:
        return f"(-{text[1:]})"
    return text


def to_text(e: Expr) -> str:
    """Fully parenthesised, re-parseable text form."""
    if isinstance(e, Const):
        if not np.isfinite(e.value):
            raise ExprError(f"cannot print non-finite constant {e.value}")
        return _num_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Pow):
        return f"({to_text(e.base)})^{e.exponent}"
    if isinstance(e, Binary):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    raise TypeError(f"not an expression node: {e!r}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return e
