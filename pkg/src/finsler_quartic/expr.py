"""Scalar field expressions over patch coordinates ``x1 .. xn``.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | atom ("^" const)?
    atom   := NUMBER | "x" INDEX | FUNC "(" expr ")" | "(" expr ")"
    const  := NUMBER | "(" expr ")" | "-" const      # no variables

``^`` binds tighter than unary minus, so ``-x1^2`` is ``-(x1^2)``.
Supported functions: sin, cos, exp, log, sqrt, tanh.

Evaluation is generic in the number type: the same tree evaluates on
floats, numpy arrays (elementwise, for batches of points) and on the
forward-mode numbers from :mod:`finsler_quartic.dual`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import dual
from .dual import Jet, jet_variables, primal

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "VariableIndexError",
    "DomainError",
    "ScalarExpr",
    "Jet2",
    "parse_expression",
    "eval_scalar",
    "eval_jet2",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression errors; ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class VariableIndexError(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    pass


FUNCTIONS = {
    "sin": dual.sin,
    "cos": dual.cos,
    "exp": dual.exp,
    "log": dual.log,
    "sqrt": dual.sqrt,
    "tanh": dual.tanh,
}


# --------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)

    def evaluate(self, xs):
        return self.value

    def to_text(self) -> str:
        return repr(self.value)

    def variables(self):
        return set()


@dataclass(frozen=True)
class Var:
    index: int  # 1-based
    pos: int = field(default=0, compare=False)

    def evaluate(self, xs):
        return xs[self.index - 1]

    def to_text(self) -> str:
        return f"x{self.index}"

    def variables(self):
        return {self.index}


@dataclass(frozen=True)
class Neg:
    arg: object
    pos: int = field(default=0, compare=False)

    def evaluate(self, xs):
        return -self.arg.evaluate(xs)

    def to_text(self) -> str:
        return f"(-{self.arg.to_text()})"

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: int = field(default=0, compare=False)

    def evaluate(self, xs):
        u = self.left.evaluate(xs)
        v = self.right.evaluate(xs)
        if self.op == "+":
            return u + v
        if self.op == "-":
            return u - v
        if self.op == "*":
            return u * v
        if np.any(np.asarray(primal(v)) == 0.0):
            raise DomainError("division by zero", self.pos)
        return u / v

    def to_text(self) -> str:
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: float
    pos: int = field(default=0, compare=False)

    def evaluate(self, xs):
        u = self.base.evaluate(xs)
        c = self.exponent
        base = np.asarray(primal(u))
        if not float(c).is_integer() and np.any(base < 0.0):
            raise DomainError("negative base with non-integer exponent", self.pos)
        if c < 0 and np.any(base == 0.0):
            raise DomainError("zero raised to a negative power", self.pos)
        if isinstance(u, (int, float, np.ndarray, np.floating)):
            return np.power(np.asarray(u, dtype=float), c)
        return dual.power(u, c)

    def to_text(self) -> str:
        return f"({self.base.to_text()}^({self.exponent!r}))"

    def variables(self):
        return self.base.variables()


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    pos: int = field(default=0, compare=False)

    def evaluate(self, xs):
        u = self.arg.evaluate(xs)
        if self.func in ("log", "sqrt"):
            v = np.asarray(primal(u))
            bad = v <= 0.0 if self.func == "log" else v < 0.0
            if np.any(bad):
                raise DomainError(f"{self.func} of out-of-domain argument", self.pos)
        return FUNCTIONS[self.func](u)

    def to_text(self) -> str:
        return f"{self.func}({self.arg.to_text()})"

    def variables(self):
        return self.arg.variables()


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(src: str):
    tokens = []
    i = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), i))
        i = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, n: int):
        self.src = src
        self.n = n
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, pos = self.take()
        if value != text or kind == "end":
            what = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", pos)

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(op, node, self.factor(), pos)
        return node

    def factor(self):
        kind, value, pos = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.factor(), pos)
        node = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            _, _, ppos = self.take()
            start = self.peek()[2]
            exponent = self.const()
            if exponent.variables():
                raise ExprSyntaxError("exponent must be a constant expression", start)
            node = Pow(node, float(exponent.evaluate(())), ppos)
        return node

    def const(self):
        kind, value, pos = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.const(), pos)
        if kind == "num":
            self.take()
            return Num(float(value), pos)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"expected constant exponent, found {what}", pos)

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value), pos)
        if kind == "name":
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                index = int(m.group(1))
                if not 1 <= index <= self.n:
                    raise VariableIndexError(
                        f"variable {value} out of range for {self.n} coordinates", pos
                    )
                return Var(index, pos)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg, pos)
            raise UnknownIdentifierError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {what}", pos)


# --------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class ScalarExpr:
    """Parsed expression together with its coordinate count ``n``."""

    root: object
    n: int
    source: str = ""

    def __call__(self, xs):
        return self.root.evaluate(xs)

    def to_text(self) -> str:
        return self.root.to_text()

    def variables(self) -> set:
        return self.root.variables()

    @property
    def is_constant(self) -> bool:
        return not self.root.variables()

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Jet2:
    value: float
    grad: np.ndarray
    hess: np.ndarray


def parse_expression(src: str, n: int) -> ScalarExpr:
    """Parse ``src`` as a scalar field in ``n`` coordinates.

    Raises
    ------
    ExprSyntaxError
        Malformed input; ``offset`` points at the offending token.
    UnknownIdentifierError, VariableIndexError
        Bad names or ``xk`` with ``k`` outside ``1..n``.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    if n < 1:
        raise ValueError("coordinate count must be positive")
    root = _Parser(src, n).parse()
    return ScalarExpr(root, n, src)


def _coords(e: ScalarExpr, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (e.n,):
        raise ValueError(f"expected {e.n} coordinates, got shape {x.shape}")
    return x


def eval_scalar(e: ScalarExpr, x) -> float | np.ndarray:
    """Value of ``e`` at ``x``; ``x`` may carry leading batch axes."""
    x = _coords(e, x)
    out = e([x[..., i] for i in range(e.n)])
    out = np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1])
    return float(out) if out.ndim == 0 else out.copy()


def eval_jet2(e: ScalarExpr, x) -> Jet2:
    """Value, gradient and Hessian of ``e`` at a single point ``x``."""
    x = _coords(e, x)
    if x.ndim != 1:
        raise ValueError("eval_jet2 takes a single point")
    out = e(jet_variables(x))
    if not isinstance(out, Jet):
        return Jet2(float(out), np.zeros(e.n), np.zeros((e.n, e.n)))
    return Jet2(float(out.val), np.array(out.grad), np.array(out.hess))
