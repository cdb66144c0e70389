"""Scalar expressions over chart coordinates.

Expressions are immutable trees (in practice DAGs, since derivatives reuse
sub-expressions by reference).  They support exact symbolic partial
differentiation and vectorised evaluation over batches of points.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?          # right associative
    exponent:= '-' exponent | power
    atom    := number | name | name '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Neg",
    "Func",
    "ExprError",
    "ParseError",
    "DomainError",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "evaluate_many",
    "differentiate",
    "to_string",
    "reindex",
    "const",
    "add",
    "sub",
    "mul",
    "div",
    "power",
    "neg",
    "func",
    "ZERO",
    "ONE",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class DomainError(ExprError, ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Expr:
    # derivative cache keyed by variable index; identity-hashed nodes keep
    # the DAG shared across repeated differentiation
    _dcache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __str__(self) -> str:
        return to_string(self)

    # operator sugar, mostly for tests and catalog code
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __pow__(self, other):
        return power(self, _lift(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: float = 0.0


@dataclass(frozen=True, eq=False)
class Var(Expr):
    index: int = 0
    name: str = ""


@dataclass(frozen=True, eq=False)
class Add(Expr):
    left: Expr = None
    right: Expr = None


@dataclass(frozen=True, eq=False)
class Sub(Expr):
    left: Expr = None
    right: Expr = None


@dataclass(frozen=True, eq=False)
class Mul(Expr):
    left: Expr = None
    right: Expr = None


@dataclass(frozen=True, eq=False)
class Div(Expr):
    left: Expr = None
    right: Expr = None


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    left: Expr = None
    right: Expr = None


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    arg: Expr = None


@dataclass(frozen=True, eq=False)
class Func(Expr):
    name: str = ""
    arg: Expr = None


FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")
NAMED_CONSTANTS = {"pi": math.pi}

ZERO = Const(0.0)
ONE = Const(1.0)


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(float(x))


# ---------------------------------------------------------------------------
# smart constructors: constant folding and 0/1 identities only
# ---------------------------------------------------------------------------


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def const(value: float) -> Expr:
    value = float(value)
    if value == 0.0:
        return ZERO
    if value == 1.0:
        return ONE
    return Const(value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if a is b:
        return ZERO
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        raise DomainError("division by the zero constant")
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return const(a.value / b.value)
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return ONE
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 1.0):
        return ONE
    if _is_const(a) and _is_const(b):
        return const(_pow_scalar(a.value, b.value))
    return Pow(a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def func(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if _is_const(arg):
        return const(float(_apply_func(name, np.float64(arg.value))))
    return Func(name, arg)


def _pow_scalar(a: float, b: float) -> float:
    return float(_apply_pow(np.float64(a), np.float64(b)))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    # offsets are reported in bytes, so map char index -> byte index
    byte_at = [len(text[:i].encode("utf-8")) for i in range(len(text) + 1)] if len(raw) != len(text) else None
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            off = byte_at[start] if byte_at else start
            raise ParseError(f"unexpected character {text[start]!r}", off)
        kind = m.lastgroup
        start = m.start(kind)
        off = byte_at[start] if byte_at else start
        tokens.append((kind, m.group(kind), off))
        pos = m.end()
    end = len(raw)
    tokens.append(("end", "", end))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.vars = {name: k for k, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind == "end":
            if value == ")":
                raise ParseError("unbalanced parentheses: expected ')'", off)
            raise ParseError(f"expected {value!r}", off)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ParseError("empty input", 0)
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            if val == ")":
                raise ParseError("unbalanced parentheses: unexpected ')'", off)
            raise ParseError(f"unexpected token {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[0] == "op" and self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.exponent())
        return self.power()

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            if val in self.vars:
                return Var(self.vars[val], val)
            if val in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[val])
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        if val == ")":
            raise ParseError("unbalanced parentheses: unexpected ')'", off)
        raise ParseError(f"unexpected token {val!r}", off)


def parse(text: str, variables: Sequence[str] = ()) -> Expr:
    """Parse ``text`` into an expression.

    ``variables`` lists the chart coordinate names; a name's position is its
    coordinate index.  ``pi`` is accepted as a named constant.
    """
    return _Parser(text, variables).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const) and e.value < 0:
        return 3
    return _PREC.get(type(e), 5)


def to_string(e: Expr) -> str:
    """Render ``e`` so that ``parse`` reproduces an equivalent tree."""
    if isinstance(e, Const):
        v = e.value
        if math.isinf(v) or math.isnan(v):
            raise ExprError("cannot print a non-finite constant")
        return repr(v)
    if isinstance(e, Var):
        return e.name or f"x{e.index + 1}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        if _prec(e.arg) < 4:
            inner = f"({inner})"
        return f"-{inner}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}[type(e)]
    p = _prec(e)
    left, right = to_string(e.left), to_string(e.right)
    if isinstance(e, Pow):
        # right associative: parenthesise a left operand of equal precedence
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p and not isinstance(e.right, Neg):
            right = f"({right})"
        elif isinstance(e.right, Neg) or (isinstance(e.right, Const) and e.right.value < 0):
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {op} {right}"


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _apply_pow(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bad_int = (a < 0) & (b != np.round(b))
    if np.any(bad_int):
        raise DomainError("negative base raised to a non-integer power")
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    return np.power(a, b)


def _apply_func(name: str, x):
    if name == "log":
        if np.any(x <= 0):
            raise DomainError("log of a non-positive value")
        return np.log(x)
    if name == "sqrt":
        if np.any(x < 0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(x)
    return getattr(np, name)(x)


def _eval(e: Expr, pts: np.ndarray, memo: dict):
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(e, Const):
        val = e.value
    elif isinstance(e, Var):
        if e.index >= pts.shape[-1]:
            raise ExprError(f"variable {e} has index {e.index} beyond the point dimension {pts.shape[-1]}")
        val = pts[..., e.index]
    elif isinstance(e, Neg):
        val = -_eval(e.arg, pts, memo)
    elif isinstance(e, Func):
        val = _apply_func(e.name, _eval(e.arg, pts, memo))
    else:
        a = _eval(e.left, pts, memo)
        b = _eval(e.right, pts, memo)
        if isinstance(e, Add):
            val = a + b
        elif isinstance(e, Sub):
            val = a - b
        elif isinstance(e, Mul):
            val = a * b
        elif isinstance(e, Div):
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            val = a / b
        else:
            val = _apply_pow(a, b)
    # hold a reference to e so its id stays unique for the memo's lifetime
    memo[key] = (e, val)
    return val


def evaluate(e: Expr, point, dim: int | None = None):
    """Evaluate ``e`` at ``point``.

    ``point`` may be a single coordinate vector or an ``(N, n)`` batch; a
    batch returns an array of ``N`` values.  If ``dim`` is given the point
    length is checked against it.
    """
    pts = np.asarray(point, dtype=float)
    if dim is not None and pts.shape[-1] != dim:
        raise ExprError(f"point has dimension {pts.shape[-1]}, chart has {dim}")
    with np.errstate(all="ignore"):
        val = _eval(e, pts, {})
    out = np.broadcast_to(np.asarray(val, dtype=float), pts.shape[:-1])
    if not np.all(np.isfinite(out)):
        raise DomainError("expression evaluated to a non-finite value")
    return float(out) if out.ndim == 0 else np.array(out)


def evaluate_many(exprs, points) -> np.ndarray:
    """Evaluate an array-like of expressions over a batch of points.

    Returns an array of shape ``points.shape[:-1] + shape(exprs)``.  Shared
    sub-expressions are evaluated once.
    """
    pts = np.asarray(points, dtype=float)
    arr = np.empty(np.shape(exprs), dtype=object)
    arr[...] = exprs if not isinstance(exprs, Expr) else [exprs]
    flat = arr.ravel()
    memo: dict = {}
    lead = pts.shape[:-1]
    out = np.empty((flat.size,) + lead)
    with np.errstate(all="ignore"):
        for k, e in enumerate(flat):
            out[k] = np.broadcast_to(np.asarray(_eval(e, pts, memo), dtype=float), lead)
    if not np.all(np.isfinite(out)):
        raise DomainError("expression evaluated to a non-finite value")
    out = out.reshape(arr.shape + lead)
    return np.moveaxis(out, tuple(range(arr.ndim)), tuple(range(len(lead), len(lead) + arr.ndim)))


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def differentiate(e: Expr, var: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``var``."""
    cached = e._dcache.get(var)
    if cached is not None:
        return cached
    d = _diff(e, var)
    e._dcache[var] = d
    return d


def _diff(e: Expr, i: int) -> Expr:
    D = differentiate
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == i else ZERO
    if isinstance(e, Add):
        return add(D(e.left, i), D(e.right, i))
    if isinstance(e, Sub):
        return sub(D(e.left, i), D(e.right, i))
    if isinstance(e, Neg):
        return neg(D(e.arg, i))
    if isinstance(e, Mul):
        return add(mul(D(e.left, i), e.right), mul(e.left, D(e.right, i)))
    if isinstance(e, Div):
        du, dv = D(e.left, i), D(e.right, i)
        if _is_const(dv, 0.0):
            return div(du, e.right)
        return div(sub(mul(du, e.right), mul(e.left, dv)), mul(e.right, e.right))
    if isinstance(e, Pow):
        u, v = e.left, e.right
        du, dv = D(u, i), D(v, i)
        if _is_const(dv, 0.0):
            if _is_const(du, 0.0):
                return ZERO
            return mul(mul(v, power(u, sub(v, ONE))), du)
        # general case u^v (v' log u + v u'/u); requires u > 0
        return mul(e, add(mul(dv, Func("log", u)), div(mul(v, du), u)))
    if isinstance(e, Func):
        u = e.arg
        du = D(u, i)
        if _is_const(du, 0.0):
            return ZERO
        name = e.name
        if name == "sin":
            outer = func("cos", u)
        elif name == "cos":
            outer = neg(func("sin", u))
        elif name == "tan":
            outer = add(ONE, mul(e, e))
        elif name == "exp":
            outer = e
        elif name == "log":
            return div(du, u)
        elif name == "sqrt":
            return div(du, mul(const(2.0), e))
        elif name == "sinh":
            outer = func("cosh", u)
        elif name == "cosh":
            outer = func("sinh", u)
        elif name == "tanh":
            outer = sub(ONE, mul(e, e))
        else:  # pragma: no cover - guarded by the parser
            raise ExprError(f"unknown function {name!r}")
        return mul(outer, du)
    raise ExprError(f"cannot differentiate {type(e).__name__}")  # pragma: no cover


# ---------------------------------------------------------------------------
# variable remapping
# ---------------------------------------------------------------------------


def reindex(e: Expr, mapping: dict[int, int], names: dict[int, str] | None = None) -> Expr:
    """Rename coordinate indices, e.g. to embed a factor chart in a product."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Var):
            j = mapping.get(node.index, node.index)
            out = Var(j, names.get(j, node.name) if names else node.name)
        elif isinstance(node, Neg):
            out = Neg(go(node.arg))
        elif isinstance(node, Func):
            out = Func(node.name, go(node.arg))
        else:
            out = type(node)(go(node.left), go(node.right))
        memo[id(node)] = out
        return out

    return go(e)
