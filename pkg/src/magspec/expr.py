"""Expression language for symbols, fields and test functions.

Grammar (lowest to highest precedence)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := number | name | name '(' sum ')' | '(' sum ')'

Expressions are immutable trees.  They evaluate on numpy arrays, so one call
can sample a symbol on a whole phase-space grid.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "tanh", "atan", "log")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Syntax error; ``offset`` is the 1-based byte position of the fault."""

    def __init__(self, message, index):
        self.offset = index + 1
        super().__init__(f"{message} at offset {self.offset}")


class UnknownFunction(ExprError):
    pass


class UnknownVariable(ExprError):
    pass


class UnboundVariable(ExprError):
    pass


class DomainError(ExprError):
    pass


def default_variables(n=2):
    """Variable names accepted by default for dimension ``n``."""
    names = set()
    for j in range(1, n + 1):
        names.update({f"x{j}", f"xi{j}", f"y{j}"})
    names.update({"eps", "t"})
    return frozenset(names)


# --- tree ------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def free_vars(self):
        out = set()
        _collect_vars(self, out)
        return frozenset(out)

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


_BINARY = (Add, Sub, Mul, Div)


def _collect_vars(e, out):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, (Neg, Call)):
        _collect_vars(e.arg, out)
    elif isinstance(e, _BINARY):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)
    elif isinstance(e, Pow):
        _collect_vars(e.base, out)
        _collect_vars(e.exponent, out)


# --- parser ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    text_len = len(text)
    while pos < text_len:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.peek()
        if val != value or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", off)
        self.take()

    def parse(self):
        node = self.sum()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.product()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def product(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {val!r} at offset {off + 1}")
                self.take()
                arg = self.sum()
                self.expect(")")
                return Call(val, arg)
            if val in CONSTANTS:
                return Const(val)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", off + len(val))
            if self.variables is not None and val not in self.variables:
                raise UnknownVariable(f"unknown variable {val!r} at offset {off + 1}")
            return Var(val)
        if kind == "op" and val == "(":
            node = self.sum()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", off)


def parse(text: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse ``text``; ``variables`` restricts the admissible names."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    allowed = default_variables() if variables is None else frozenset(variables)
    return _Parser(text, allowed).parse()


def as_expr(e, variables=None) -> Expr:
    if isinstance(e, Expr):
        return e
    if isinstance(e, (int, float)):
        return Num(float(e))
    return parse(e, variables)


# --- printing --------------------------------------------------------------

def to_string(e: Expr) -> str:
    """Fully parenthesized rendering that re-parses to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, (Const, Var)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Pow):
        return f"({to_string(e.base)}^{to_string(e.exponent)})"
    sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    return f"({to_string(e.left)}{sym}{to_string(e.right)})"


# --- evaluation ------------------------------------------------------------

def _check_domain(mask, what):
    if np.any(mask):
        raise DomainError(what)


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Evaluate with numpy broadcasting over the bound values."""
    with np.errstate(all="ignore"):
        out = _eval(e, bindings)
    if np.any(~np.isfinite(out)):
        raise DomainError(f"non-finite value while evaluating {to_string(e)}")
    return out


def _eval(e, b):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Var):
        if e.name not in b:
            raise UnboundVariable(f"variable {e.name!r} is not bound")
        val = b[e.name]
        return float(val) if np.isscalar(val) else np.asarray(val, dtype=float)
    if isinstance(e, Neg):
        return -_eval(e.arg, b)
    if isinstance(e, Add):
        return _eval(e.left, b) + _eval(e.right, b)
    if isinstance(e, Sub):
        return _eval(e.left, b) - _eval(e.right, b)
    if isinstance(e, Mul):
        return _eval(e.left, b) * _eval(e.right, b)
    if isinstance(e, Div):
        den = _eval(e.right, b)
        _check_domain(np.asarray(den) == 0, "division by zero")
        return _eval(e.left, b) / den
    if isinstance(e, Pow):
        base = _eval(e.base, b)
        if isinstance(e.exponent, Num) and float(e.exponent.value).is_integer():
            k = int(e.exponent.value)
            if k < 0:
                _check_domain(np.asarray(base) == 0, "zero to a negative power")
            return np.power(base, float(k)) if not np.isscalar(base) else float(base) ** k
        ex = _eval(e.exponent, b)
        _check_domain(np.asarray(base) < 0, "negative base with non-integer exponent")
        return np.power(base, ex)
    if isinstance(e, Call):
        x = _eval(e.arg, b)
        if e.func == "sqrt":
            _check_domain(np.asarray(x) < 0, "sqrt of negative number")
            return np.sqrt(x)
        if e.func == "log":
            _check_domain(np.asarray(x) <= 0, "log of non-positive number")
            return np.log(x)
        return getattr(np, {"atan": "arctan"}.get(e.func, e.func))(x)
    raise TypeError(f"not an expression node: {e!r}")


# --- differentiation -------------------------------------------------------

ZERO = Num(0.0)
ONE = Num(1.0)


def _is_num(e, v=None):
    return isinstance(e, Num) and (v is None or e.value == v)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    return Div(a, b)


def diff(e: Expr, v: str) -> Expr:
    """Exact symbolic derivative with light constant folding."""
    if isinstance(e, (Num, Const)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if v not in e.free_vars():
        return ZERO
    if isinstance(e, Neg):
        return _neg(diff(e.arg, v))
    if isinstance(e, Add):
        return _add(diff(e.left, v), diff(e.right, v))
    if isinstance(e, Sub):
        return _sub(diff(e.left, v), diff(e.right, v))
    if isinstance(e, Mul):
        return _add(_mul(diff(e.left, v), e.right), _mul(e.left, diff(e.right, v)))
    if isinstance(e, Div):
        num = _sub(_mul(diff(e.left, v), e.right), _mul(e.left, diff(e.right, v)))
        return _div(num, Pow(e.right, Num(2.0)))
    if isinstance(e, Pow):
        u, w = e.base, e.exponent
        du = diff(u, v)
        if v not in w.free_vars():
            # d(u^w) = w u^(w-1) du
            lowered = Num(w.value - 1.0) if _is_num(w) else Sub(w, ONE)
            power = ONE if _is_num(lowered, 0.0) else Pow(u, lowered)
            return _mul(_mul(w, power), du)
        # u^w (w' log u + w u'/u)
        dw = diff(w, v)
        inner = _add(_mul(dw, Call("log", u)), _div(_mul(w, du), u))
        return _mul(e, inner)
    if isinstance(e, Call):
        u = e.arg
        du = diff(u, v)
        f = e.func
        if f == "sin":
            d = Call("cos", u)
        elif f == "cos":
            d = _neg(Call("sin", u))
        elif f == "exp":
            d = e
        elif f == "sqrt":
            d = _div(Num(0.5), e)
        elif f == "tanh":
            d = _sub(ONE, Pow(e, Num(2.0)))
        elif f == "atan":
            d = _div(ONE, _add(ONE, Pow(u, Num(2.0))))
        elif f == "log":
            d = _div(ONE, u)
        else:
            raise UnknownFunction(f)
        return _mul(d, du)
    raise TypeError(f"not an expression node: {e!r}")


def diff_multi(e: Expr, variables: Iterable[str]) -> Expr:
    for v in variables:
        e = diff(e, v)
    return e


def substitute(e: Expr, values: Mapping[str, object]) -> Expr:
    """Replace variables by numbers or expressions."""
    if isinstance(e, Var):
        if e.name in values:
            return as_expr(values[e.name])
        return e
    if isinstance(e, (Num, Const)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, values))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, values))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, values), substitute(e.exponent, values))
    return type(e)(substitute(e.left, values), substitute(e.right, values))


def polynomial_degree(e: Expr, names: Iterable[str]):
    """Total degree in ``names`` if ``e`` is polynomial in them, else None."""
    names = frozenset(names)
    if not (e.free_vars() & names):
        return 0
    if isinstance(e, Var):
        return 1
    if isinstance(e, Neg):
        return polynomial_degree(e.arg, names)
    if isinstance(e, (Add, Sub)):
        a = polynomial_degree(e.left, names)
        b = polynomial_degree(e.right, names)
        return None if a is None or b is None else max(a, b)
    if isinstance(e, Mul):
        a = polynomial_degree(e.left, names)
        b = polynomial_degree(e.right, names)
        return None if a is None or b is None else a + b
    if isinstance(e, Div):
        if e.right.free_vars() & names:
            return None
        return polynomial_degree(e.left, names)
    if isinstance(e, Pow):
        if e.exponent.free_vars() & names or not isinstance(e.exponent, Num):
            return None
        k = e.exponent.value
        if not float(k).is_integer() or k < 0:
            return None
        d = polynomial_degree(e.base, names)
        return None if d is None else int(d * k)
    return None
