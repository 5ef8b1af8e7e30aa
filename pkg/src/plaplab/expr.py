"""Small expression language for radial profile functions.

Grammar (whitespace-insensitive, numbers are decimal literals):

    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' ['-'] number)?
    base   := number | variable | func '(' expr ')' | '(' expr ')'
    func   := exp | log | sinh | cosh | sqrt

Exponents are numeric constants only.  A leading unary sign is accepted so
that profiles like ``t*exp(-t^3)`` parse; the sign is folded into a ``0 - x``
node.  Evaluation is numpy-vectorized and there are three evaluators:

* ``evaluate``       -- plain values (may overflow to inf for huge inputs)
* ``log_eval``       -- log of a positive expression, computed structurally
                        (``u*exp(v)`` becomes ``log u + v``) so that the value
                        itself is never materialized
* ``log_derivative`` -- d/dt log f, again structural, so ratios like f'/f are
                        available where f and f' both over- or underflow
"""

from __future__ import annotations

import math
import re

import numpy as np


class ParseError(ValueError):
    """Syntax error; carries the offset and the expected-token set."""

    def __init__(self, message, position, expected=()):
        super().__init__(f"{message} at position {position}"
                         + (f" (expected {', '.join(expected)})" if expected else ""))
        self.position = position
        self.expected = tuple(expected)


class EvalError(ArithmeticError):
    """Raised when an expression cannot be evaluated at a point (domain error,
    nonpositive argument to a log-scale evaluator, unresolvable overflow)."""


FUNCTIONS = ("exp", "log", "sinh", "cosh", "sqrt")

_LOG2 = math.log(2.0)


class Node:
    __slots__ = ()

    def __add__(self, other):
        return Add(self, _as_node(other))

    def __sub__(self, other):
        return Sub(self, _as_node(other))

    def __mul__(self, other):
        return Mul(self, _as_node(other))

    def __truediv__(self, other):
        return Div(self, _as_node(other))


class Num(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def __repr__(self):
        return f"Num({self.value!r})"


class Var(Node):
    __slots__ = ()

    def __repr__(self):
        return "Var()"


class _Binary(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __repr__(self):
        return f"{type(self).__name__}({self.a!r}, {self.b!r})"


class Add(_Binary):
    __slots__ = ()


class Sub(_Binary):
    __slots__ = ()


class Mul(_Binary):
    __slots__ = ()


class Div(_Binary):
    __slots__ = ()


class Pow(Node):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = float(exponent)

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent!r})"


class Fun(Node):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def __repr__(self):
        return f"Fun({self.name!r}, {self.arg!r})"


def _as_node(x):
    return x if isinstance(x, Node) else Num(x)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(r"""
    (?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, var):
        self.text = text
        self.var = var
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"got {val!r}" if val else "unexpected end of input",
                             pos, expected=(repr(op),))
        return self.next()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", pos)
        return node

    def expr(self):
        kind, val, _ = self.peek()
        negate = False
        if kind == "op" and val in "+-":
            self.next()
            negate = val == "-"
        node = self.term()
        if negate:
            node = Sub(Num(0.0), node)
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.factor()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def factor(self):
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            sign = 1.0
            kind, val, pos = self.peek()
            if kind == "op" and val == "-":
                self.next()
                sign = -1.0
                kind, val, pos = self.peek()
            if kind != "number":
                raise ParseError(f"got {val!r}" if val else "unexpected end of input",
                                 pos, expected=("number",))
            self.next()
            node = Pow(node, sign * float(val))
        return node

    def base(self):
        kind, val, pos = self.next()
        if kind == "number":
            return Num(float(val))
        if kind == "name":
            if val == self.var:
                return Var()
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Fun(val, arg)
            raise ParseError(f"unknown name {val!r}", pos,
                             expected=(self.var,) + FUNCTIONS)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"got {val!r}" if val else "unexpected end of input",
                         pos, expected=("number", self.var, "function", "'('"))


def parse(text, var="t"):
    """Parse ``text`` into an expression tree over the given variable."""
    return _Parser(text, var).parse()


def to_string(node, var="t"):
    """Render a tree back to DSL syntax (parenthesized conservatively)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return var
    if isinstance(node, Fun):
        return f"{node.name}({to_string(node.arg, var)})"
    if isinstance(node, Pow):
        return f"({to_string(node.base, var)})^{node.exponent!r}"
    sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
    return f"({to_string(node.a, var)} {sym} {to_string(node.b, var)})"


# ---------------------------------------------------------------------------
# symbolic differentiation with light constant folding

def _is_num(node, value=None):
    return isinstance(node, Num) and (value is None or node.value == value)


def _add(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    return Sub(a, b)


def _mul(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return Mul(a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return Div(a, b)


def _pow(base, c):
    if c == 0.0:
        return Num(1.0)
    if c == 1.0:
        return base
    return Pow(base, c)


def differentiate(node):
    """Exact derivative tree of ``node`` with respect to the variable."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Add):
        return _add(differentiate(node.a), differentiate(node.b))
    if isinstance(node, Sub):
        return _sub(differentiate(node.a), differentiate(node.b))
    if isinstance(node, Mul):
        return _add(_mul(differentiate(node.a), node.b),
                    _mul(node.a, differentiate(node.b)))
    if isinstance(node, Div):
        num = _sub(_mul(differentiate(node.a), node.b),
                   _mul(node.a, differentiate(node.b)))
        return _div(num, _pow(node.b, 2.0))
    if isinstance(node, Pow):
        return _mul(_mul(Num(node.exponent), _pow(node.base, node.exponent - 1.0)),
                    differentiate(node.base))
    if isinstance(node, Fun):
        du = differentiate(node.arg)
        if node.name == "exp":
            return _mul(node, du)
        if node.name == "log":
            return _div(du, node.arg)
        if node.name == "sinh":
            return _mul(Fun("cosh", node.arg), du)
        if node.name == "cosh":
            return _mul(Fun("sinh", node.arg), du)
        if node.name == "sqrt":
            return _div(du, _mul(Num(2.0), node))
    raise TypeError(f"cannot differentiate {node!r}")


# ---------------------------------------------------------------------------
# evaluation

def evaluate(node, t):
    """Evaluate at ``t`` (scalar or ndarray).  May produce inf/nan; callers
    that need domain checking inspect the result (see warping module)."""
    with np.errstate(all="ignore"):
        return _ev(node, np.asarray(t, dtype=float))


def _ev(node, t):
    if isinstance(node, Num):
        return np.full_like(t, node.value) if t.ndim else np.float64(node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Add):
        return _ev(node.a, t) + _ev(node.b, t)
    if isinstance(node, Sub):
        return _ev(node.a, t) - _ev(node.b, t)
    if isinstance(node, Mul):
        return _ev(node.a, t) * _ev(node.b, t)
    if isinstance(node, Div):
        return _ev(node.a, t) / _ev(node.b, t)
    if isinstance(node, Pow):
        return _ev(node.base, t) ** node.exponent
    if isinstance(node, Fun):
        x = _ev(node.arg, t)
        return getattr(np, node.name)(x)
    raise TypeError(f"cannot evaluate {node!r}")


def log_eval(node, t):
    """log(node(t)) for positive-valued expressions, computed structurally.

    Products, quotients, powers, exp, sqrt, sinh and cosh never materialize
    the value; sums fall back to direct evaluation only where the structural
    path fails (e.g. a genuinely signed subterm).  Returns nan where the
    expression is nonpositive or cannot be resolved.
    """
    with np.errstate(all="ignore"):
        return _lev(node, np.asarray(t, dtype=float))


def _direct_log(node, t):
    v = _ev(node, t)
    return np.where(v > 0, np.log(v), np.nan)


def _lev(node, t):
    if isinstance(node, Num):
        out = math.log(node.value) if node.value > 0 else math.nan
        return np.full_like(t, out) if t.ndim else np.float64(out)
    if isinstance(node, Var):
        return np.where(t >= 0, np.log(t), np.nan)  # log 0 = -inf (zero value)
    if isinstance(node, Mul):
        return _lev(node.a, t) + _lev(node.b, t)
    if isinstance(node, Div):
        return _lev(node.a, t) - _lev(node.b, t)
    if isinstance(node, Pow):
        cand = node.exponent * _lev(node.base, t)
        return np.where(np.isnan(cand), _direct_log(node, t), cand)
    if isinstance(node, Fun):
        if node.name == "exp":
            return _ev(node.arg, t)
        if node.name == "sqrt":
            return 0.5 * _lev(node.arg, t)
        if node.name == "sinh":
            x = _ev(node.arg, t)
            # log sinh x = x - log 2 + log(1 - e^{-2x}), exact for all x >= 0
            return np.where(x >= 0, x - _LOG2 + np.log(-np.expm1(-2.0 * x)), np.nan)
        if node.name == "cosh":
            x = np.abs(_ev(node.arg, t))
            return x - _LOG2 + np.log1p(np.exp(-2.0 * x))
        if node.name == "log":
            return _direct_log(node, t)
    if isinstance(node, (Add, Sub)):
        la = _lev(node.a, t)
        lb = _lev(node.b, t)
        if isinstance(node, Add):
            cand = np.logaddexp(la, lb)
        else:
            d = lb - la
            cand = np.where(d < 0, la + np.log(-np.expm1(np.minimum(d, 0.0))), np.nan)
        return np.where(np.isnan(cand), _direct_log(node, t), cand)
    raise TypeError(f"cannot log-evaluate {node!r}")


def log_derivative(node, t):
    """d/dt log(node(t)) = node'/node, computed structurally so that the
    ratio survives where both sides over- or underflow.  nan where undefined."""
    with np.errstate(all="ignore"):
        return _ldev(node, np.asarray(t, dtype=float))


def _ldev(node, t):
    if isinstance(node, Num):
        return np.zeros_like(t) if t.ndim else np.float64(0.0)
    if isinstance(node, Var):
        return 1.0 / t
    if isinstance(node, Mul):
        return _ldev(node.a, t) + _ldev(node.b, t)
    if isinstance(node, Div):
        return _ldev(node.a, t) - _ldev(node.b, t)
    if isinstance(node, Pow):
        return node.exponent * _ldev(node.base, t)
    if isinstance(node, Fun):
        du = _ev(differentiate(node.arg), t)
        x = _ev(node.arg, t)
        if node.name == "exp":
            return du
        if node.name == "sqrt":
            return 0.5 * _ldev(node.arg, t)
        if node.name == "sinh":
            return du / np.tanh(x)
        if node.name == "cosh":
            return du * np.tanh(x)
        if node.name == "log":
            return du / (x * np.log(x))
    if isinstance(node, (Add, Sub)):
        num = _ev(differentiate(node), t)
        den = _ev(node, t)
        return num / den
    raise TypeError(f"cannot log-differentiate {node!r}")
