"""Integrand/dynamics expression language.

Expressions are small arithmetic formulas over the fixed variable set
``t, x, v, u, z, s`` plus named parameters::

    v^2 + alpha*z^2 + beta*(s-1)^2

``x`` is the rho-composed state, ``v`` the nabla derivative (Lagrange
problems) and ``u`` the rho-composed control (control problems), ``z`` and
``s`` the state at the left and right endpoints. Any other identifier is a
parameter and must be bound at evaluation time.

Evaluation propagates exact first partials with respect to the four slots
``(x, v|u, z, s)``; ``t`` is never differentiated. Inputs may be numpy
arrays, in which case everything broadcasts and one call evaluates a whole
grid.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import DomainError, ExprError, ParseError, UnboundParameterError

VARIABLES = frozenset("txvuzs")
LAGRANGE_VARIABLES = frozenset("txvzs")
CONTROL_VARIABLES = frozenset("txuzs")
FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")

#: sensitivity slot of each differentiable variable
SLOT = {"x": 0, "v": 1, "u": 1, "z": 2, "s": 3}
SLOT_NAMES = ("x", "v|u", "z", "s")

MAX_UNROLLED_POWER = 8


# -- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: Node


@dataclass(frozen=True)
class Call:
    fn: str
    arg: Node


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node


Node = Union[Num, Var, Param, Neg, Call, BinOp]


# -- tokenizer --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op" or "end"
    text: str
    offset: int


def tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# -- parser -----------------------------------------------------------------

# binary operators: precedence, right-associative?
_BINARY = {"+": (1, False), "-": (1, False), "*": (2, False), "/": (2, False)}
_UNARY_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok.text != text or tok.kind == "end":
            raise ParseError(f"expected {text!r}, found {_describe(tok)}", tok.offset)
        self.advance()

    def parse(self) -> Node:
        node = self.binary(1)
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {_describe(tok)}", tok.offset)
        return node

    def binary(self, min_prec: int) -> Node:
        # precedence climbing over the left-associative levels
        left = self.unary()
        while True:
            tok = self.peek()
            info = _BINARY.get(tok.text) if tok.kind == "op" else None
            if info is None or info[0] < min_prec:
                return left
            self.advance()
            right = self.binary(info[0] + 1)
            left = BinOp(tok.text, left, right)

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # right operand is a unary, which makes ^ right-associative
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            if not np.isfinite(value):
                raise ParseError(f"number {tok.text!r} is out of range", tok.offset)
            return Num(value)
        if tok.kind == "ident":
            if self.peek().text == "(" and self.peek().kind == "op":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.offset)
                self.advance()
                arg = self.binary(1)
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                raise ParseError(f"function {tok.text!r} needs an argument", tok.offset)
            if tok.text in VARIABLES:
                return Var(tok.text)
            return Param(tok.text)
        if tok.kind == "op" and tok.text == "(":
            inner = self.binary(1)
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {_describe(tok)}", tok.offset)


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "end" else repr(tok.text)


# -- printing -----------------------------------------------------------------


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _BINARY[node.op][0]
    if isinstance(node, Neg):
        return _UNARY_PREC
    return _ATOM_PREC


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def to_source(node: Node) -> str:
    """Render an AST with the minimal parentheses needed to re-parse it."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _prec(node.arg) < _UNARY_PREC)
    if node.op == "^":
        left = _wrap(node.left, _prec(node.left) < _ATOM_PREC)
        right = _wrap(node.right, _prec(node.right) < _UNARY_PREC)
        return f"{left}^{right}"
    p = _BINARY[node.op][0]
    left = _wrap(node.left, _prec(node.left) < p)
    right = _wrap(node.right, _prec(node.right) <= p)
    if node.op in "+-":
        return f"{left} {node.op} {right}"
    return f"{left}{node.op}{right}"


def _wrap(node: Node, paren: bool) -> str:
    text = to_source(node)
    return f"({text})" if paren else text


# -- public expression type -------------------------------------------------


def _collect(node: Node, kind: type, out: set) -> set:
    if isinstance(node, kind):
        out.add(node.name)
    elif isinstance(node, (Neg, Call)):
        _collect(node.arg, kind, out)
    elif isinstance(node, BinOp):
        _collect(node.left, kind, out)
        _collect(node.right, kind, out)
    return out


@dataclass(frozen=True)
class Expression:
    """A parsed expression. Equality is structural (on the AST)."""

    root: Node
    source: str = field(default="", compare=False)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(_collect(self.root, Var, set()))

    @property
    def parameters(self) -> frozenset[str]:
        return frozenset(_collect(self.root, Param, set()))

    def __str__(self) -> str:
        return to_source(self.root)

    def check_variables(self, allowed: frozenset[str], what: str = "expression") -> None:
        bad = self.variables - allowed
        if bad:
            raise ExprError(
                f"{what} uses variable(s) {sorted(bad)} not allowed here; "
                f"allowed: {sorted(allowed)}"
            )


def parse(source: str) -> Expression:
    """Parse ``source`` into an :class:`Expression`.

    Raises:
        ParseError: on syntax errors and unknown function names; the
            ``offset`` attribute is the character position of the problem.
    """
    if not isinstance(source, str):
        raise ParseError("expression must be a string", 0)
    return Expression(_Parser(source).parse(), source)


# -- evaluation with sensitivities ----------------------------------------------

# partials are 4-tuples; None marks an identically zero partial
_ZERO4 = (None, None, None, None)


def _unit(slot: int):
    return tuple(1.0 if i == slot else None for i in range(4))


_UNITS = {name: _unit(k) for name, k in SLOT.items()}


def _scale(d, c):
    return tuple(None if di is None else c * di for di in d)


def _axpy(d1, c1, d2, c2):
    out = []
    for a, b in zip(d1, d2):
        if a is None and b is None:
            out.append(None)
        elif a is None:
            out.append(c2 * b)
        elif b is None:
            out.append(c1 * a)
        else:
            out.append(c1 * a + c2 * b)
    return tuple(out)


def _is_const(d) -> bool:
    return all(di is None for di in d)


@dataclass(frozen=True)
class SensValue:
    """Value plus first partials with respect to ``(x, v|u, z, s)``.

    For array inputs ``value`` has the broadcast shape and ``partials``
    has that shape with a leading axis of length 4.
    """

    value: Any
    partials: np.ndarray

    @property
    def dx(self):
        return self.partials[0]

    @property
    def dv(self):
        return self.partials[1]

    du = dv

    @property
    def dz(self):
        return self.partials[2]

    @property
    def ds(self):
        return self.partials[3]


class _Env:
    __slots__ = ("t", "slots", "params", "names")

    def __init__(self, at: Mapping[str, Any], params: Mapping[str, float]):
        self.t = at.get("t")
        slot1 = at["v"] if "v" in at else at.get("u")
        self.slots = (at.get("x"), slot1, at.get("z"), at.get("s"))
        self.params = params


def _any(mask) -> bool:
    return bool(np.any(mask))


def _ev(node: Node, env: _Env):
    if isinstance(node, Num):
        return node.value, _ZERO4
    if isinstance(node, Var):
        if node.name == "t":
            if env.t is None:
                raise ExprError("variable 't' was not supplied")
            return env.t, _ZERO4
        val = env.slots[SLOT[node.name]]
        if val is None:
            raise ExprError(f"variable {node.name!r} was not supplied")
        return val, _UNITS[node.name]
    if isinstance(node, Param):
        try:
            return float(env.params[node.name]), _ZERO4
        except KeyError:
            raise UnboundParameterError(f"parameter {node.name!r} is not bound") from None
    if isinstance(node, Neg):
        a, da = _ev(node.arg, env)
        return -a, _scale(da, -1.0)
    if isinstance(node, Call):
        return _call(node.fn, *_ev(node.arg, env))
    a, da = _ev(node.left, env)
    b, db = _ev(node.right, env)
    op = node.op
    if op == "+":
        return a + b, _axpy(da, 1.0, db, 1.0)
    if op == "-":
        return a - b, _axpy(da, 1.0, db, -1.0)
    if op == "*":
        return a * b, _axpy(da, b, db, a)
    if op == "/":
        if _any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        q = a / b
        return q, _axpy(da, 1.0 / b, db, -q / b)
    return _power(a, da, b, db)


def _call(fn: str, a, da):
    if fn == "sin":
        return np.sin(a), _scale(da, np.cos(a))
    if fn == "cos":
        return np.cos(a), _scale(da, -np.sin(a))
    if fn == "exp":
        e = np.exp(a)
        return e, _scale(da, e)
    if fn == "ln":
        if _any(np.asarray(a) <= 0):
            raise DomainError("ln of a non-positive number")
        return np.log(a), _scale(da, 1.0 / a)
    # sqrt
    if _any(np.asarray(a) < 0):
        raise DomainError("sqrt of a negative number")
    r = np.sqrt(a)
    if _is_const(da):
        return r, _ZERO4
    if _any(np.asarray(a) == 0):
        raise DomainError("sqrt is not differentiable at 0")
    return r, _scale(da, 0.5 / r)


def _int_pow(a, n: int):
    """a**n for 0 <= n by repeated multiplication."""
    result = 1.0
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _power(a, da, b, db):
    if _is_const(db) and np.ndim(b) == 0 and float(b).is_integer():
        n = int(b)
        if n == 0:
            return 1.0 + 0.0 * a, _ZERO4
        if abs(n) <= MAX_UNROLLED_POWER:
            if n > 0:
                below = _int_pow(a, n - 1)
                return below * a, _scale(da, n * below)
            if _any(np.asarray(a) == 0):
                raise DomainError("zero raised to a negative power")
            pos = _int_pow(a, -n)
            val = 1.0 / pos
            return val, _scale(da, n * val / a)
        if n < 0 and _any(np.asarray(a) == 0):
            raise DomainError("zero raised to a negative power")
        below = np.power(a, float(n - 1))
        return below * a, _scale(da, n * below)
    if _any(np.asarray(a) <= 0):
        raise DomainError("non-integer power of a non-positive base")
    val = np.power(a, b)
    la = np.log(a)
    return val, _axpy(da, val * b / a, db, val * la)


def eval_with_sens(
    e: Expression, at: Mapping[str, Any], params: Mapping[str, float] | None = None
) -> SensValue:
    """Evaluate ``e`` and its partials with respect to ``(x, v|u, z, s)``.

    Args:
        e: parsed expression.
        at: values for the variables the expression uses. The second slot
            is read from ``"v"`` or, failing that, ``"u"``. Values may be
            numpy arrays; they are broadcast together.
        params: parameter bindings.

    Raises:
        UnboundParameterError: a parameter is missing from ``params``.
        DomainError: ln/sqrt/non-integer power/division outside the domain.
    """
    env = _Env(at, params or {})
    with np.errstate(over="ignore", invalid="ignore"):
        value, d = _ev(e.root, env)
    shape = np.broadcast_shapes(
        np.shape(value), *(np.shape(v) for v in (env.t, *env.slots) if v is not None)
    )
    partials = np.zeros((4,) + shape)
    for k, dk in enumerate(d):
        if dk is not None:
            partials[k] = dk
    if shape:
        value = np.broadcast_to(value, shape).astype(float, copy=True)
    else:
        value = float(value)
    return SensValue(value, partials)


def eval_value(e: Expression, at: Mapping[str, Any], params: Mapping[str, float] | None = None):
    """Value only; see :func:`eval_with_sens`."""
    return eval_with_sens(e, at, params).value


def sample_hessian(
    e: Expression, at: Mapping[str, Any], params: Mapping[str, float] | None = None
) -> np.ndarray:
    """Hessian over ``(x, v|u, z, s)`` by central differences of exact gradients.

    The step in slot ``j`` is ``1e-5 * max(1, |coordinate j|)``. The result is
    symmetrized; for array inputs the trailing two axes are the 4x4 matrix.
    """
    key1 = "v" if "v" in at else "u"
    names = ("x", key1, "z", "s")
    base = {k: at.get(k, 0.0) for k in ("t", *names)}
    cols = []
    for name in names:
        c = np.asarray(base[name], dtype=float)
        h = 1e-5 * np.maximum(1.0, np.abs(c))
        plus = dict(base)
        plus[name] = c + h
        minus = dict(base)
        minus[name] = c - h
        gp = eval_with_sens(e, plus, params).partials
        gm = eval_with_sens(e, minus, params).partials
        cols.append((gp - gm) / (2.0 * h))
    shape = np.broadcast_shapes(*(c.shape[1:] for c in cols))
    # hess[..., i, j] = d(partial_i)/d(slot_j)
    hess = np.stack([np.broadcast_to(c, (4,) + shape) for c in cols], axis=-1)
    hess = np.moveaxis(hess, 0, -2)
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))

