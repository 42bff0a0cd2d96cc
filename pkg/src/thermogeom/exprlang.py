"""A small, total-by-construction expression language for scalar fields.

Hosts user definitions of metric coefficients, connection components,
state-function extensions and path coordinates.  Precedence, low to high:
``+ -``  <  ``* /``  <  unary ``-``  <  ``^`` (right-associative), so
``-l1^2`` means ``-(l1^2)``.  Functions: exp, log, sqrt, sin, cos, sinh,
cosh, tanh, abs (unary) and min, max, pow (binary).  The variable alphabet
is fixed by the parameter count n at parse time: {t, S, a1..an, l1..ln}.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import ExprArityError, ExprDomainError, ExprNameError, ExprSyntaxError

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "allowed_variables",
    "parse",
    "eval_expr",
    "free_vars",
    "pretty",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]

_FUNCTIONS = {
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "sinh": 1,
    "cosh": 1,
    "tanh": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}

_NUM_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPS = "+-*/^(),"


def allowed_variables(n: int) -> tuple[str, ...]:
    """Variable alphabet for a family with n intensive parameters."""
    if n < 1:
        raise ExprNameError(f"parameter count must be >= 1, got {n}")
    return ("t", "S") + tuple(f"a{i}" for i in range(1, n + 1)) + tuple(
        f"l{i}" for i in range(1, n + 1)
    )


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "−":  # unicode minus, accepted as '-'
            tokens.append(_Token("op", "-", i))
            i += 1
            continue
        m = _NUM_RE.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _NAME_RE.match(text, i)
        if m:
            tokens.append(_Token("name", m.group(), i))
            i = m.end()
            continue
        if ch in _OPS:
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], variables: tuple[str, ...]):
        self.tokens = tokens
        self.variables = variables
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"trailing input {tok.text!r}", tok.pos)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call(tok)
            if tok.text not in self.variables:
                raise ExprNameError(
                    f"unknown identifier {tok.text!r} at offset {tok.pos}; "
                    f"allowed variables: {', '.join(self.variables)}"
                )
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.pos)

    def call(self, name_tok: _Token) -> Expr:
        func = name_tok.text
        if func not in _FUNCTIONS:
            raise ExprNameError(
                f"unknown function {func!r} at offset {name_tok.pos}; "
                f"allowed functions: {', '.join(sorted(_FUNCTIONS))}"
            )
        self.expect_op("(")
        args = [self.expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expr())
        self.expect_op(")")
        arity = _FUNCTIONS[func]
        if len(args) != arity:
            raise ExprArityError(
                f"{func} takes {arity} argument(s), got {len(args)}"
            )
        return Call(func, tuple(args))


def parse(text: str, n: int) -> Expr:
    """Parse expression text against the variable alphabet fixed by n."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(_tokenize(text), allowed_variables(n)).parse()


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return frozenset().union(*(free_vars(a) for a in e.args)) if e.args else frozenset()


def _domain(node: Expr, what: str, value: float) -> ExprDomainError:
    return ExprDomainError(f"{what} in {pretty(node)!r} (operand {value!r})")


def _eval_pow(base: float, expo: float, node: Expr) -> float:
    if base == 0.0 and expo < 0.0:
        raise _domain(node, "zero raised to a negative power", base)
    if base < 0.0:
        if expo != math.floor(expo):
            raise _domain(node, "negative base with non-integer exponent", base)
        # integer fast path keeps (-2)^3 = -8 well defined
        try:
            return float(base ** int(expo))
        except OverflowError:
            raise _domain(node, "overflow", base) from None
    try:
        return math.pow(base, expo)
    except (OverflowError, ValueError):
        raise _domain(node, "overflow", base) from None


def eval_expr(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate in IEEE doubles; raises ExprDomainError on domain violations."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise ExprNameError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -eval_expr(e.arg, env)
    if isinstance(e, BinOp):
        a = eval_expr(e.left, env)
        b = eval_expr(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise _domain(e, "division by zero", b)
            return a / b
        return _eval_pow(a, b, e)
    fn = e.func
    vals = [eval_expr(a, env) for a in e.args]
    x = vals[0]
    try:
        if fn == "exp":
            return math.exp(x)
        if fn == "log":
            if x <= 0.0:
                raise _domain(e, "log of non-positive value", x)
            return math.log(x)
        if fn == "sqrt":
            if x < 0.0:
                raise _domain(e, "sqrt of negative value", x)
            return math.sqrt(x)
        if fn == "sin":
            return math.sin(x)
        if fn == "cos":
            return math.cos(x)
        if fn == "sinh":
            return math.sinh(x)
        if fn == "cosh":
            return math.cosh(x)
        if fn == "tanh":
            return math.tanh(x)
        if fn == "abs":
            return abs(x)
        if fn == "min":
            return min(x, vals[1])
        if fn == "max":
            return max(x, vals[1])
        return _eval_pow(x, vals[1], e)
    except OverflowError:
        raise _domain(e, "overflow", x) from None


# precedence levels for printing
_LVL_ADD, _LVL_MUL, _LVL_NEG, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        if e.op in "+-":
            return _LVL_ADD
        if e.op in "*/":
            return _LVL_MUL
        return _LVL_POW
    if isinstance(e, Neg):
        return _LVL_NEG
    return _LVL_ATOM


def _wrap(e: Expr, need_parens: bool) -> str:
    s = pretty(e)
    return f"({s})" if need_parens else s


def pretty(e: Expr) -> str:
    """Render with minimal grouping; a fixed point of parse . pretty."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _level(e.arg) < _LVL_NEG)
    if isinstance(e, BinOp):
        if e.op == "^":
            left = _wrap(e.left, _level(e.left) <= _LVL_POW)
            right = _wrap(e.right, _level(e.right) < _LVL_NEG)
            return f"{left}^{right}"
        lvl = _LVL_ADD if e.op in "+-" else _LVL_MUL
        left = _wrap(e.left, _level(e.left) < lvl)
        right = _wrap(e.right, _level(e.right) <= lvl)
        return f"{left}{e.op}{right}"
    return f"{e.func}({', '.join(pretty(a) for a in e.args)})"
