"""User-supplied log-densities: a small Pratt parser and forward-mode duals.

Grammar (loosest to tightest)::

    expr   := expr ('+' | '-') expr
            | expr ('*' | '/') expr
            | '-' expr | '+' expr
            | expr '^' expr          (right-assoc, exponent must be constant)
            | NUMBER | 'x' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := ln | log | exp | sqrt | abs

``log`` is the natural log. ``**`` is accepted as a synonym for ``^``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, List, NamedTuple, Union

from .errors import DomainError, EvaluationError, ParseError, UnknownIdentifierError
from .targets import DomainInterval, LogTarget


class NonConstantExponentError(ParseError):
    pass


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Unary:
    op: str  # neg | ln | exp | sqrt | abs
    arg: "Ast"


@dataclass(frozen=True)
class Binary:
    op: str  # add | sub | mul | div | pow
    left: "Ast"
    right: "Ast"


Ast = Union[Const, Var, Unary, Binary]

FUNCTIONS = {"ln": "ln", "log": "ln", "exp": "exp", "sqrt": "sqrt", "abs": "abs"}
_BINARY = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_SYMBOL = {v: k for k, v in _BINARY.items()}
_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREFIX_BP = 25  # binds tighter than * and looser than ^: -x^2 == -(x^2)

_OPERAND = ("number", "'x'", "function", "'('", "'-'")


def has_variable(ast: Ast) -> bool:
    if isinstance(ast, Var):
        return True
    if isinstance(ast, Unary):
        return has_variable(ast.arg)
    if isinstance(ast, Binary):
        return has_variable(ast.left) or has_variable(ast.right)
    return False


# --- tokenizer ---------------------------------------------------------------

class Token(NamedTuple):
    kind: str  # num | ident | op | end
    text: str
    offset: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op>\*\*|[-+*/^()])
""", re.VERBOSE)


def tokenize(source: str) -> Iterator[Token]:
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos, _OPERAND)
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            yield Token(kind, "^" if text == "**" else text, pos)
        pos = m.end()
    yield Token("end", "", len(source))


# --- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.tokens = list(tokenize(source))
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise ParseError(f"unexpected {self._describe(self.tok)}", self.tok.offset,
                             (repr(text),))
        self.advance()

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "end" else repr(t.text)

    def expression(self, rbp: int = 0) -> Ast:
        left = self.nud(self.advance())
        while self.tok.kind == "op" and _LBP.get(self.tok.text, 0) > rbp:
            left = self.led(self.advance(), left)
        return left

    def nud(self, t: Token) -> Ast:
        if t.kind == "num":
            value = float(t.text)
            if not math.isfinite(value):
                raise ParseError(f"numeric literal {t.text} overflows", t.offset)
            return Const(value)
        if t.kind == "ident":
            if t.text == "x":
                return Var()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Unary(FUNCTIONS[t.text], arg)
            raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.offset,
                                         ("'x'",) + tuple(sorted(FUNCTIONS)))
        if t.kind == "op":
            if t.text == "(":
                inner = self.expression()
                self.expect(")")
                return inner
            if t.text == "-":
                return Unary("neg", self.expression(_PREFIX_BP))
            if t.text == "+":
                return self.expression(_PREFIX_BP)
        raise ParseError(f"unexpected {self._describe(t)}", t.offset, _OPERAND)

    def led(self, t: Token, left: Ast) -> Ast:
        if t.text == "^":
            start = self.tok.offset
            right = self.expression(_LBP["^"] - 1)
            if has_variable(right):
                raise NonConstantExponentError("exponent must not depend on x", start)
            return Binary("pow", left, right)
        return Binary(_BINARY[t.text], left, self.expression(_LBP[t.text]))

    def parse(self) -> Ast:
        ast = self.expression()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self._describe(self.tok)}", self.tok.offset,
                             ("operator", "end of input"))
        return ast


def parse(source: str) -> Ast:
    """Parse a log-density expression in ``x``."""
    if not source or not source.strip():
        raise ParseError("empty expression", 0, _OPERAND)
    return _Parser(source).parse()


def to_source(ast: Ast) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(ast, Const):
        return repr(ast.value)
    if isinstance(ast, Var):
        return "x"
    if isinstance(ast, Unary):
        if ast.op == "neg":
            return f"(-{to_source(ast.arg)})"
        return f"{ast.op}({to_source(ast.arg)})"
    return f"({to_source(ast.left)} {_SYMBOL[ast.op]} {to_source(ast.right)})"


# --- dual numbers ------------------------------------------------------------

class Dual:
    """Value and derivative carried together through arithmetic."""

    __slots__ = ("value", "deriv")

    def __init__(self, value: float, deriv: float = 0.0):
        self.value = value
        self.deriv = deriv

    def __repr__(self):
        return f"Dual({self.value!r}, {self.deriv!r})"

    def __eq__(self, other):
        return (isinstance(other, Dual) and self.value == other.value
                and self.deriv == other.deriv)

    def __iter__(self):
        yield self.value
        yield self.deriv

    def __add__(self, o: "Dual") -> "Dual":
        return Dual(self.value + o.value, self.deriv + o.deriv)

    def __sub__(self, o: "Dual") -> "Dual":
        return Dual(self.value - o.value, self.deriv - o.deriv)

    def __mul__(self, o: "Dual") -> "Dual":
        return Dual(self.value * o.value, self.deriv * o.value + self.value * o.deriv)

    def __truediv__(self, o: "Dual") -> "Dual":
        if o.value == 0:
            raise ZeroDivisionError("division by zero")
        q = self.value / o.value
        return Dual(q, (self.deriv - q * o.deriv) / o.value)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.deriv)

    def __pow__(self, c: float) -> "Dual":
        if c == 0:
            return Dual(1.0, 0.0)
        return Dual(math.pow(self.value, c), c * math.pow(self.value, c - 1) * self.deriv)

    def ln(self) -> "Dual":
        if self.value <= 0:
            raise ValueError(f"log of non-positive value {self.value}")
        return Dual(math.log(self.value), self.deriv / self.value)

    def exp(self) -> "Dual":
        e = math.exp(self.value)
        return Dual(e, e * self.deriv)

    def sqrt(self) -> "Dual":
        if self.value <= 0:
            raise ValueError(f"sqrt of non-positive value {self.value}")
        r = math.sqrt(self.value)
        return Dual(r, self.deriv / (2 * r))

    def abs(self) -> "Dual":
        if self.value < 0:
            return -self
        if self.value > 0:
            return Dual(self.value, self.deriv)
        return Dual(0.0, 0.0)


def _dual(ast: Ast, x: Dual) -> Dual:
    if isinstance(ast, Const):
        return Dual(ast.value)
    if isinstance(ast, Var):
        return x
    try:
        if isinstance(ast, Unary):
            a = _dual(ast.arg, x)
            return -a if ast.op == "neg" else getattr(a, ast.op)()
        left = _dual(ast.left, x)
        if ast.op == "pow":
            return left ** _dual(ast.right, x).value
        right = _dual(ast.right, x)
        if ast.op == "add":
            return left + right
        if ast.op == "sub":
            return left - right
        if ast.op == "mul":
            return left * right
        return left / right
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvaluationError(f"cannot evaluate {to_source(ast)} at x={x.value}: {exc}",
                              ast) from None


def eval_dual(ast: Ast, x: float) -> Dual:
    """``(V(x), V'(x))`` with the derivative exact up to rounding."""
    return _dual(ast, Dual(float(x), 1.0))


# --- plain-float compilation for the sampling hot path -----------------------

def _checked_log(v):
    if v <= 0:
        raise ValueError(f"log of non-positive value {v}")
    return math.log(v)


def _checked_sqrt(v):
    if v <= 0:
        raise ValueError(f"sqrt of non-positive value {v}")
    return math.sqrt(v)


_UNARY_FN = {"ln": _checked_log, "exp": math.exp, "sqrt": _checked_sqrt, "abs": abs}


def compile_value(ast: Ast) -> Callable[[float], float]:
    """Closure computing ``V(x)`` only (no derivative bookkeeping)."""
    if isinstance(ast, Const):
        c = ast.value
        return lambda x: c
    if isinstance(ast, Var):
        return lambda x: x
    if isinstance(ast, Unary):
        f = compile_value(ast.arg)
        if ast.op == "neg":
            return lambda x: -f(x)
        g = _UNARY_FN[ast.op]
        return lambda x: g(f(x))
    a, b = compile_value(ast.left), compile_value(ast.right)
    op = ast.op
    if op == "add":
        return lambda x: a(x) + b(x)
    if op == "sub":
        return lambda x: a(x) - b(x)
    if op == "mul":
        return lambda x: a(x) * b(x)
    if op == "div":
        return lambda x: a(x) / b(x)
    c = b(0.0)
    if c == 2.0:
        return lambda x: a(x) ** 2
    return lambda x: math.pow(a(x), c)


class ExpressionTarget(LogTarget):
    """LogTarget backed by a parsed expression. Concavity is not checked here."""

    def __init__(self, ast: Ast, domain: DomainInterval):
        self.ast = ast
        self._domain = domain
        self._value = compile_value(ast)

    def log_density(self, x):
        if not self._domain.lower < x < self._domain.upper:
            raise DomainError(f"x={x} outside {self._domain}")
        try:
            v = self._value(x)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"cannot evaluate {to_source(self.ast)} at x={x}: {exc}",
                                  self.ast) from None
        if math.isnan(v) or v == math.inf:
            raise EvaluationError(f"log-density is {v} at x={x}", self.ast)
        return v

    def log_density_derivative(self, x):
        if not self._domain.lower < x < self._domain.upper:
            raise DomainError(f"x={x} outside {self._domain}")
        return eval_dual(self.ast, x).deriv

    def domain(self):
        return self._domain

    def __repr__(self):
        return f"ExpressionTarget({to_source(self.ast)!r}, {self._domain})"

    def __reduce__(self):
        return (ExpressionTarget, (self.ast, self._domain))


def expression_target(ast: Union[Ast, str], domain: DomainInterval) -> ExpressionTarget:
    if isinstance(ast, str):
        ast = parse(ast)
    return ExpressionTarget(ast, domain)
