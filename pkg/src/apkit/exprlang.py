"""A small expression language for test functions.

Grammar (EBNF, see docs/grammar.md)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = primary [ "^" unary ] ;
    primary = NUMBER | NAME | NAME "(" expr { "," expr } ")" | "(" expr ")" ;

``^`` binds tighter than unary minus and is right-associative, so
``-2^2 == -4`` and ``2^3^2 == 512``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .field import FieldFunction, ParamFieldFunction

HS_DEFAULT_TERMS = 60


class ExprError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, line: int, col: int, expected: frozenset = frozenset()):
        self.expected = expected
        if expected:
            message += " (expected one of: " + ", ".join(sorted(expected)) + ")"
        super().__init__(message, line, col)


class UnknownIdentifier(ExprError):
    pass


class ArityError(ExprError):
    pass


class VariableIndexError(ExprError):
    pass


class EvaluationFault(ArithmeticError):
    """Division by zero or a domain error during evaluation."""

    def __init__(self, message: str, point):
        self.point = np.asarray(point).tolist()
        super().__init__(f"{message} at t={self.point}")


# --- AST --------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    kind: str  # "t" (coordinate) or "x" (parameter)
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Num | Const | Var | Neg | BinOp | Call

CONSTANTS = {"pi": math.pi, "e": math.e}
# name -> (min arity, max arity)
FUNCTIONS = {
    "sin": (1, 1), "cos": (1, 1), "exp": (1, 1), "abs": (1, 1), "sqrt": (1, 1),
    "min": (2, 2), "max": (2, 2), "cis": (1, 1), "hs": (1, 2),
}


# --- lexer ------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num | name | op | end
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("end", "", line, pos - line_start + 1))
    return tokens


# --- parser -----------------------------------------------------------------

_PRIMARY_START = frozenset({"number", "name", "'('", "'-'"})


class _Parser:
    def __init__(self, source: str, n: int, p: int):
        self.toks = tokenize(source)
        self.i = 0
        self.n, self.p = n, p

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind != "op":
            self.fail(f"'{text}'")
        return self.advance()

    def fail(self, *expected: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", t.line, t.col, frozenset(expected))

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("'+'", "'-'", "'*'", "'/'", "'^'", "end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            return self.identifier(t)
        self.fail(*_PRIMARY_START)

    def call(self, name_tok: Token) -> Expr:
        name = name_tok.text
        if name not in FUNCTIONS:
            kind = "variable" if name in CONSTANTS or _VAR.fullmatch(name) else "function"
            raise UnknownIdentifier(f"unknown {kind} {name!r} called", name_tok.line, name_tok.col)
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name]
        if not lo <= len(args) <= hi:
            want = str(lo) if lo == hi else f"{lo}..{hi}"
            raise ArityError(f"{name} takes {want} argument(s), got {len(args)}",
                             name_tok.line, name_tok.col)
        if name == "hs" and len(args) == 2:
            terms = args[1]
            if not (isinstance(terms, Num) and terms.value == int(terms.value) and terms.value >= 1):
                raise ArityError("hs truncation must be an integer literal >= 1",
                                 name_tok.line, name_tok.col)
        return Call(name, tuple(args))

    def identifier(self, t: Token) -> Expr:
        if t.text in CONSTANTS:
            return Const(t.text)
        m = _VAR.fullmatch(t.text)
        if m:
            kind, idx = m.group(1), int(m.group(2))
            limit = self.n if kind == "t" else self.p
            if not 1 <= idx <= limit:
                what = "dimension" if kind == "t" else "parameter count"
                raise VariableIndexError(f"{t.text} exceeds declared {what} {limit}", t.line, t.col)
            return Var(kind, idx)
        if t.text in FUNCTIONS:
            raise ArityError(f"function {t.text!r} used without arguments", t.line, t.col)
        raise UnknownIdentifier(f"unknown identifier {t.text!r}", t.line, t.col)


_VAR = re.compile(r"([tx])([1-9][0-9]*)")


def parse(source: str, n: int, p: int = 0) -> Expr:
    """Parse ``source`` with coordinates ``t1..tn`` and parameters ``x1..xp``."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 1, 1, _PRIMARY_START)
    return _Parser(source, n, p).parse()


def to_source(e: Expr) -> str:
    """Fully parenthesized source text; ``parse(to_source(e))`` rebuilds ``e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Var):
        return f"{e.kind}{e.index}"
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)}{e.op}{to_source(e.right)})"
    return f"{e.name}(" + ",".join(to_source(a) for a in e.args) + ")"


def max_indices(e: Expr) -> tuple[int, int]:
    """Largest ``t`` and ``x`` indices referenced in ``e``."""
    if isinstance(e, Var):
        return (e.index, 0) if e.kind == "t" else (0, e.index)
    children = {Neg: lambda x: (x.operand,), BinOp: lambda x: (x.left, x.right),
                Call: lambda x: x.args}.get(type(e), lambda x: ())(e)
    best = (0, 0)
    for c in children:
        ct, cx = max_indices(c)
        best = (max(best[0], ct), max(best[1], cx))
    return best


# --- evaluation -------------------------------------------------------------

def hs_series(t, terms: int = HS_DEFAULT_TERMS):
    """Truncated series ``sum_{k=1}^{terms} sin(t / 2^k)^2 / k``."""
    t = np.asarray(t)
    total = np.zeros(t.shape, dtype=np.result_type(t, float))
    for k in range(1, terms + 1):
        total = total + np.sin(t / 2.0**k) ** 2 / k
    return total


def _fault(mask, pts, message):
    idx = int(np.flatnonzero(np.broadcast_to(mask, (pts.shape[0],)))[0])
    raise EvaluationFault(message, pts[idx])


def _real_only(v, pts, name):
    if np.iscomplexobj(v):
        if np.any(v.imag != 0):
            _fault(v.imag != 0, pts, f"{name} needs real arguments")
        return v.real
    return v


def _build(e: Expr):
    """Turn an AST into ``fn(t, x, pts)`` returning an array over points."""
    if isinstance(e, Num):
        v = e.value
        return lambda t, x: np.float64(v)
    if isinstance(e, Const):
        v = CONSTANTS[e.name]
        return lambda t, x: np.float64(v)
    if isinstance(e, Var):
        j = e.index - 1
        if e.kind == "t":
            return lambda t, x: t[:, j]
        return lambda t, x: x[:, j]
    if isinstance(e, Neg):
        inner = _build(e.operand)
        return lambda t, x: -inner(t, x)
    if isinstance(e, BinOp):
        a, b = _build(e.left), _build(e.right)
        if e.op == "+":
            return lambda t, x: a(t, x) + b(t, x)
        if e.op == "-":
            return lambda t, x: a(t, x) - b(t, x)
        if e.op == "*":
            return lambda t, x: a(t, x) * b(t, x)
        if e.op == "/":
            def div(t, x):
                num, den = a(t, x), b(t, x)
                zero = den == 0
                if np.any(zero):
                    _fault(zero, t, "division by zero")
                return num / den
            return div

        def power(t, x):
            base, ex = a(t, x), b(t, x)
            with np.errstate(all="ignore"):
                out = np.power(base, ex) if np.iscomplexobj(base) or np.iscomplexobj(ex) \
                    else np.power(np.asarray(base, float), ex)
            bad = ~np.isfinite(out) & np.isfinite(base) & np.isfinite(ex)
            if np.any(bad):
                _fault(bad, t, "power outside its real domain")
            return out
        return power

    name, args = e.name, [_build(a) for a in e.args]
    if name == "hs":
        terms = int(e.args[1].value) if len(e.args) == 2 else HS_DEFAULT_TERMS
        arg = args[0]
        return lambda t, x: hs_series(arg(t, x), terms)
    if name == "cis":
        arg = args[0]
        return lambda t, x: np.exp(1j * arg(t, x))
    if name in ("min", "max"):
        op = np.minimum if name == "min" else np.maximum
        a, b = args
        return lambda t, x: op(_real_only(np.asarray(a(t, x)), t, name),
                               _real_only(np.asarray(b(t, x)), t, name))
    if name == "sqrt":
        arg = args[0]

        def sqrt(t, x):
            v = arg(t, x)
            if np.iscomplexobj(v):
                return np.sqrt(v)
            neg = np.asarray(v) < 0
            if np.any(neg):
                _fault(neg, t, "sqrt of a negative number")
            return np.sqrt(v)
        return sqrt
    fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name]
    arg = args[0]
    return lambda t, x: fn(arg(t, x))


def compile_expr(e: Expr, n: int, p: int = 0, label: str | None = None):
    """Compile to a :class:`FieldFunction` (``p == 0``) or :class:`ParamFieldFunction`."""
    fn = _build(e)
    text = label if label is not None else to_source(e)

    def scalar(t, x):
        out = np.asarray(fn(t, x))
        return np.broadcast_to(out, (t.shape[0],))

    if p == 0:
        empty = None
        return FieldFunction(n, 1, lambda t: scalar(t, empty), label=text, meta={"source": text})
    return ParamFieldFunction(n, p, 1, scalar, label=text, meta={"source": text})


def function_from_source(source: str, n: int, p: int = 0):
    """``compile_expr(parse(source, n, p), n, p)`` keeping the source as label."""
    return compile_expr(parse(source, n, p), n, p, label=source)
