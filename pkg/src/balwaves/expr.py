"""Expression language for user-supplied flux and reaction functions.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' exponent)?          right-associative
    exponent:= '-' exponent | '+' exponent | power   (must not contain u)
    atom    := NUMBER | 'u' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := exp | ln | sqrt | sin | cos

``^`` binds tighter than unary minus, so ``-u^2`` is ``-(u^2)``.  Exponents
must be constant; they are folded to a float at parse time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jet as _jet
from .jet import DomainError, Jet3

VARIABLE = "u"
FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos")


class ExprSyntaxError(SyntaxError):
    """Parse failure; ``position`` is the byte offset into the source."""

    def __init__(self, message: str, source: str, position: int):
        self.source = source
        self.position = position
        super().__init__(f"{message} at offset {position}")


class ExprDomainError(DomainError):
    """Evaluation left the domain of a subexpression."""

    def __init__(self, node: "Node", value):
        self.node = node
        self.subexpression = to_source(node)
        DomainError.__init__(self, self.subexpression, value)


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = VARIABLE


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Pow, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unknown token {source[pos]!r}", source, pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, self.source, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {value!r}, found {what}")
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"trailing input {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            tok = self.take()
            start = self.i
            exponent = self.exponent()
            if _contains_var(exponent):
                self.error("exponent must be constant", self.tokens[start])
            try:
                value = float(eval_jet3(exponent, 0.0).v0)
            except DomainError as exc:
                self.error(f"exponent not evaluable ({exc})", tok)
            if not np.isfinite(value):
                self.error("exponent not finite", tok)
            return Pow(base, value)
        return base

    def exponent(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.exponent())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.exponent()
        return self.power()

    def atom(self) -> Node:
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text == VARIABLE:
                return Var()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            self.error(f"unknown name {text!r}", tok)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of input", tok)
        self.error(f"unexpected {text!r}", tok)


def _contains_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, Neg):
        return _contains_var(node.arg)
    if isinstance(node, BinOp):
        return _contains_var(node.left) or _contains_var(node.right)
    if isinstance(node, Pow):
        return _contains_var(node.base)
    return _contains_var(node.arg)


def parse(source: str) -> Node:
    """Parse ``source`` into an immutable expression tree."""
    return _Parser(source).parse()


# -- printing --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def to_source(node: Node) -> str:
    """Canonical text for ``node``; parsing it gives back an equal tree."""
    return _show(node, 0)


def _show(node: Node, ctx: int) -> str:
    # ctx: 0 top/sum lhs, 1 sum rhs, 2 product lhs, 3 product rhs, 4 unary operand, 5 power base
    if isinstance(node, Const):
        s = _fmt_number(node.value)
        return f"({s})" if ctx >= 5 and node.value < 0 else s
    if isinstance(node, Var):
        return VARIABLE
    if isinstance(node, Call):
        return f"{node.func}({_show(node.arg, 0)})"
    if isinstance(node, Pow):
        e = node.exponent
        es = _fmt_number(e)
        if e < 0:
            es = f"({es})"
        s = f"{_show(node.base, 5)}^{es}"
        return f"({s})" if ctx >= 5 else s
    if isinstance(node, Neg):
        s = "-" + _show(node.arg, 4)
        return f"({s})" if ctx >= 5 else s
    prec = _PREC[node.op]
    left_ctx = 0 if prec == 1 else 2
    right_ctx = 1 if prec == 1 else 3
    s = f"{_show(node.left, left_ctx)} {node.op} {_show(node.right, right_ctx)}"
    needs = (
        (prec == 1 and ctx >= 1)
        or (prec == 2 and ctx >= 3)
    )
    return f"({s})" if needs else s


# -- evaluation ------------------------------------------------------------


def eval_jet3(node: Node, u) -> Jet3:
    """Value and first three u-derivatives of ``node`` at ``u``.

    ``u`` may be a float or a numpy array (elementwise evaluation).
    """
    x = Jet3.variable(u)
    out = _eval(node, x)
    if np.ndim(u) == 0:
        return _jet.scalar(out)
    shape = np.shape(u)
    return Jet3(*(np.broadcast_to(v, shape).astype(float) for v in out.as_tuple()))


def _eval(node: Node, x: Jet3) -> Jet3:
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return Jet3.constant(node.value)
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        try:
            return a * _jet.reciprocal(b)
        except DomainError as exc:
            raise ExprDomainError(node, exc.value) from None
    if isinstance(node, Pow):
        base = _eval(node.base, x)
        try:
            return _jet.power(base, node.exponent)
        except DomainError as exc:
            raise ExprDomainError(node, exc.value) from None
    arg = _eval(node.arg, x)
    try:
        return _jet.UNARY[node.func](arg)
    except DomainError as exc:
        raise ExprDomainError(node, exc.value) from None


class Expression:
    """Parsed expression bundled with its source text; callable as u -> Jet3."""

    def __init__(self, source: str):
        self.source = source
        self.ast = parse(source)

    def __call__(self, u) -> Jet3:
        return eval_jet3(self.ast, u)

    def __repr__(self):
        return f"Expression({to_source(self.ast)!r})"
