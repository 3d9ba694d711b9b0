"""Expression language for matrix entries.

Grammar (whitespace is ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' ['-'] integer)?
    base   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

Identifiers are ``u v p q k s exp f1..f9 g1..g9``.  Numbers are integers or
decimals; decimals are kept as exact rationals and only become floats in
the ``f64`` backend.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .scalars import EvaluationError, SingularValue

__all__ = [
    "Expr", "Num", "Sym", "Call", "BinOp", "Neg", "Pow",
    "ParseError", "parse", "to_text", "evaluate", "free_symbols", "function_names",
    "SPECTRAL", "PARAMS", "FUNCTIONS",
]

SPECTRAL = ("u", "v")
PARAMS = ("p", "q", "k", "s")
FUNCTIONS = tuple(f"f{i}" for i in range(1, 10)) + tuple(f"g{i}" for i in range(1, 10))
_IDENTS = set(SPECTRAL) | set(PARAMS) | set(FUNCTIONS) | {"exp"}


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction
    text: str


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str):
    data = text.encode("utf-8")
    # offsets are reported in bytes; work on the ascii-only subset
    try:
        src = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("non-ascii character", exc.start) from None
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            break
        if m.group(0).strip() == "":
            break
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(("num", m.group(1), start))
        elif m.group(2):
            name = m.group(2)
            if name not in _IDENTS:
                raise ParseError(f"unknown identifier {name!r}", start)
            toks.append(("id", name, start))
        else:
            ch = m.group(3)
            if ch not in "+-*/^(),":
                raise ParseError(f"unexpected character {ch!r}", start)
            toks.append(("op", ch, start))
        pos = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", tok[2])
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.peek() == ("op", "-", self.peek()[2]):
            self.take()
            return Neg(self.factor())
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1
            tok = self.take("num")
            if not tok[1].isdigit():
                raise ParseError("exponent must be an integer", tok[2])
            node = Pow(node, sign * int(tok[1]))
        return node

    def base(self):
        kind, val, off = self.peek()
        if kind == "num":
            self.take()
            return Num(Fraction(val), val)
        if kind == "id":
            self.take()
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val in SPECTRAL or val in PARAMS:
                    raise ParseError(f"{val!r} is not a function", off)
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                if val == "exp" and len(args) != 1:
                    raise ParseError("exp takes one argument", off)
                return Call(val, tuple(args))
            if val == "exp" or val in FUNCTIONS:
                raise ParseError(f"{val!r} needs arguments", off)
            return Sym(val)
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", off)


def parse(text: str) -> Expr:
    p = _Parser(text)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ParseError(f"trailing input {val!r}", off)
    return node


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: Expr) -> str:
    """Print an expression; ``parse(to_text(e)) == e``."""
    if isinstance(e, Num):
        return e.text
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Call):
        return f"{e.name}({','.join(to_text(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        return f"-({inner})" if isinstance(e.arg, BinOp) else f"-{inner}"
    if isinstance(e, Pow):
        inner = to_text(e.base)
        if not isinstance(e.base, (Num, Sym, Call)):
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = to_text(e.left)
        if isinstance(e.left, BinOp) and _PREC[e.left.op] < p:
            left = f"({left})"
        right = to_text(e.right)
        if (isinstance(e.right, BinOp) and _PREC[e.right.op] <= p) or (
                isinstance(e.right, Neg) and p == 1):
            right = f"({right})"
        return f"{left}{e.op}{right}"
    raise TypeError(f"not an expression: {e!r}")


def free_symbols(e: Expr) -> set:
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Call):
        return set().union(*(free_symbols(a) for a in e.args))
    if isinstance(e, (Neg,)):
        return free_symbols(e.arg)
    if isinstance(e, Pow):
        return free_symbols(e.base)
    return free_symbols(e.left) | free_symbols(e.right)


def function_names(e: Expr) -> set:
    if isinstance(e, Call):
        own = {e.name} if e.name != "exp" else set()
        return own.union(*(function_names(a) for a in e.args))
    if isinstance(e, Neg):
        return function_names(e.arg)
    if isinstance(e, Pow):
        return function_names(e.base)
    if isinstance(e, BinOp):
        return function_names(e.left) | function_names(e.right)
    return set()


def evaluate(e: Expr, backend, env: dict, params: dict | None = None, fns: dict | None = None):
    """Evaluate ``e`` in ``backend``.

    ``env`` maps ``u``/``v`` to backend values; ``params`` maps parameter
    names to values (missing ones are delegated to ``backend.param``);
    ``fns`` maps function names to callables taking a list of argument values.
    """
    params = params or {}
    fns = fns or {}

    def go(n):
        if isinstance(n, Num):
            return backend.decimal(n.text) if "." in n.text else backend.const(n.value)
        if isinstance(n, Sym):
            if n.name in SPECTRAL:
                if n.name not in env:
                    raise EvaluationError(f"unbound spectral variable {n.name!r}")
                return env[n.name]
            return backend.param(n.name, params.get(n.name))
        if isinstance(n, Call):
            args = [go(a) for a in n.args]
            if n.name == "exp":
                return backend.exp(args[0])
            if n.name not in fns:
                raise EvaluationError(f"unbound free function {n.name!r}")
            return fns[n.name](args)
        if isinstance(n, Neg):
            return -go(n.arg)
        if isinstance(n, Pow):
            return go(n.base) ** n.exponent
        a, b = go(n.left), go(n.right)
        if n.op == "+":
            return a + b
        if n.op == "-":
            return a - b
        if n.op == "*":
            return a * b
        try:
            return a / b
        except ZeroDivisionError:
            raise SingularValue("division by zero") from None

    return go(e)
