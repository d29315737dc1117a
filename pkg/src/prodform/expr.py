"""Small expression language for inline chart maps.

Grammar (lowest precedence first)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | CONST | VAR | FUNC "(" expr ")" | "(" expr ")"

Variables are x1..xm, constants are pi and e, functions are sin, cos, sinh,
cosh and sqrt.  Numbers are kept as exact rationals so that the decimal
literal in the scenario file is what gets differentiated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import sympy as sp

from .errors import ParseError

FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "sinh": sp.sinh, "cosh": sp.cosh, "sqrt": sp.sqrt}
CONSTANTS = {"pi": sp.pi, "e": sp.E}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    col: int  # 1-based


def tokenize(src: str, field: str | None = None) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", column=pos + 1, field=field)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    out.append(Token("end", "", len(src) + 1))
    return out


class _Parser:
    def __init__(self, src: str, symbols: Sequence[sp.Symbol], field: str | None):
        self.field = field
        self.toks = tokenize(src, field)
        self.i = 0
        self.vars = {s.name: s for s in symbols}

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, column=tok.col, field=self.field)

    def peek(self) -> Token:
        return self.toks[self.i]

    def take(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text or t.kind != "op":
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise self.error(f"expected {text!r}, found {found}")
        return self.take()

    def parse(self) -> sp.Expr:
        if self.peek().kind == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.peek().kind != "end":
            raise self.error(f"unexpected {self.peek().text!r}")
        return e

    def expr(self) -> sp.Expr:
        e = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> sp.Expr:
        e = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.take()
            rhs = self.unary()
            if op.text == "/":
                if rhs == 0:
                    raise self.error("division by zero", op)
                e = e / rhs
            else:
                e = e * rhs
        return e

    def unary(self) -> sp.Expr:
        t = self.peek()
        if t.kind == "op" and t.text in ("+", "-"):
            self.take()
            v = self.unary()
            return -v if t.text == "-" else v
        return self.power()

    def power(self) -> sp.Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            return base ** self.unary()
        return base

    def atom(self) -> sp.Expr:
        t = self.take()
        if t.kind == "num":
            return sp.Rational(t.text)
        if t.kind == "name":
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[t.text](arg)
            if t.text in CONSTANTS:
                return CONSTANTS[t.text]
            if t.text in self.vars:
                return self.vars[t.text]
            if re.fullmatch(r"x\d+", t.text):
                raise self.error(f"variable {t.text} is outside the chart variables "
                                 f"x1..x{len(self.vars)}", t)
            raise self.error(f"unknown name {t.text!r}", t)
        if t.kind == "op" and t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise self.error(f"expected a number, name or '(', found {found}", t)


def chart_symbols(m: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"x{i + 1}", real=True) for i in range(m))


def parse_expression(src: str, symbols: Sequence[sp.Symbol], field: str | None = None) -> sp.Expr:
    """Parse `src` into a sympy expression in the given chart symbols."""
    return _Parser(src, symbols, field).parse()
