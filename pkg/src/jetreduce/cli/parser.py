"""Recursive-descent parser for the textual expression language.

Grammar (``^`` binds tightest and associates to the right)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' exponent)?
    exponent:= '-'? power
    primary := INT | NAME | FIELD '^(' INT [',' INT] ')'
             | ('sin' | 'cos') '(' sum ')' | '(' sum ')'

Names: ``x`` and ``t``; declared field names with optional ``_xxt``-style
suffixes; chart symbols ``q1``, ``p1``, ``qh1``, ``ph1``, ``aux1``.
Implicit multiplication is rejected.
"""
from __future__ import annotations

import re
from typing import Iterable, List, Optional

from ..expr import ChartSym, Expr, JetVar, TrigSym
from ..expr.atoms import NonAtomicTrigArgument

_CHART_RE = re.compile(r"^(q|p|qh|ph|aux)(\d+)$")
_CHART_KIND = {"q": "q", "p": "p", "qh": "q_hat", "ph": "p_hat", "aux": "aux"}
RESERVED = {"x", "t", "sin", "cos"}


class ExprSyntaxError(SyntaxError):
    """Malformed expression text; carries 1-based line and column."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col
        self.reason = msg


class UnknownField(NameError):
    """An identifier is neither a declared field nor a reserved name."""


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(text: str) -> List[_Tok]:
    toks = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], i))
            i = j
        elif ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("name", text[i:j], i))
            i = j
        elif ch in "+-*/^(),":
            toks.append(_Tok(ch, ch, i))
            i += 1
        else:
            raise _error(text, i, f"unexpected character {ch!r}")
    toks.append(_Tok("end", "", n))
    return toks


def _error(text: str, pos: int, msg: str) -> ExprSyntaxError:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return ExprSyntaxError(msg, line, col)


class _Parser:
    def __init__(self, text: str, fields: Iterable[str]):
        self.text = text
        self.fields = set(fields)
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: Optional[str] = None) -> _Tok:
        tok = self.toks[self.i]
        if kind is not None and tok.kind != kind:
            want = "end of input" if kind == "end" else repr(kind)
            got = "end of input" if tok.kind == "end" else repr(tok.text)
            raise _error(self.text, tok.pos, f"expected {want}, got {got}")
        self.i += 1
        return tok

    def parse(self) -> Expr:
        e = self.sum()
        tok = self.peek()
        if tok.kind != "end":
            if tok.kind in ("name", "int", "("):
                raise _error(self.text, tok.pos, "implicit multiplication is not allowed")
            raise _error(self.text, tok.pos, f"unexpected {tok.text!r}")
        return e

    def sum(self) -> Expr:
        e = self.product()
        while self.peek().kind in "+-" and self.peek().kind != "end":
            op = self.take().kind
            rhs = self.product()
            e = e + rhs if op == "+" else e - rhs
        return e

    def product(self) -> Expr:
        e = self.unary()
        while self.peek().kind in ("*", "/"):
            tok = self.take()
            rhs = self.unary()
            if tok.kind == "*":
                e = e * rhs
            else:
                if not rhs.is_coeff():
                    raise _division_error(self.text, tok.pos, rhs)
                if rhs.is_zero():
                    raise _error(self.text, tok.pos, "division by zero")
                e = e / rhs
        return e

    def unary(self) -> Expr:
        if self.peek().kind == "-":
            self.take()
            return -self.unary()
        if self.peek().kind == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().kind == "^":
            tok = self.take()
            k = self.exponent()
            if k < 0 and not base.is_coeff():
                raise _division_error(self.text, tok.pos, base)
            if k < 0 and base.is_zero():
                raise _error(self.text, tok.pos, "division by zero")
            return base**k
        return base

    def exponent(self) -> int:
        tok = self.peek()
        sign = 1
        if tok.kind == "-":
            self.take()
            sign = -1
        start = self.peek().pos
        e = self.power()
        if not e.is_coeff():
            raise _error(self.text, start, "exponent must be an integer constant")
        c = e.as_coeff()
        from fractions import Fraction

        if type(c) is not Fraction or c.denominator != 1:
            raise _error(self.text, start, "exponent must be an integer constant")
        return sign * int(c)

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.take()
            return Expr.const(int(tok.text))
        if tok.kind == "(":
            self.take()
            e = self.sum()
            self.take(")")
            return e
        if tok.kind == "name":
            return self.name()
        if tok.kind == "end":
            raise _error(self.text, tok.pos, "unexpected end of input")
        raise _error(self.text, tok.pos, f"unexpected {tok.text!r}")

    def name(self) -> Expr:
        tok = self.take("name")
        word = tok.text
        if word in ("sin", "cos"):
            self.take("(")
            inner = self.sum()
            self.take(")")
            return _trig(word, inner, self.text, tok.pos)
        if word in ("x", "t"):
            return Expr.const(word)
        m = _CHART_RE.match(word)
        if m and word not in self.fields:
            return Expr.atom(ChartSym(_CHART_KIND[m.group(1)], int(m.group(2))))
        base, _, suffix = word.partition("_")
        if base not in self.fields:
            raise UnknownField(f"unknown name {word!r} at column {tok.pos + 1}")
        if suffix:
            if set(suffix) - {"x", "t"}:
                raise _error(self.text, tok.pos, f"bad jet suffix in {word!r}")
            return Expr.atom(JetVar(base, suffix.count("x"), suffix.count("t")))
        # u^(k) and u^(i,k) are jet coordinates, not powers
        if self.peek().kind == "^" and self.toks[self.i + 1].kind == "(":
            save = self.i
            self.take("^")
            self.take("(")
            if self.peek().kind == "int":
                i_ord = int(self.take().text)
                t_ord = 0
                if self.peek().kind == ",":
                    self.take()
                    t_ord = int(self.take("int").text)
                if self.peek().kind == ")":
                    self.take()
                    return Expr.atom(JetVar(base, i_ord, t_ord))
            self.i = save
        return Expr.atom(JetVar(base))


def _division_error(text, pos, rhs):
    from ..expr import DivisionByJet

    return DivisionByJet(f"division by non-coefficient {rhs} at column {pos + 1}")


def _trig(func: str, inner: Expr, text: str, pos: int) -> Expr:
    if len(inner.terms) == 1:
        (m, c), = inner.terms.items()
        if len(m) == 1 and m[0][1] == 1 and c in (1, -1):
            a = m[0][0]
            if not isinstance(a, TrigSym) and a.order == 0:
                e = Expr.atom(TrigSym(func, a))
                return -e if (c == -1 and func == "sin") else e
    raise NonAtomicTrigArgument(f"{func} argument {inner} at column {pos + 1} is not a zeroth-order atom")


def parse_expr(text: str, fields: Iterable[str] = ("u",)) -> Expr:
    """Parse ``text`` into a normalized Expr over the given field names."""
    for f in fields:
        if f in RESERVED or _CHART_RE.match(f) or not re.match(r"^[A-Za-z][A-Za-z0-9]*$", f):
            raise ValueError(f"invalid field name {f!r}")
    return _Parser(text, fields).parse()
