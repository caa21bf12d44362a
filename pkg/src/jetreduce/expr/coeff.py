"""Exact coefficients in Q(x, t).

Constants are kept as ``fractions.Fraction`` (fast path); anything that
depends on x or t is a sympy ``FracElement`` of Q(x, t), which is always
stored in lowest terms.  Every public helper returns the demoted form, so
equal values always have equal representations.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Union

from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement, field

FIELD, _X, _T = field("x,t", QQ)
_RING = FIELD.ring
_GEN_INDEX = {"x": 0, "t": 1}

Coeff = Union[Fraction, FracElement]

ZERO = Fraction(0)
ONE = Fraction(1)


class PoleAtPoint(ZeroDivisionError):
    """A denominator vanishes at the evaluation point."""


def _lift(a: Coeff) -> FracElement:
    if type(a) is Fraction:
        return FIELD.ground_new(QQ(a.numerator, a.denominator))
    return a


def _mpq_to_fraction(v) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


def demote(a: Coeff) -> Coeff:
    if type(a) is Fraction:
        return a
    num, den = a.numer, a.denom
    if num.is_ground and den.is_ground:
        if not num:
            return ZERO
        return _mpq_to_fraction(num.LC) / _mpq_to_fraction(den.LC)
    return a


def coeff(v) -> Coeff:
    """Coerce int, Fraction, str 'x'/'t' or a FracElement to a Coeff."""
    if type(v) is Fraction:
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return Fraction(v)
    if isinstance(v, str):
        return {"x": _X, "t": _T}[v]
    if isinstance(v, FracElement):
        return demote(v)
    raise TypeError(f"cannot make a coefficient from {v!r}")


def gen(name: str) -> FracElement:
    return {"x": _X, "t": _T}[name]


def add(a: Coeff, b: Coeff) -> Coeff:
    if type(a) is Fraction and type(b) is Fraction:
        return a + b
    return demote(_lift(a) + _lift(b))


def sub(a: Coeff, b: Coeff) -> Coeff:
    if type(a) is Fraction and type(b) is Fraction:
        return a - b
    return demote(_lift(a) - _lift(b))


def mul(a: Coeff, b: Coeff) -> Coeff:
    if type(a) is Fraction and type(b) is Fraction:
        return a * b
    if type(a) is Fraction:
        if a == 1:
            return b
        if not a:
            return ZERO
    if type(b) is Fraction:
        if b == 1:
            return a
        if not b:
            return ZERO
    return demote(_lift(a) * _lift(b))


def neg(a: Coeff) -> Coeff:
    return -a


def div(a: Coeff, b: Coeff) -> Coeff:
    if is_zero(b):
        raise ZeroDivisionError("division by the zero coefficient")
    if type(a) is Fraction and type(b) is Fraction:
        return a / b
    return demote(_lift(a) / _lift(b))


def power(a: Coeff, k: int) -> Coeff:
    if k < 0:
        return div(ONE, power(a, -k))
    if type(a) is Fraction:
        return a**k
    return demote(a**k)


def is_zero(a: Coeff) -> bool:
    return not a


def is_const(a: Coeff) -> bool:
    return type(a) is Fraction


def depends_on(a: Coeff, name: str) -> bool:
    if type(a) is Fraction:
        return False
    i = _GEN_INDEX[name]
    return a.numer.degree(i) > 0 or a.denom.degree(i) > 0


def diff(a: Coeff, name: str) -> Coeff:
    if type(a) is Fraction:
        return ZERO
    return demote(a.diff(gen(name)))


def numer_denom(a: Coeff):
    """Return (numerator, denominator) as term lists [((i, j), Fraction)]."""
    a = _lift(a)
    num = [(m, _mpq_to_fraction(c)) for m, c in a.numer.terms()]
    den = [(m, _mpq_to_fraction(c)) for m, c in a.denom.terms()]
    return num, den


def from_terms(terms) -> Coeff:
    """Build a polynomial coefficient from [((i, j), Fraction)]."""
    out = ZERO
    for (i, j), c in terms:
        out = add(out, mul(coeff(c), demote(_X**i * _T**j)))
    return out


def _eval_terms(terms, x, t):
    total = 0
    for (i, j), c in terms:
        if type(x) is Fraction and type(t) is Fraction:
            total += c * x**i * t**j
        else:
            total += float(c) * float(x) ** i * float(t) ** j
    return total


def evaluate(a: Coeff, x=None, t=None):
    """Evaluate at (x, t).  Exact when x and t are Fractions."""
    if type(a) is Fraction:
        return a
    num, den = numer_denom(a)
    needs = [n for n in ("x", "t") if depends_on(a, n)]
    vals = {"x": x, "t": t}
    for n in needs:
        if vals[n] is None:
            raise KeyError(n)
    xv = x if x is not None else Fraction(0)
    tv = t if t is not None else Fraction(0)
    exact = type(xv) is Fraction and type(tv) is Fraction
    if not exact:
        xv, tv = float(xv), float(tv)
    d = _eval_terms(den, xv, tv)
    if d == 0:
        raise PoleAtPoint(f"denominator of {render(a)} vanishes at x={x}, t={t}")
    return _eval_terms(num, xv, tv) / d


def _render_poly(terms) -> str:
    parts = []
    for (i, j), c in sorted(terms, key=lambda mc: (-(mc[0][0] + mc[0][1]), -mc[0][0])):
        factors = []
        mag = abs(c)
        if mag != 1 or (i == 0 and j == 0):
            factors.append(str(mag))
        for name, e in (("x", i), ("t", j)):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        body = "*".join(factors)
        sign = "-" if c < 0 else "+"
        parts.append((sign, body))
    out = ""
    for k, (sign, body) in enumerate(parts):
        if k == 0:
            out = ("-" if sign == "-" else "") + body
        else:
            out += f" {sign} {body}"
    return out


def render(a: Coeff) -> str:
    """Render so that the expression parser reads it back unchanged."""
    if type(a) is Fraction:
        return str(a)
    num, den = numer_denom(a)
    n = _render_poly(num)
    if len(den) == 1 and den[0] == ((0, 0), ONE):
        return n if len(num) == 1 else f"({n})"
    return f"({n})/({_render_poly(den)})"


def render_signed(a: Coeff):
    """Split off a leading sign: returns ('-' or '', body) for use in sums."""
    if type(a) is Fraction:
        return ("-" if a < 0 else ""), str(abs(a))
    num, den = numer_denom(a)
    if len(den) == 1 and den[0][0] == (0, 0):
        d = den[0][1]
        num = [(m, c / d) for m, c in num]
        den = [((0, 0), ONE)]
    sign = ""
    if len(num) == 1 and num[0][1] < 0:
        sign = "-"
        num = [(num[0][0], -num[0][1])]
    n = _render_poly(num)
    if len(num) > 1:
        n = f"({n})"
    if len(den) == 1 and den[0] == ((0, 0), ONE):
        return sign, n
    return sign, f"{n}/({_render_poly(den)})"
