"""Shared strategies and the sympy oracle used across the test modules."""
from fractions import Fraction
from functools import reduce

import sympy as sp
from hypothesis import strategies as st

from jetreduce.cli import parse_expr
from jetreduce.expr import ChartSym, Expr, JetVar, T, TrigSym, X, jet
from jetreduce.expr import coeff as C


def P(text, fields=("u",)):
    return parse_expr(text, fields)


def PV(text):
    return parse_expr(text, ("u", "v"))


# strategies ----------------------------------------------------------------------

ATOMS = [jet("u", k) for k in range(4)] + [jet("v", k) for k in range(3)]
ATOMS += [Expr.atom(TrigSym("sin", JetVar("u"))), Expr.atom(TrigSym("cos", JetVar("u")))]

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def coefficients(draw, over_t=True):
    c = Expr.const(draw(fractions)) * X ** draw(st.integers(0, 2)) * T ** draw(st.integers(0, 2))
    if over_t and draw(st.booleans()):
        c = c / (T + Expr.const(draw(st.integers(1, 3))))
    return c


@st.composite
def terms(draw, atoms=ATOMS, over_t=True):
    c = draw(coefficients(over_t))
    picks = draw(st.lists(st.tuples(st.sampled_from(range(len(atoms))), st.integers(1, 3)), max_size=3))
    return reduce(lambda a, b: a * b, [atoms[i] ** e for i, e in picks], c)


def exprs(atoms=ATOMS, max_terms=4, over_t=True):
    return st.lists(terms(atoms, over_t), max_size=max_terms).map(
        lambda ts: reduce(lambda a, b: a + b, ts, Expr.const(0)))


U_ATOMS = [jet("u", k) for k in range(4)]


# sympy oracle ------------------------------------------------------------------------

sx, st_ = sp.symbols("x t")
FUNCS = {"u": sp.Function("u")(sx, st_), "v": sp.Function("v")(sx, st_)}


def coeff_to_sympy(c):
    if isinstance(c, Fraction):
        return sp.Rational(c.numerator, c.denominator)
    return c.as_expr()


def atom_to_sympy(a, chart_syms=None):
    if isinstance(a, JetVar):
        f = FUNCS[a.field]
        d = [(sx, a.x_order)] if a.x_order else []
        d += [(st_, a.t_order)] if a.t_order else []
        return sp.Derivative(f, *d) if d else f
    if isinstance(a, TrigSym):
        fn = sp.sin if a.func == "sin" else sp.cos
        return fn(atom_to_sympy(a.arg, chart_syms))
    if isinstance(a, ChartSym):
        return sp.Symbol(a.name())
    raise TypeError(a)


def to_sympy(e: Expr):
    out = sp.Integer(0)
    for m, c in e.terms.items():
        term = coeff_to_sympy(c)
        for a, k in m:
            term = term * atom_to_sympy(a) ** k
        out += term
    return out


def sympy_equal(a, b) -> bool:
    return sp.simplify(sp.expand(a - b)) == 0
