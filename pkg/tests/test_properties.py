"""Algebraic laws checked on random expressions, 1000 cases per law."""
from functools import reduce

from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ATOMS, P, U_ATOMS, exprs, terms
from jetreduce.cli import parse_expr
from jetreduce.expr import Expr, d_x, normalize
from jetreduce.reduce_h import EvolutionPDE, reduce_scalar, restrict_is_homomorphism
from jetreduce.variational import differs_by_function_of_t, euler, integrate_dx

N = 1000
FIELDS = ("u", "v")

T7 = reduce_scalar(P("7*u^5 + 35*u^2*u_x^2 + 7*u*u_xx^2 + (1/2)*u^(3)^2"),
                   EvolutionPDE.scalar("u", P("6*u*u_x - u_xxx")))


@settings(max_examples=N)
@given(exprs(max_terms=3), exprs(max_terms=3))
def test_d_x_is_a_derivation(a, b):
    assert d_x(a * b) == d_x(a) * b + a * d_x(b)
    assert d_x(a + b) == d_x(a) + d_x(b)


@settings(max_examples=N)
@given(exprs())
def test_integrate_dx_inverts_d_x(e):
    assert differs_by_function_of_t(integrate_dx(d_x(e)), e)


@settings(max_examples=N)
@given(exprs())
def test_euler_kills_total_derivatives(e):
    de = d_x(e)
    assert euler(de, "u").is_zero()
    assert euler(de, "v").is_zero()


@settings(max_examples=N)
@given(st.lists(terms(), max_size=5), st.randoms(use_true_random=False))
def test_normal_form_is_canonical(ts, rnd):
    e = reduce(lambda a, b: a + b, ts, Expr.const(0))
    assert normalize(normalize(e)) == normalize(e) == e
    shuffled = list(ts)
    rnd.shuffle(shuffled)
    f = reduce(lambda a, b: b + a, shuffled, Expr.const(0))
    assert f == e and hash(f) == hash(e) and str(f) == str(e)


@settings(max_examples=N)
@given(exprs())
def test_render_parse_round_trip(e):
    assert parse_expr(str(e), FIELDS) == e


@settings(max_examples=N)
@given(exprs(atoms=U_ATOMS, max_terms=3), exprs(atoms=U_ATOMS, max_terms=3))
def test_restriction_is_a_ring_map(a, b):
    assert restrict_is_homomorphism(T7, a, b)
