import pytest

from helpers import P, PV
from jetreduce.cli.problem import load_bundled
from jetreduce.expr import JetVar
from jetreduce.reduce_h import EvolutionPDE, reduce_scalar, verify_supplied
from jetreduce.reduce_l import (
    MixedRewrite,
    NonInvertibleTop,
    RegimeExceeded,
    build_hatL,
    mixed_rewrite,
    reduce_lagrange,
    check_mixed_identities,
)
from jetreduce.variational import differs_by_function_of_t

KDV = EvolutionPDE.scalar("u", P("6*u*u_x - u_xxx"))
L_T7 = P("7*u^5 + 35*u^2*u_x^2 + 7*u*u_xx^2 + (1/2)*u^(3)^2")


@pytest.fixture(scope="module")
def t7():
    red = reduce_scalar(L_T7, KDV)
    mr = MixedRewrite.from_pde(KDV, red.n)
    return red, mr, reduce_lagrange(red, mr)


@pytest.fixture(scope="module")
def t7_expect():
    return load_bundled("kdv-t7")


def test_mixed_rewrite_of_kdv():
    mr = MixedRewrite.from_pde(KDV, 2)
    assert mr.m == 3 and mr.alpha == 1
    assert mr.top == P("6*u*u_x - u_t")
    assert mixed_rewrite(P("u^(4)"), mr) == P("6*u_x^2 + 6*u*u_xx - u_xt")
    assert MixedRewrite.from_pde(KDV, 3).alpha == 2


def test_regime_limits():
    with pytest.raises(RegimeExceeded):
        MixedRewrite.from_pde(KDV, 6)
    with pytest.raises(NonInvertibleTop):
        MixedRewrite.from_pde(EvolutionPDE.scalar("u", P("u^2")), 1)
    with pytest.raises(NonInvertibleTop):
        MixedRewrite.from_pde(EvolutionPDE.scalar("u", P("u_xxx^2")), 1)


def test_t7_hat_densities(t7, t7_expect):
    red, mr, res = t7
    ex = t7_expect.expect
    assert differs_by_function_of_t(res.hatL, t7_expect.parse(ex["hatL"], "hatL"))
    assert differs_by_function_of_t(res.hatLambda, t7_expect.parse(ex["hatLambda"], "hatLambda"))
    assert differs_by_function_of_t(red.Lambda, t7_expect.parse(ex["Lambda"], "Lambda"))


def test_t7_t_euler_lagrange_rows(t7, t7_expect):
    _, _, res = t7
    want = [t7_expect.parse(s, "el_t") for s in t7_expect.expect["el_t"]]
    assert res.el == want


def test_t7_t_chart_momenta(t7, t7_expect):
    _, _, res = t7
    want = [t7_expect.parse(s, "tchart_p") for s in t7_expect.expect["tchart_p"]]
    assert res.tchart.p_defs == want
    assert res.tchart.q_defs == [P("u"), P("u_x"), P("u_xx")]


def test_t7_t_chart_agrees_with_hamiltonian_chart(t7):
    _, _, res = t7
    assert res.checks.ok, [c.as_dict() for c in res.checks.failed()]


def test_t7_mixed_identities(t7):
    red, mr, res = t7
    checks = check_mixed_identities(red.L, red, mr, res.hatL, res.hatLambda)
    assert checks.ok, [c.as_dict() for c in checks.failed()]
    assert mr.alpha == 2
    for name in ("hat_conservation", "euler_factorizes", "t_euler_recurrence",
                 "t_euler_recurrence_plus_sign_on_manifold", "t_momenta_identity", "prolongation_identities"):
        assert checks[name].ok


def test_one_t_derivative_regime_momenta():
    L = P("5/2*u^4 + 5*u*u_x^2 + 1/2*u_xx^2")
    red = reduce_scalar(L, KDV)
    mr = MixedRewrite.from_pde(KDV, red.n)
    assert mr.alpha == 1
    res = reduce_lagrange(red, mr)
    assert res.checks.ok
    checks = check_mixed_identities(L, red, mr, res.hatL, res.hatLambda)
    assert checks["momenta_match_t_momenta"].ok
    assert checks.ok, [c.as_dict() for c in checks.failed()]


def test_plus_sign_recurrence_is_not_an_identity(t7):
    # with +E_(m-1) the recurrence leaves 2 E_(m-1) df0/du^(i), zero only on the manifold
    _, mr, res = t7
    el = res.el
    gap = el[0] - (el[2] * mr.partial_top(JetVar("u", 1)) - mr.d_x(el[1]))
    assert not gap.is_zero()
    assert gap == -2 * el[2] * mr.partial_top(JetVar("u", 1))


def test_hatL_is_plain_rewrite(t7):
    red, mr, res = t7
    assert build_hatL(red.L, mr) == res.hatL


def test_sine_gordon_lagrangian_path():
    pb = load_bundled("sg")
    from jetreduce.reduce_h import ChartSpec

    ch = pb.chart
    red = verify_supplied(pb.L, EvolutionPDE(dict(pb.pde)), ChartSpec(ch["q"], ch["p"], ch["inverse"]), pb.Lambda)
    lg = pb.lagrange
    mr = MixedRewrite("u", int(lg["order"]), lg["top"], int(lg["alpha"]), lg["eliminate"])
    res = reduce_lagrange(red, mr)
    assert res.hatLambda == pb.parse(pb.expect["hatLambda"], "hatLambda")
    assert res.checks.ok, [c.as_dict() for c in res.checks.failed()]
    assert res.el == [PV("-u_t - x*u_xt - t*u_tt - t*sin(u)"), PV("t*u_x + x*u_t")]
    assert res.tchart.p_defs == [PV("x*u_x + t*u_t")]
    assert res.Q_hat == PV("t/(2*x^2 - 2*t^2)*ph1^2 + t*cos(qh1)")
