"""Acceptance criteria 1-11, one pass/fail line each.

Each test gathers named sub-checks, records a verdict line in RESULTS and
fails if any sub-check fails.  The lines are printed at the end of the run
by the terminal-summary hook in conftest.py.
"""
import time

import numpy as np
from hypothesis import given, settings

from helpers import P, PV, exprs, terms
from jetreduce import nwaves as nw
from jetreduce.expr import JetVar, d_x, normalize, partial
from jetreduce.painleve_numeric import flow_commutation, scaling_consistency
from jetreduce.reduce_h import (
    ChartSpec,
    EvolutionPDE,
    LambdaMismatch,
    certify_first_integral,
    d_t,
    psym,
    qsym,
    reduce_scalar,
    verify_supplied,
    zero_curvature,
)
from jetreduce.reduce_l import MixedRewrite, reduce_lagrange, check_mixed_identities
from jetreduce.variational import differs_by_function_of_t, euler, integrate_dx

RESULTS = {}

KDV = EvolutionPDE.scalar("u", P("6*u*u_x - u_xxx"))
MKDV = EvolutionPDE.scalar("u", P("6*u^2*u_x - u_xxx"))
SG = EvolutionPDE({"u": PV("v"), "v": PV("u_xx - sin(u)")})

L_PI = P("u^3 + (1/2)*u_x^2 + 2*x*u + 6*t*u^2")
L_PII = P("(3/2)*t*(u^4 + u_x^2) + u^2*x/2")
L_T7 = P("7*u^5 + 35*u^2*u_x^2 + 7*u*u_xx^2 + (1/2)*u^(3)^2")
L_SG = PV("x/2*(v^2 + u_x^2) - x*cos(u) + t*v*u_x")
SG_CHART = ChartSpec([PV("u")], [PV("x*u_x + t*v")],
                     {JetVar("u", 1): PV("x*p1/(x^2 - t^2)"), JetVar("v"): PV("t*p1/(t^2 - x^2)")})
# target Lambda with -cos(u), and with the sign that makes D_x Lambda = D_t L hold
SG_LAMBDA_MINUS_COS = PV("x*u_x*v + t*((1/2)*(v^2 + u_x^2) - cos(u))")
SG_LAMBDA = PV("x*u_x*v + t*((1/2)*(v^2 + u_x^2) + cos(u))")


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.subs = []
        self.t0 = time.perf_counter()

    def check(self, name, ok, detail=""):
        self.subs.append((name, bool(ok), detail))
        return ok

    def runtime(self, limit):
        dt = time.perf_counter() - self.t0
        self.check(f"runtime {dt:.2f}s < {limit}s", dt < limit)

    def finish(self):
        bad = [s for s in self.subs if not s[1]]
        verdict = "PASS" if not bad else "FAIL"
        line = f"[{verdict}] criterion {self.number:2d}: {self.title} ({len(self.subs) - len(bad)}/{len(self.subs)} sub-checks)"
        if bad:
            line += "; failing: " + "; ".join(f"{n}{(' [' + d + ']') if d else ''}" for n, _, d in bad)
        RESULTS[self.number] = line
        print(line)
        assert not bad, line


def _ht(red):
    return {k.name(): v for k, v in red.hamilton_t.items()}


def test_criterion_01_pi_pipeline():
    c = Criterion(1, "PI pipeline from the PDE and symmetry density")
    red = reduce_scalar(L_PI, KDV)
    c.check("euler", euler(L_PI, "u") == -P("u_xx - 3*u^2 - 2*x - 12*t*u"))
    c.check("H exact", red.H == P("p1^2/2 - q1^3 - 2*q1*x - 6*t*q1^2"))
    c.check("Lambda mod f(t)", differs_by_function_of_t(red.Lambda, P(
        "6*t*(4*u^3 - 2*u*u_xx + u_x^2) + 2*x*(3*u^2 - u_xx) + 9/2*u^4 + 1/2*u_xx^2"
        " + 2*u_x - 3*u^2*u_xx + 6*u*u_x^2 - u_x*u_xxx")))
    c.check("Q_tilde mod f(t)", differs_by_function_of_t(
        red.Q_tilde, P("12*t*(p1^2/2 - q1^3 - 6*t*q1^2 - 2*x*q1) + 2*p1 - 2*x^2")))
    ht = _ht(red)
    c.check("hamilton_t q1", ht["q1"] == P("-2*(6*t*p1 + 1)"))
    c.check("hamilton_t p1", ht["p1"] == P("-12*t*(3*q1^2 + 2*x + 12*t*q1)"))
    c.runtime(5)
    c.finish()


def test_criterion_02_pii_pipeline():
    c = Criterion(2, "PII pipeline")
    red = reduce_scalar(L_PII, MKDV)
    c.check("euler up to the -3t factor", euler(L_PII, "u") == P("-3*t") * P("u_xx - (6*t*u^3 + u*x)/(3*t)"))
    c.check("H exact", red.H == P("p1^2/(6*t) - 3/2*t*q1^4 - 1/2*q1^2*x"))
    c.check("Q_tilde mod f(t)", differs_by_function_of_t(
        red.Q_tilde, P("x/2*(p1^2/(9*t^2) - q1^4) + 1/(3*t)*p1*q1 - 1/(6*t)*q1^2*x^2")))
    ht = _ht(red)
    c.check("hamilton_t q1", ht["q1"] == P("-q1/(3*t) - x*p1/(9*t^2)"))
    c.check("hamilton_t p1", ht["p1"] == P("p1/(3*t) - q1*x^2/(3*t) - 2*q1^3*x"))
    c.finish()


def test_criterion_03_piii_verify_mode():
    c = Criterion(3, "PIII from a supplied chart and Lambda")
    try:
        verify_supplied(L_SG, SG, SG_CHART, SG_LAMBDA_MINUS_COS)
        c.check("D_x Lambda = D_t L with -cos(u)", True)
    except LambdaMismatch as err:
        c.check("D_x Lambda = D_t L with -cos(u)", False, f"gap {err.witness}")
    c.check("D_x Lambda = D_t L with +cos(u)", (d_t(L_SG, SG) - d_x(SG_LAMBDA)).is_zero())
    red = verify_supplied(L_SG, SG, SG_CHART, SG_LAMBDA)
    c.check("H exact", red.H == PV("x/2*p1^2/(x^2 - t^2) + x*cos(q1)"))
    ht = _ht(red)
    want_q, want_p = PV("-t*p1/(t^2 - x^2)"), PV("t*sin(q1)")
    c.check("hamilton_t q1 = -t p1/(t^2 - x^2)", ht["q1"] == want_q, f"engine gives {ht['q1']}")
    c.check("hamilton_t p1 = t sin(q1)", ht["p1"] == want_p, f"engine gives {ht['p1']}")
    c.check("hamilton_t equals the target up to overall sign", ht["q1"] == -want_q and ht["p1"] == -want_p)
    c.finish()


def test_criterion_04_kdv_t7():
    from jetreduce.cli.problem import load_bundled

    c = Criterion(4, "KdV t7 reduction, Hamiltonian and Lagrangian paths")
    pb = load_bundled("kdv-t7")
    ex = pb.expect
    red = reduce_scalar(L_T7, KDV)
    for i, text in enumerate(ex["chart_p"]):
        c.check(f"p{i + 1}", red.chart.p_defs[i] == P(text))
    c.check("Lambda mod f(t)", differs_by_function_of_t(red.Lambda, pb.parse(ex["Lambda"], "Lambda")))
    mr = MixedRewrite.from_pde(KDV, red.n)
    res = reduce_lagrange(red, mr)
    c.check("hatLambda mod f(t)", differs_by_function_of_t(res.hatLambda, pb.parse(ex["hatLambda"], "hatLambda")))
    c.check("hatL mod f(t)", differs_by_function_of_t(res.hatL, pb.parse(ex["hatL"], "hatL")))
    want = [pb.parse(s, "el_t") for s in ex["el_t"]]
    c.check("el_t rows exact", res.el == want)
    for chk in res.checks:
        c.check(f"legendre_t: {chk.name}", chk.ok, chk.witness or "")
    c.runtime(30)
    c.finish()


def _four():
    return {
        "PI": reduce_scalar(L_PI, KDV),
        "PII": reduce_scalar(L_PII, MKDV),
        "PIII": verify_supplied(L_SG, SG, SG_CHART, SG_LAMBDA),
        "t7": reduce_scalar(L_T7, KDV),
    }


def test_criterion_05_zero_curvature():
    c = Criterion(5, "zero curvature of the reduced pair")
    for name, red in _four().items():
        zc = zero_curvature(red.H, red.Q_tilde, red.n)
        c.check(name, zc.is_zero(), str(zc))
    c.finish()


def test_criterion_06_chart_and_recurrence_identities():
    c = Criterion(6, "chart and recurrence identities")
    for name, red in _four().items():
        c.check(f"q1 rate = -dQ/dp1 ({name})",
                red.hamilton_t[qsym(1)] == -partial(red.Q_tilde, psym(1)))
    # one t-derivative regime: an order-2 conserved density of KdV
    L2 = P("5/2*u^4 + 5*u*u_x^2 + 1/2*u_xx^2")
    red2 = reduce_scalar(L2, KDV)
    mr2 = MixedRewrite.from_pde(KDV, red2.n)
    res2 = reduce_lagrange(red2, mr2)
    chk2 = check_mixed_identities(L2, red2, mr2, res2.hatL, res2.hatLambda)
    c.check("momenta equal t-momenta (one t-derivative)", mr2.alpha == 1 and chk2["momenta_match_t_momenta"].ok)
    red7 = reduce_scalar(L_T7, KDV)
    mr7 = MixedRewrite.from_pde(KDV, red7.n)
    res7 = reduce_lagrange(red7, mr7)
    chk7 = check_mixed_identities(L_T7, red7, mr7, res7.hatL, res7.hatLambda)
    c.check("t-Euler recurrence (t7)", chk7["t_euler_recurrence"].ok, chk7["t_euler_recurrence"].witness or "")
    c.check("plus-sign recurrence holds on the manifold (t7)", chk7["t_euler_recurrence_plus_sign_on_manifold"].ok)
    c.finish()


MUTATIONS = {
    "PI without 2xu": (P("u^3 + (1/2)*u_x^2 + 6*t*u^2"), KDV),
    "PI with 3tu^2": (P("u^3 + (1/2)*u_x^2 + 2*x*u + 3*t*u^2"), KDV),
    "PII with u^2 x": (P("(3/2)*t*(u^4 + u_x^2) + u^2*x"), MKDV),
    "t7 with 8u^5": (P("8*u^5 + 35*u^2*u_x^2 + 7*u*u_xx^2 + (1/2)*u^(3)^2"), KDV),
    "SG with +x cos u": (PV("x/2*(v^2 + u_x^2) + x*cos(u) + t*v*u_x"), SG),
}


def test_criterion_07_first_integrals():
    c = Criterion(7, "first-integral certification with mutation controls")
    for name, (L, pde) in {"PI": (L_PI, KDV), "PII": (L_PII, MKDV), "t7": (L_T7, KDV), "SG": (L_SG, SG)}.items():
        c.check(f"{name} exact", certify_first_integral(L, pde).ok)
    for name, (L, pde) in MUTATIONS.items():
        c.check(f"{name} rejected", not certify_first_integral(L, pde).ok)
    c.finish()


def test_criterion_08_painleve_consistency():
    c = Criterion(8, "scaling consistency for PI and PII")
    t0 = time.perf_counter()
    r = scaling_consistency(reduce_scalar(L_PI, KDV), "I", 0.0, 1.0, 1.2, 1e-4, -1.0, 1 / 12)
    dt = time.perf_counter() - t0
    c.check(f"PI deviation {r.deviation:.1e} <= 1e-6", r.deviation <= 1e-6)
    c.check(f"PI residual {r.max_residual:.1e} <= 1e-5", r.max_residual <= 1e-5)
    c.check(f"PI runtime {dt:.2f}s < 2s", dt < 2)
    t0 = time.perf_counter()
    r = scaling_consistency(reduce_scalar(L_PII, MKDV), "II", 1.0, 1.0, 1.1, 1e-4, 0.5, 0.0)
    dt = time.perf_counter() - t0
    c.check(f"PII deviation {r.deviation:.1e} <= 1e-6", r.deviation <= 1e-6)
    c.check(f"PII residual {r.max_residual:.1e} <= 1e-5", r.max_residual <= 1e-5)
    c.check(f"PII runtime {dt:.2f}s < 2s", dt < 2)
    c.finish()


def test_criterion_09_flow_commutation():
    c = Criterion(9, "numeric commutation of the reduced flows")
    deltas = [1e-2, 5e-3, 2.5e-3]
    _, o1 = flow_commutation(reduce_scalar(L_PI, KDV), 0.3, 1.0, [0.1, 0.2], deltas)
    c.check(f"PI order {o1:.2f} >= 2.9", o1 >= 2.9)
    _, o7 = flow_commutation(reduce_scalar(L_T7, KDV), 0.1, 0.2, [0.2, -0.1, 0.3, 0.1, 0.2, -0.3], deltas)
    c.check(f"t7 order {o7:.2f} >= 2.9", o7 >= 2.9)
    c.finish()


def test_criterion_10_nwaves():
    c = Criterion(10, "n-waves Lax flows")
    deltas = [1e-2, 5e-3, 2.5e-3]
    rng = np.random.default_rng(0)
    for n in (3, 4):
        s = nw.LaxState.random(n, rng)
        skew_ok, drift = True, 0.0
        for k in range(n):
            end = nw.flow_for(s, k, 1.0, 1e-3)
            skew_ok &= bool(np.array_equal(end.q, -end.q.T))
            drift = max(drift, abs(nw.trace_power(end.q, 2) - nw.trace_power(s.q, 2)))
        c.check(f"n={n} skew exact", skew_ok)
        c.check(f"n={n} Tr(q^2) drift {drift:.1e} <= 1e-10", drift <= 1e-10)
        lit = max(abs(nw.half_trace_q_uk(s, k) - nw.hamiltonian_k(s, k)) for k in range(n))
        c.check(f"n={n} H_k = 1/2 Tr(q u_k)", lit <= 1e-12, f"gap {lit:.2e}; 1/2 Tr(q u_k) = -2 H_k")
        cor = max(abs(nw.hamiltonian_from_trace(s, k) - nw.hamiltonian_k(s, k)) for k in range(n))
        c.check(f"n={n} H_k = -1/4 Tr(q u_k) gap {cor:.1e}", cor <= 1e-12)
        worst, mut = np.inf, -np.inf
        for i in range(n):
            for j in range(i + 1, n):
                worst = min(worst, nw.commutation_test(s, i, j, deltas).order)
                mut = max(mut, nw.commutation_test(s, i, j, deltas, mutate=True).order)
        c.check(f"n={n} commutation order {worst:.2f} >= 2.9", worst >= 2.9)
        c.check(f"n={n} mutation order {mut:.2f} <= 2.3", mut <= 2.3)
    c.runtime(5)
    c.finish()


def test_criterion_11_property_suites():
    c = Criterion(11, "property suites, 1000 cases each")
    counts = {}

    def law(name, strategy, body):
        counts[name] = 0

        @settings(max_examples=1000, database=None)
        @given(strategy)
        def run(args):
            counts[name] += 1
            body(*args)

        try:
            run()
            c.check(f"{name} ({counts[name]} cases)", counts[name] >= 1000)
        except Exception as err:  # noqa: BLE001
            c.check(name, False, f"{type(err).__name__}: {err}")

    from hypothesis import strategies as st

    def derivation(a, b):
        assert d_x(a * b) == d_x(a) * b + a * d_x(b)

    def round_trip(e):
        assert differs_by_function_of_t(integrate_dx(d_x(e)), e)

    def euler_dx(e):
        assert euler(d_x(e), "u").is_zero() and euler(d_x(e), "v").is_zero()

    def idempotent(ts):
        e = sum(ts, P("0"))
        assert normalize(normalize(e)) == normalize(e) == sum(reversed(ts), P("0"))

    law("d_x derivation law", st.tuples(exprs(max_terms=3), exprs(max_terms=3)), derivation)
    law("integrate_dx round trip", st.tuples(exprs()), round_trip)
    law("euler of d_x vanishes", st.tuples(exprs()), euler_dx)
    law("normalize idempotent", st.tuples(st.lists(terms(), max_size=5)), idempotent)
    c.finish()

