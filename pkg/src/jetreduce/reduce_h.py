"""Hamiltonian reduction of an evolution equation to a stationary manifold.

Given an evolution equation u_t = F and a density L whose t-derivative is a
total x-derivative (D_t L = D_x Lambda), the stationary manifold of L carries
two commuting Hamiltonian flows in a canonical chart (q, p):

* the x-flow with Hamiltonian H, the Legendre transform of L, and
* the t-flow with Hamiltonian -Q, where Q = Lambda - sum p_i dq_i/dt
  restricted to the manifold.

The module derives the chart from L (``build_chart``), or accepts a chart
supplied by hand (``ChartSpec`` plus ``verify_supplied``), and certifies the
resulting pair of flows with exact checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .checks import Check, CheckList, zero_check
from .expr import ChartSym, Expr, JetVar, derivation, partial, substitute
from .expr import coeff as C
from .variational import (
    NotExact,
    differs_by_function_of_t,
    euler,
    fields_of,
    higher_euler,
    integrate_dx,
    is_exact,
    order_in,
)


class DegenerateLagrangian(ValueError):
    """The top-jet Hessian of L vanishes."""


class NonQuadraticTop(ValueError):
    """Inverting the momenta would need a nonlinear solve."""


class LambdaMismatch(ValueError):
    """A supplied Lambda does not satisfy D_x Lambda = D_t L."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class ChartInconsistent(ValueError):
    """A supplied chart does not restrict consistently."""


@dataclass
class EvolutionPDE:
    """u_t = F(x, t, u, u_x, ...) for one or more fields."""

    rhs: Dict[str, Expr]

    @classmethod
    def scalar(cls, field_name: str, rhs: Expr) -> "EvolutionPDE":
        return cls({field_name: Expr.lift(rhs)})

    @property
    def fields(self) -> List[str]:
        return list(self.rhs)

    def prolonged(self, atom: JetVar) -> Expr:
        """D_t of a pure x-jet: D_x^k F."""
        if atom.t_order:
            raise ValueError(f"{atom.name()} is not a pure x-jet")
        cache = self.__dict__.setdefault("_cache", {})
        key = atom
        if key not in cache:
            if atom.x_order == 0:
                cache[key] = self.rhs[atom.field]
            else:
                from .expr import d_x

                cache[key] = d_x(self.prolonged(JetVar(atom.field, atom.x_order - 1)))
        return cache[key]


def d_t(e: Expr, pde: EvolutionPDE) -> Expr:
    """Total t-derivative along the flow, acting on x-jets."""

    def image(a):
        if isinstance(a, JetVar):
            if a.field not in pde.rhs:
                return None
            return pde.prolonged(a)
        return None

    return derivation(e, "t", image)


@dataclass
class Certificate:
    ok: bool
    witness: Dict[str, Expr] = field(default_factory=dict)


def certify_first_integral(L: Expr, pde: EvolutionPDE) -> Certificate:
    """Exact test that D_t L is a total x-derivative.

    On failure ``witness`` maps each field to the nonzero Euler derivative
    of D_t L.
    """
    dtL = d_t(L, pde)
    wit = {}
    for f in sorted(set(fields_of(dtL)) | set(pde.fields)):
        w = euler(dtL, f)
        if not w.is_zero():
            wit[f] = w
    return Certificate(not wit, wit)


# charts ----------------------------------------------------------------------

def qsym(i: int) -> ChartSym:
    return ChartSym("q", i)


def psym(i: int) -> ChartSym:
    return ChartSym("p", i)


@dataclass
class ChartSpec:
    """A canonical chart on the stationary manifold.

    ``q_defs``/``p_defs`` are the jet expressions of q_i and p_i; each q_i
    must be a single jet.  ``inverse`` expresses the remaining low jets in
    chart symbols.  ``el_top`` (derived charts only) gives u^(2n).
    """

    q_defs: List[Expr]
    p_defs: List[Expr]
    inverse: Dict[JetVar, Expr]
    el_top: Optional[Expr] = None
    field: Optional[str] = None

    @property
    def n(self) -> int:
        return len(self.q_defs)

    @property
    def q(self) -> List[ChartSym]:
        return [qsym(i + 1) for i in range(self.n)]

    @property
    def p(self) -> List[ChartSym]:
        return [psym(i + 1) for i in range(self.n)]

    def base_map(self) -> Dict[JetVar, Expr]:
        out: Dict[JetVar, Expr] = {}
        for i, qd in enumerate(self.q_defs):
            atoms = qd.atoms()
            if len(qd.terms) != 1 or len(atoms) != 1 or qd != Expr.atom(next(iter(atoms))):
                raise ChartInconsistent(f"q{i + 1} = {qd} is not a single jet")
            out[next(iter(atoms))] = Expr.atom(qsym(i + 1))
        out.update(self.inverse)
        if self.el_top is not None and self.field is not None:
            out[JetVar(self.field, 2 * self.n)] = self.el_top
        return out


def build_chart(L: Expr, field_name: str = "u") -> ChartSpec:
    """Canonical chart q_i = u^(i-1), p_i = E_i(L) with its inverse map."""
    L = Expr.lift(L)
    n = order_in(L, field_name)
    if n < 1:
        raise DegenerateLagrangian(f"L has no derivatives of {field_name}")
    top = JetVar(field_name, n)
    hess = partial(partial(L, top), top)
    if hess.is_zero():
        raise DegenerateLagrangian(f"d^2L/d{top.name()}^2 vanishes")
    if not hess.is_coeff():
        raise NonQuadraticTop(f"d^2L/d{top.name()}^2 = {hess} is not a coefficient")
    p_defs = [higher_euler(L, field_name, i) for i in range(1, n + 1)]
    known: Dict[JetVar, Expr] = {JetVar(field_name, j): Expr.atom(qsym(j + 1)) for j in range(n)}
    inverse: Dict[JetVar, Expr] = {}
    for k in range(n):
        i = n - k
        jet = JetVar(field_name, n + k)
        reduced = substitute(p_defs[i - 1], {**known, **inverse})
        inverse[jet] = _solve_linear(reduced, jet, Expr.atom(psym(i)))
    el = substitute(euler(L, field_name), {**known, **inverse})
    el_top = _solve_linear(el, JetVar(field_name, 2 * n), Expr.const(0))
    return ChartSpec(
        q_defs=[Expr.atom(JetVar(field_name, j)) for j in range(n)],
        p_defs=p_defs,
        inverse=inverse,
        el_top=el_top,
        field=field_name,
    )


def _solve_linear(expr: Expr, jet: JetVar, target: Expr) -> Expr:
    """Solve expr = target for ``jet``; expr must be affine in it."""
    stray = [a for a in expr.jets() if a != jet]
    if stray:
        raise NonQuadraticTop(f"cannot isolate {jet.name()}: {', '.join(a.name() for a in stray)} remain")
    parts = expr.collect(jet)
    if max(parts) != 1:
        raise NonQuadraticTop(f"{jet.name()} does not enter linearly")
    slope = parts[1]
    if not slope.is_coeff() or slope.is_zero():
        raise NonQuadraticTop(f"coefficient {slope} of {jet.name()} is not an invertible coefficient")
    return (target - parts.get(0, Expr.const(0))) / slope


# the reduced system ------------------------------------------------------------

def poisson(A: Expr, B: Expr, n: int) -> Expr:
    """{A, B} = sum_i dA/dq_i dB/dp_i - dA/dp_i dB/dq_i."""
    out = Expr.const(0)
    for i in range(1, n + 1):
        qi, pi = qsym(i), psym(i)
        out = out + partial(A, qi) * partial(B, pi) - partial(A, pi) * partial(B, qi)
    return out


def hamilton_vector_field(Hm: Expr, n: int) -> Dict[ChartSym, Expr]:
    """q_i' = dHm/dp_i, p_i' = -dHm/dq_i."""
    out = {}
    for i in range(1, n + 1):
        out[qsym(i)] = partial(Hm, psym(i))
        out[psym(i)] = -partial(Hm, qsym(i))
    return out


def chart_derivative(f: Expr, var: str, field_map: Dict[ChartSym, Expr]) -> Expr:
    """d/dvar along a chart-level flow (explicit var dependence included)."""
    return derivation(f, var, lambda a: field_map.get(a))


class Restrictor:
    """Maps x-jet expressions to chart coordinates on the stationary manifold.

    Jets in the chart's base map are replaced directly; higher jets are
    generated by differentiating along the x-flow of H, so ``attach_H`` must
    be called before restricting such jets.
    """

    def __init__(self, chart: ChartSpec):
        self.chart = chart
        self.map: Dict[JetVar, Expr] = chart.base_map()
        self.hamilton_x: Optional[Dict[ChartSym, Expr]] = None

    def attach_H(self, H: Expr) -> None:
        self.hamilton_x = hamilton_vector_field(H, self.chart.n)

    def jet_image(self, a: JetVar) -> Expr:
        if a in self.map:
            return self.map[a]
        if a.t_order:
            raise ChartInconsistent(f"{a.name()} is not an x-jet")
        if a.x_order == 0:
            raise ChartInconsistent(f"chart does not determine {a.name()}")
        if self.hamilton_x is None:
            raise ChartInconsistent(f"{a.name()} needs the x-flow, which is not available yet")
        lower = self.jet_image(JetVar(a.field, a.x_order - 1))
        img = chart_derivative(lower, "x", self.hamilton_x)
        self.map[a] = img
        return img

    def __call__(self, e: Expr) -> Expr:
        e = Expr.lift(e)
        binds = {a: self.jet_image(a) for a in e.jets()}
        return substitute(e, binds)


def legendre_H(L: Expr, chart: ChartSpec, restrict: Restrictor) -> Expr:
    """H = restrict(-L) + sum p_i restrict(D_x q_i)."""
    from .expr import d_x

    H = -restrict(L)
    for i, qd in enumerate(chart.q_defs):
        H = H + Expr.atom(psym(i + 1)) * restrict(d_x(qd))
    return H


@dataclass
class Reduction:
    """Everything produced by a reduction, derived or supplied."""

    L: Expr
    pde: EvolutionPDE
    chart: ChartSpec
    restrict: Restrictor
    H: Expr
    Lambda: Expr
    Q_jet: Expr
    Q_tilde: Expr
    certificate: Optional[Certificate] = None

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def hamilton_x(self) -> Dict[ChartSym, Expr]:
        return hamilton_vector_field(self.H, self.n)

    @property
    def hamilton_t(self) -> Dict[ChartSym, Expr]:
        return hamilton_vector_field(-self.Q_tilde, self.n)


def build_Q(L: Expr, pde: EvolutionPDE, chart: ChartSpec, Lambda: Optional[Expr] = None):
    """Return (Lambda, Q on jets) with Q = Lambda - sum p_i D_t q_i."""
    if Lambda is None:
        Lambda = integrate_dx(d_t(L, pde))
    Q = Lambda
    for qd, pd in zip(chart.q_defs, chart.p_defs):
        Q = Q - pd * d_t(qd, pde)
    return Lambda, Q


def reduce_scalar(L: Expr, pde: EvolutionPDE, field_name: Optional[str] = None) -> Reduction:
    """Derive mode: certify L, build the chart, H, Lambda and Q."""
    L = Expr.lift(L)
    field_name = field_name or pde.fields[0]
    cert = certify_first_integral(L, pde)
    if not cert.ok:
        w = "; ".join(f"E_{f} = {v}" for f, v in cert.witness.items())
        raise NotExact(f"D_t L is not a total x-derivative ({w})", witness=cert.witness)
    chart = build_chart(L, field_name)
    restrict = Restrictor(chart)
    H = legendre_H(L, chart, restrict)
    restrict.attach_H(H)
    Lam, Qj = build_Q(L, pde, chart)
    return Reduction(L, pde, chart, restrict, H, Lam, Qj, restrict(Qj), cert)


def verify_supplied(L: Expr, pde: EvolutionPDE, chart: ChartSpec, Lambda: Expr) -> Reduction:
    """Verify mode: check a hand-supplied chart and Lambda, then reduce."""
    from .expr import d_x

    L = Expr.lift(L)
    Lambda = Expr.lift(Lambda)
    gap = d_t(L, pde) - d_x(Lambda)
    if not gap.is_zero():
        raise LambdaMismatch(f"D_t L - D_x Lambda = {gap}", witness=gap)
    restrict = Restrictor(chart)
    for i, pd in enumerate(chart.p_defs):
        got = restrict(pd)
        if got != Expr.atom(psym(i + 1)):
            raise ChartInconsistent(f"p{i + 1} restricts to {got}")
    H = legendre_H(L, chart, restrict)
    restrict.attach_H(H)
    for f in sorted(set(fields_of(L)) | set(pde.fields)):
        st = restrict(euler(L, f))
        if not st.is_zero():
            raise ChartInconsistent(f"stationarity E_{f}(L) restricts to {st}")
    Lam, Qj = build_Q(L, pde, chart, Lambda)
    cert = certify_first_integral(L, pde)
    return Reduction(L, pde, chart, restrict, H, Lam, Qj, restrict(Qj), cert)


def zero_curvature(H: Expr, Q_tilde: Expr, n: int) -> Expr:
    """{-Q, H} + d(-Q)/dx - dH/dt; vanishes when the two flows commute."""
    mQ = -Q_tilde
    return poisson(mQ, H, n) + partial(mQ, "x") - partial(H, "t")


def check_reduced_flows(red: Reduction, Q_tilde: Optional[Expr] = None) -> CheckList:
    """Exact checks of the reduced pair of flows.

    zero curvature, the q_1 equation of the t-flow, the full t-flow and
    the x-flow against the jet-space derivatives, chart consistency and
    commutation of the
    two chart-level vector fields.  ``Q_tilde`` overrides the derived one
    (used for mutation controls).
    """
    from .expr import d_x

    n = red.n
    Qt = red.Q_tilde if Q_tilde is None else Expr.lift(Q_tilde)
    R = red.restrict
    hx = hamilton_vector_field(red.H, n)
    ht = hamilton_vector_field(-Qt, n)
    out = CheckList()
    if red.certificate is not None:
        out.add(Check("first_integral", red.certificate.ok,
                      None if red.certificate.ok else "; ".join(str(w) for w in red.certificate.witness.values())))
    out.add(zero_check("zero_curvature", zero_curvature(red.H, Qt, n)))
    q1dot = R(d_t(red.chart.q_defs[0], red.pde))
    out.add(zero_check("q1_t_equation", q1dot - ht[qsym(1)]))
    diffs = []
    for i in range(n):
        dq = R(d_t(red.chart.q_defs[i], red.pde)) - ht[qsym(i + 1)]
        dp = R(d_t(red.chart.p_defs[i], red.pde)) - ht[psym(i + 1)]
        diffs += [d for d in (dq, dp) if not d.is_zero()]
    out.add(Check("t_flow_matches", not diffs, "; ".join(map(str, diffs)) if diffs else None))
    diffs = []
    for i in range(n):
        dq = R(d_x(red.chart.q_defs[i])) - hx[qsym(i + 1)]
        dp = R(d_x(red.chart.p_defs[i])) - hx[psym(i + 1)]
        diffs += [d for d in (dq, dp) if not d.is_zero()]
    out.add(Check("x_flow_matches", not diffs, "; ".join(map(str, diffs)) if diffs else None))
    diffs = []
    for i in range(n):
        got = R(red.chart.p_defs[i]) - Expr.atom(psym(i + 1))
        if not got.is_zero():
            diffs.append(got)
    out.add(Check("chart_consistency", not diffs, "; ".join(map(str, diffs)) if diffs else None))
    if red.chart.el_top is not None:
        f = red.chart.field
        below = R(Expr.atom(JetVar(f, 2 * n - 1)))
        out.add(zero_check("el_top_matches_x_flow", chart_derivative(below, "x", hx) - red.chart.el_top))
    diffs = []
    for v in list(hx):
        a = chart_derivative(ht[v], "x", hx)
        b = chart_derivative(hx[v], "t", ht)
        if a != b:
            diffs.append(a - b)
    out.add(Check("flows_commute", not diffs, "; ".join(map(str, diffs)) if diffs else None))
    return out


def stationary_case_identity(red: Reduction) -> Expr:
    """{Q, H} + dQ/dx, which vanishes when L does not depend on t."""
    return poisson(red.Q_tilde, red.H, red.n) + partial(red.Q_tilde, "x")


def restrict_is_homomorphism(red: Reduction, a: Expr, b: Expr) -> bool:
    R = red.restrict
    return R(a * b) == R(a) * R(b) and R(a + b) == R(a) + R(b)
