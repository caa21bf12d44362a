"""Variational calculus on the free x-jet space.

Euler and higher Euler operators, an exactness test, and an exact inverse
of the total x-derivative (``integrate_dx``) for densities that pass it.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Optional

from .expr import Expr, JetVar, TrigSym, d_x, partial
from .expr import coeff as C


class IndexExceedsOrder(ValueError):
    """Higher Euler index larger than the order of the density."""


class NotExact(ValueError):
    """The density is not a total x-derivative; ``witness`` holds E(e)."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NonIntegrableRemainder(ValueError):
    """The jet-free remainder is not a polynomial in x over Q(t)."""


def fields_of(e: Expr) -> list:
    return sorted({a.field for a in e.jets()})


def order_in(e: Expr, field: str) -> int:
    """Highest x-order of ``field`` in ``e`` (-1 when absent)."""
    return max((a.x_order for a in e.jets() if a.field == field), default=-1)


def _dx_power(e: Expr, k: int) -> Expr:
    for _ in range(k):
        e = d_x(e)
    return e


def higher_euler(L: Expr, field: str, i: int) -> Expr:
    """E_i(L) = sum_k (-1)^k D_x^k dL/du^(i+k); i = 0 is the Euler operator."""
    L = Expr.lift(L)
    n = order_in(L, field)
    if i < 0:
        raise ValueError("index must be non-negative")
    if i > max(n, 0):
        raise IndexExceedsOrder(f"index {i} exceeds order {n} of {field}")
    # Horner form: P_n, then P_k = dL/du^(k) - D_x P_{k+1}
    acc = Expr.const(0)
    for k in range(n, i - 1, -1):
        acc = partial(L, JetVar(field, k)) - d_x(acc)
    return acc


def euler(L: Expr, field: str) -> Expr:
    """Variational derivative dL/du - D_x dL/du_x + D_x^2 dL/du_xx - ..."""
    L = Expr.lift(L)
    if order_in(L, field) < 0:
        return Expr.const(0)
    return higher_euler(L, field, 0)


def is_exact(e: Expr, fields: Optional[Iterable[str]] = None) -> bool:
    """True when every Euler derivative of ``e`` vanishes."""
    e = Expr.lift(e)
    names = fields_of(e) if fields is None else list(fields)
    return all(euler(e, f).is_zero() for f in names)


# antiderivatives with respect to one atom ----------------------------------

@lru_cache(maxsize=None)
def _trig_poly_integral(k: int, a: int, b: int):
    """Antiderivative of v^k sin(v)^a cos(v)^b as {(k', a', b'): Fraction}."""
    if a == 0 and b == 0:
        return {(k + 1, 0, 0): Fraction(1, k + 1)}
    if k == 0:
        if a == 1:
            return {(0, 0, b + 1): Fraction(-1, b + 1)}
        out = {(0, 1, b - 1): Fraction(1, b)}
        if b >= 2:
            for mon, c in _trig_poly_integral(0, 0, b - 2).items():
                out[mon] = out.get(mon, 0) + c * Fraction(b - 1, b)
        return out
    # by parts: v^k G - k * int v^(k-1) G
    G = _trig_poly_integral(0, a, b)
    out: Dict[tuple, Fraction] = {}
    for (gk, ga, gb), gc in G.items():
        key = (gk + k, ga, gb)
        out[key] = out.get(key, 0) + gc
        for mon, c in _trig_poly_integral(k - 1 + gk, ga, gb).items():
            out[mon] = out.get(mon, 0) - k * gc * c
    return {m: c for m, c in out.items() if c}


def integrate_atom(A: Expr, v) -> Expr:
    """Antiderivative of ``A`` with respect to the atom ``v``.

    ``A`` must be polynomial in ``v``; when ``v`` has order zero it may also
    carry sin(v) and cos(v).
    """
    sv, cv = (TrigSym("sin", v), TrigSym("cos", v)) if v.order == 0 else (None, None)
    out = Expr.const(0)
    for m, c in A.terms.items():
        k = a = b = 0
        rest = []
        for atom, e in m:
            if atom == v:
                k = e
            elif sv is not None and atom == sv:
                a = e
            elif cv is not None and atom == cv:
                b = e
            else:
                rest.append((atom, e))
        base = Expr._raw({tuple(rest): c})
        prim = Expr.const(0)
        for (kk, aa, bb), f in _trig_poly_integral(k, a, b).items():
            term = Expr.const(f)
            if kk:
                term = term * Expr.atom(v, kk)
            if aa:
                term = term * Expr.atom(sv, aa)
            if bb:
                term = term * Expr.atom(cv, bb)
            prim = prim + term
        out = out + base * prim
    return out


def _integrate_coeff_in_x(c) -> Expr:
    num, den = C.numer_denom(c)
    if any(i > 0 for (i, _), _ in den):
        raise NonIntegrableRemainder(f"remainder {C.render(c)} is not polynomial in x over Q(t)")
    denc = C.from_terms(den)
    prim = C.from_terms([((i + 1, j), cc / (i + 1)) for (i, j), cc in num])
    return Expr.const(C.div(prim, denc))


def _pick_top(r: Expr) -> JetVar:
    jets = r.jets()
    k = max(a.x_order for a in jets)
    return min((a for a in jets if a.x_order == k), key=lambda a: a.key)


def integrate_dx(e: Expr, max_steps: int = 10_000) -> Expr:
    """Return g with D_x g = e, normalized so g has no pure-t part.

    Peels the highest jet, which enters linearly in an exact density, and
    integrates its coefficient in the next-lower jet of the same field.
    """
    e = Expr.lift(e)
    for f in fields_of(e):
        w = euler(e, f)
        if not w.is_zero():
            raise NotExact(f"Euler derivative in {f} is {w}", witness=w)
    g = Expr.const(0)
    r = e
    for _ in range(max_steps):
        if r.is_zero():
            break
        if not r.jets():
            if not r.is_coeff():
                raise NotExact(f"remainder {r} has non-jet atoms")
            g = g + _integrate_coeff_in_x(r.as_coeff())
            r = Expr.const(0)
            break
        top = _pick_top(r)
        if top.x_order == 0:
            raise NotExact(f"remainder {r} depends on {top.name()} without derivatives")
        parts = r.collect(top)
        if max(parts) > 1:
            raise NotExact(f"{top.name()} enters nonlinearly")
        A = parts[1]
        if any(a.x_order >= top.x_order for a in A.jets()):
            raise NotExact(f"coefficient of {top.name()} involves top-order jets")
        G = integrate_atom(A, JetVar(top.field, top.x_order - 1))
        g = g + G
        r = r - d_x(G)
    else:
        raise NotExact("peeling did not terminate")
    return drop_pure_t(g)


def drop_pure_t(g: Expr) -> Expr:
    """Remove the atom-free part that depends on t alone."""
    c = g.terms.get((), None)
    if c is None or C.depends_on(c, "x"):
        if c is not None:
            num, den = C.numer_denom(c)
            if not any(i > 0 for (i, _), _ in den):
                keep = [((i, j), v) for (i, j), v in num if i > 0]
                newc = C.div(C.from_terms(keep), C.from_terms(den))
                return g - Expr.const(c) + Expr.const(newc)
        return g
    return g - Expr.const(c)


def differs_by_function_of_t(a: Expr, b: Expr) -> bool:
    """True when a - b is a function of t alone (possibly zero)."""
    d = Expr.lift(a) - Expr.lift(b)
    if not d.is_coeff():
        return False
    return not C.depends_on(d.as_coeff(), "x")
