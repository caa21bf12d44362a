"""Polynomial expressions over Q(x, t) in jet, chart and trig atoms.

An ``Expr`` is a map from monomials to nonzero coefficients.  A monomial is
a tuple of ``(atom, exponent)`` pairs sorted by atom key.  The only
non-polynomial rewrite is sin(a)^2 -> 1 - cos(a)^2, so every sin appears
with exponent at most one.  With these rules equal polynomials have equal
term maps, which is what ``==`` compares.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, Dict, Iterable, Optional, Tuple
import math

from . import coeff as C
from .atoms import Atom, ChartSym, JetVar, NonAtomicTrigArgument, TrigSym

Monomial = Tuple[Tuple[Atom, int], ...]
ONE_MONO: Monomial = ()


class DivisionByJet(ZeroDivisionError):
    """Division by an expression that contains atoms."""


class CyclicBinding(ValueError):
    """A substitution map refers back to itself."""


class UnboundAtom(KeyError):
    """Evaluation point is missing a value for an atom."""


PoleAtPoint = C.PoleAtPoint


def _mono_key(m: Monomial):
    return tuple((a.key, e) for a, e in m)


@lru_cache(maxsize=200_000)
def mono_mul(m1: Monomial, m2: Monomial) -> Tuple[Tuple[Monomial, int], ...]:
    """Product of two monomials as a small sum of (monomial, integer) terms."""
    if not m1:
        return ((m2, 1),)
    if not m2:
        return ((m1, 1),)
    exps: Dict[Atom, int] = dict(m1)
    for a, e in m2:
        exps[a] = exps.get(a, 0) + e
    sin_high = [a for a, e in exps.items() if e > 1 and isinstance(a, TrigSym) and a.func == "sin"]
    if not sin_high:
        return ((tuple(sorted(exps.items(), key=lambda ae: ae[0].key)), 1),)
    # sin^k -> sin^(k mod 2) * (1 - cos^2)^(k div 2), expanded
    partial = [(exps, 1)]
    for s in sin_high:
        nxt = []
        for base, f in partial:
            k = base[s]
            j = k // 2
            cosa = s.partner()
            for i in range(j + 1):
                d = dict(base)
                if k % 2:
                    d[s] = 1
                else:
                    del d[s]
                if i:
                    d[cosa] = d.get(cosa, 0) + 2 * i
                nxt.append((d, f * comb(j, i) * (-1) ** i))
        partial = nxt
    out: Dict[Monomial, int] = {}
    for d, f in partial:
        m = tuple(sorted(d.items(), key=lambda ae: ae[0].key))
        out[m] = out.get(m, 0) + f
    return tuple((m, f) for m, f in out.items() if f)


def _accumulate(acc: dict, mono: Monomial, c) -> None:
    prev = acc.get(mono)
    if prev is None:
        acc[mono] = c
    else:
        s = C.add(prev, c)
        if C.is_zero(s):
            del acc[mono]
        else:
            acc[mono] = s


def _times_int(c, f: int):
    return c if f == 1 else C.mul(c, Fraction(f))


class Expr:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Optional[dict] = None):
        self.terms = {m: c for m, c in (terms or {}).items() if not C.is_zero(c)}
        self._hash = None

    # construction -------------------------------------------------------
    @classmethod
    def _raw(cls, terms: dict) -> "Expr":
        e = cls.__new__(cls)
        e.terms = terms
        e._hash = None
        return e

    @classmethod
    def const(cls, v) -> "Expr":
        c = C.coeff(v)
        return cls._raw({} if C.is_zero(c) else {ONE_MONO: c})

    @classmethod
    def atom(cls, a: Atom, power: int = 1) -> "Expr":
        if isinstance(a, TrigSym) and a.func == "sin" and power > 1:
            return cls.atom(a) ** power
        if power == 0:
            return cls.const(1)
        return cls._raw({((a, power),): C.ONE})

    @staticmethod
    def lift(v) -> "Expr":
        if isinstance(v, Expr):
            return v
        if isinstance(v, Atom):
            return Expr.atom(v)
        return Expr.const(v)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = Expr.lift(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            _accumulate(acc, m, c)
        return Expr._raw(acc)

    __radd__ = __add__

    def __neg__(self):
        return Expr._raw({m: C.neg(c) for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-Expr.lift(other))

    def __rsub__(self, other):
        return Expr.lift(other) - self

    def scale(self, c) -> "Expr":
        c = C.coeff(c) if not isinstance(c, Fraction) else c
        if C.is_zero(c):
            return Expr._raw({})
        return Expr._raw({m: C.mul(v, c) for m, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Expr):
            if isinstance(other, Atom):
                other = Expr.atom(other)
            else:
                return self.scale(C.coeff(other))
        if len(other.terms) == 1 and ONE_MONO in other.terms:
            return self.scale(other.terms[ONE_MONO])
        if len(self.terms) == 1 and ONE_MONO in self.terms:
            return other.scale(self.terms[ONE_MONO])
        acc: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                c12 = C.mul(c1, c2)
                for m, f in mono_mul(m1, m2):
                    _accumulate(acc, m, _times_int(c12, f))
        return Expr._raw(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Expr.lift(other)
        if not other.is_coeff():
            raise DivisionByJet(f"cannot divide by {other}")
        c = other.as_coeff()
        if C.is_zero(c):
            raise ZeroDivisionError("division by zero")
        return self.scale(C.div(C.ONE, c))

    def __rtruediv__(self, other):
        return Expr.lift(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k < 0:
            if not self.is_coeff():
                raise DivisionByJet(f"negative power of {self}")
            return Expr.const(C.power(self.as_coeff(), k))
        result = Expr.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # comparison -----------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Expr):
            try:
                other = Expr.lift(other)
            except TypeError:
                return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    # inspection -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_coeff(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and ONE_MONO in self.terms)

    def as_coeff(self):
        if not self.is_coeff():
            raise ValueError(f"{self} is not a coefficient")
        return self.terms.get(ONE_MONO, C.ZERO)

    def atoms(self) -> set:
        out = set()
        for m in self.terms:
            for a, _ in m:
                out.add(a)
        return out

    def base_atoms(self) -> set:
        """Atoms with trig symbols replaced by their arguments."""
        return {a.arg if isinstance(a, TrigSym) else a for a in self.atoms()}

    def jets(self) -> set:
        return {a for a in self.base_atoms() if isinstance(a, JetVar)}

    def depends_on(self, a) -> bool:
        if a in ("x", "t"):
            return any(C.depends_on(c, a) for c in self.terms.values())
        return a in self.base_atoms() or a in self.atoms()

    def degree(self, a: Atom) -> int:
        d = 0
        for m in self.terms:
            for b, e in m:
                if b == a and e > d:
                    d = e
        return d

    def collect(self, a: Atom) -> Dict[int, "Expr"]:
        """Split by powers of ``a``: {k: coefficient expression of a^k}."""
        out: Dict[int, dict] = {}
        for m, c in self.terms.items():
            k = 0
            rest = []
            for b, e in m:
                if b == a:
                    k = e
                else:
                    rest.append((b, e))
            _accumulate(out.setdefault(k, {}), tuple(rest), c)
        return {k: Expr._raw(v) for k, v in out.items() if v}

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda mc: _mono_key(mc[0]))

    # rendering ------------------------------------------------------------
    def __str__(self):
        return render(self)

    def __repr__(self):
        return f"Expr({render(self)!r})"


def _render_mono(m: Monomial) -> str:
    parts = []
    for a, e in m:
        parts.append(a.name() if e == 1 else f"{a.name()}^{e}")
    return "*".join(parts)


def render(e: Expr) -> str:
    """Deterministic text form, readable by the expression parser."""
    if not e.terms:
        return "0"
    pieces = []
    for m, c in e.sorted_terms():
        body = _render_mono(m)
        if C.is_const(c):
            sign = "-" if c < 0 else ""
            mag = abs(c)
            if body and mag == 1:
                s = body
            elif body:
                s = f"{mag}*{body}"
            else:
                s = str(mag)
            pieces.append((sign, s))
        else:
            sign, cs = C.render_signed(c)
            pieces.append((sign, f"{cs}*{body}" if body else cs))
    out = ""
    for i, (sign, s) in enumerate(pieces):
        if i == 0:
            out = sign + s
        else:
            out += (" - " if sign else " + ") + s
    return out


def normalize(e) -> Expr:
    """Return ``e`` in normal form (Expr values are always kept normalized)."""
    return Expr.lift(e)


# derivatives ---------------------------------------------------------------

def _atom_partial(b: Atom, wrt: Atom) -> Optional[Expr]:
    if b == wrt:
        return Expr.const(1)
    if isinstance(b, TrigSym) and b.arg == wrt:
        d = Expr.atom(b.partner())
        return d if b.func == "sin" else -d
    return None


def partial(e: Expr, wrt) -> Expr:
    """Partial derivative with respect to an atom, or 'x' / 't' explicitly."""
    e = Expr.lift(e)
    if wrt in ("x", "t"):
        acc = {}
        for m, c in e.terms.items():
            dc = C.diff(c, wrt)
            if not C.is_zero(dc):
                acc[m] = dc
        return Expr._raw(acc)
    acc: dict = {}
    for m, c in e.terms.items():
        for k, (b, ex) in enumerate(m):
            d = _atom_partial(b, wrt)
            if d is None:
                continue
            rest = list(m)
            if ex == 1:
                del rest[k]
            else:
                rest[k] = (b, ex - 1)
            rest = tuple(rest)
            ce = _times_int(c, ex)
            for m2, c2 in d.terms.items():
                for mm, f in mono_mul(rest, m2):
                    _accumulate(acc, mm, _times_int(C.mul(ce, c2), f))
    return Expr._raw(acc)


def derivation(e: Expr, var: Optional[str], image: Callable[[Atom], Optional[Expr]]) -> Expr:
    """Apply the derivation d = d/dvar + sum_a image(a) * d/da.

    ``image`` gives the derivative of each non-trig atom (None means zero);
    trig atoms follow by the chain rule through their argument.
    """
    e = Expr.lift(e)
    cache: Dict[Atom, Optional[Expr]] = {}

    def img(b: Atom) -> Optional[Expr]:
        if b in cache:
            return cache[b]
        if isinstance(b, TrigSym):
            inner = img(b.arg)
            if inner is None or inner.is_zero():
                r = None
            else:
                d = Expr.atom(b.partner()) * inner
                r = d if b.func == "sin" else -d
        else:
            r = image(b)
            if r is not None and r.is_zero():
                r = None
        cache[b] = r
        return r

    acc: dict = {}
    if var is not None:
        for m, c in e.terms.items():
            dc = C.diff(c, var)
            if not C.is_zero(dc):
                _accumulate(acc, m, dc)
    for m, c in e.terms.items():
        for k, (b, ex) in enumerate(m):
            d = img(b)
            if d is None:
                continue
            rest = list(m)
            if ex == 1:
                del rest[k]
            else:
                rest[k] = (b, ex - 1)
            rest = tuple(rest)
            ce = _times_int(c, ex)
            for m2, c2 in d.terms.items():
                for mm, f in mono_mul(rest, m2):
                    _accumulate(acc, mm, _times_int(C.mul(ce, c2), f))
    return Expr._raw(acc)


def d_x(e: Expr, ctx: Optional[Dict[Atom, Expr]] = None) -> Expr:
    """Total x-derivative on the free jet space.

    Jets gain one x-order.  Chart symbols are constant unless ``ctx`` gives
    their x-derivative.
    """
    ctx = ctx or {}

    def image(a: Atom):
        if isinstance(a, JetVar):
            return Expr.atom(a.dx())
        v = ctx.get(a)
        return None if v is None else Expr.lift(v)

    return derivation(e, "x", image)


# substitution --------------------------------------------------------------

def _trig_image(b: TrigSym, arg_img: Expr) -> Expr:
    if len(arg_img.terms) == 1:
        (m, c), = arg_img.terms.items()
        if len(m) == 1 and m[0][1] == 1 and not isinstance(m[0][0], TrigSym) and c in (1, -1):
            new = TrigSym(b.func, m[0][0])
            if c == -1 and b.func == "sin":
                return -Expr.atom(new)
            return Expr.atom(new)
    if arg_img.is_zero():
        return Expr.const(0 if b.func == "sin" else 1)
    raise NonAtomicTrigArgument(f"{b.func} of {arg_img} is not representable")


def substitute(e: Expr, bindings: Dict[Atom, object]) -> Expr:
    """Replace atoms by expressions.

    Bindings are resolved recursively, so a right-hand side may mention other
    bound atoms; a cycle raises ``CyclicBinding``.  Trig atoms whose argument
    is bound map to sin/cos of the image, which must be a single atom.
    """
    e = Expr.lift(e)
    bindings = {a: Expr.lift(v) for a, v in bindings.items()}
    bindings = {a: v for a, v in bindings.items() if v != Expr.atom(a)}
    resolved: Dict[Atom, Expr] = {}
    visiting: set = set()

    def resolve(a: Atom) -> Optional[Expr]:
        if a in resolved:
            return resolved[a]
        if isinstance(a, TrigSym):
            inner = resolve(a.arg)
            r = None if inner is None else _trig_image(a, inner)
            if r is None and a in bindings:
                r = resolve_binding(a)
            resolved[a] = r
            return r
        if a not in bindings:
            resolved[a] = None
            return None
        return resolve_binding(a)

    def resolve_binding(a: Atom) -> Expr:
        if a in visiting:
            raise CyclicBinding(f"binding for {a.name()} is cyclic")
        visiting.add(a)
        rhs = bindings[a]
        if any(b in bindings or (isinstance(b, TrigSym) and b.arg in bindings) for b in rhs.atoms()):
            rhs = _apply(rhs, resolve)
        visiting.discard(a)
        resolved[a] = rhs
        return rhs

    return _apply(e, resolve)


def _apply(e: Expr, resolve) -> Expr:
    acc: dict = {}
    powcache: Dict[Tuple[Atom, int], Expr] = {}

    def pw(a: Atom, k: int, img: Expr) -> Expr:
        key = (a, k)
        if key not in powcache:
            powcache[key] = img if k == 1 else img**k
        return powcache[key]

    for m, c in e.terms.items():
        kept = []
        factor = None
        for a, ex in m:
            img = resolve(a)
            if img is None:
                kept.append((a, ex))
            else:
                f = pw(a, ex, img)
                factor = f if factor is None else factor * f
        if factor is None:
            _accumulate(acc, m, c)
            continue
        base = Expr._raw({tuple(kept): c})
        for mm, cc in (base * factor).terms.items():
            _accumulate(acc, mm, cc)
    return Expr._raw(acc)


# evaluation ----------------------------------------------------------------

def evaluate(e: Expr, point: Dict[object, object]):
    """Evaluate at a point mapping atoms (and 'x', 't') to numbers.

    The result is an exact Fraction when every value is rational and no trig
    atom is present, otherwise a float.
    """
    e = Expr.lift(e)
    xv = point.get("x")
    tv = point.get("t")
    if isinstance(xv, int):
        xv = Fraction(xv)
    if isinstance(tv, int):
        tv = Fraction(tv)
    vals: Dict[Atom, object] = {}

    def val(a: Atom):
        if a in vals:
            return vals[a]
        if isinstance(a, TrigSym):
            inner = val(a.arg)
            v = math.sin(float(inner)) if a.func == "sin" else math.cos(float(inner))
        else:
            if a not in point:
                raise UnboundAtom(f"no value for {a.name()}")
            v = point[a]
            if isinstance(v, int):
                v = Fraction(v)
        vals[a] = v
        return v

    total = Fraction(0)
    for m, c in e.terms.items():
        try:
            cv = C.evaluate(c, xv, tv)
        except KeyError as err:
            raise UnboundAtom(f"no value for {err.args[0]}") from None
        term = cv
        for a, ex in m:
            term = term * val(a) ** ex
        total = total + term
    if type(total) is Fraction:
        return total
    return float(total)
