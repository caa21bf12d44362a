"""Atomic symbols of the jet algebra.

Three kinds of atoms exist:

* ``JetVar(field, x_order, t_order)``: a jet coordinate, u^(i, beta).
* ``ChartSym(kind, index)``: a canonical-chart symbol such as q1 or p2.
* ``TrigSym(func, arg)``: sin or cos of a zeroth-order atom.

Atoms compare through a precomputed ``key`` so sorting is cheap and total.
"""
from __future__ import annotations

CHART_KINDS = ("q", "p", "q_hat", "p_hat", "aux")
_KIND_RANK = {k: i for i, k in enumerate(CHART_KINDS)}
# textual prefixes used by the renderer and parser
CHART_PREFIX = {"q": "q", "p": "p", "q_hat": "qh", "p_hat": "ph", "aux": "aux"}


class NonAtomicTrigArgument(ValueError):
    """sin/cos applied to something other than a zeroth-order atom."""


class Atom:
    __slots__ = ("key", "_hash")

    def __eq__(self, other):
        return isinstance(other, Atom) and self.key == other.key

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"{type(self).__name__}<{self.name()}>"

    def name(self) -> str:
        raise NotImplementedError

    @property
    def order(self) -> int:
        return 0


class JetVar(Atom):
    __slots__ = ("field", "x_order", "t_order")

    def __init__(self, field: str, x_order: int = 0, t_order: int = 0):
        if x_order < 0 or t_order < 0:
            raise ValueError("jet orders must be non-negative")
        self.field = field
        self.x_order = x_order
        self.t_order = t_order
        self.key = (0, field, t_order, x_order)
        self._hash = hash(self.key)

    @property
    def order(self) -> int:
        return self.x_order + self.t_order

    def dx(self, k: int = 1) -> "JetVar":
        return JetVar(self.field, self.x_order + k, self.t_order)

    def dt(self, k: int = 1) -> "JetVar":
        return JetVar(self.field, self.x_order, self.t_order + k)

    def name(self) -> str:
        i, b = self.x_order, self.t_order
        if i + b == 0:
            return self.field
        if b == 0 and i >= 4:
            return f"{self.field}^({i})"
        if i + b <= 3:
            return f"{self.field}_" + "x" * i + "t" * b
        return f"{self.field}^({i},{b})"


class ChartSym(Atom):
    __slots__ = ("kind", "index")

    def __init__(self, kind: str, index: int):
        if kind not in _KIND_RANK:
            raise ValueError(f"unknown chart kind {kind!r}")
        self.kind = kind
        self.index = index
        self.key = (1, _KIND_RANK[kind], index)
        self._hash = hash(self.key)

    def name(self) -> str:
        return f"{CHART_PREFIX[self.kind]}{self.index}"


class TrigSym(Atom):
    __slots__ = ("func", "arg")

    def __init__(self, func: str, arg: Atom):
        if func not in ("sin", "cos"):
            raise ValueError(f"unknown function {func!r}")
        if isinstance(arg, TrigSym) or arg.order != 0:
            raise NonAtomicTrigArgument(f"{func} needs a zeroth-order atom, got {arg.name()}")
        self.func = func
        self.arg = arg
        self.key = (2, arg.key, 0 if func == "cos" else 1)
        self._hash = hash(self.key)

    def partner(self) -> "TrigSym":
        return TrigSym("cos" if self.func == "sin" else "sin", self.arg)

    def name(self) -> str:
        return f"{self.func}({self.arg.name()})"


def q(i: int) -> ChartSym:
    return ChartSym("q", i)


def p(i: int) -> ChartSym:
    return ChartSym("p", i)


def sin(a: Atom) -> TrigSym:
    return TrigSym("sin", a)


def cos(a: Atom) -> TrigSym:
    return TrigSym("cos", a)
