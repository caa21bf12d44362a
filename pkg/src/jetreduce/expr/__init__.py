"""Exact expression algebra over Q(x, t) on jet space."""
from .atoms import ChartSym, JetVar, NonAtomicTrigArgument, TrigSym, cos, p, q, sin
from .core import (
    CyclicBinding,
    DivisionByJet,
    Expr,
    PoleAtPoint,
    UnboundAtom,
    d_x,
    derivation,
    evaluate,
    normalize,
    partial,
    render,
    substitute,
)

X = Expr.const("x")
T = Expr.const("t")


def jet(field: str, x_order: int = 0, t_order: int = 0) -> Expr:
    return Expr.atom(JetVar(field, x_order, t_order))


def sym(a) -> Expr:
    return Expr.lift(a)


__all__ = [
    "ChartSym", "JetVar", "TrigSym", "Expr", "X", "T", "jet", "sym", "q", "p", "sin", "cos",
    "normalize", "d_x", "derivation", "partial", "substitute", "evaluate", "render",
    "DivisionByJet", "NonAtomicTrigArgument", "CyclicBinding", "UnboundAtom", "PoleAtPoint",
]
