"""Numerical integration of the reduced flows and Painleve checks.

The reduced x- and t-flows are compiled from their exact chart-level
vector fields and integrated with classical fixed-step RK4.  Scaling maps
send a t-flow trajectory (at frozen x) to a solution of the corresponding
Painleve equation, which is integrated independently and compared.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import accel
from .codegen import compile_vector_field
from .expr import ChartSym, Expr
from .reduce_h import Reduction, hamilton_vector_field, psym, qsym


class NonFiniteRhs(FloatingPointError):
    """The right-hand side produced NaN or infinity."""


class WindowContainsSingularity(ValueError):
    """The requested window crosses a pole or a singular scaling point."""


# systems ---------------------------------------------------------------------

@dataclass
class OdeSystem:
    """dy/ds = rhs(s, y) with one frozen variable.

    ``independent`` is 'x' or 't'; the other variable is held at ``frozen``.
    The state is (q_1..q_n, p_1..p_n).
    """

    fields: List[Expr]
    symbols: List[ChartSym]
    independent: str
    frozen: float
    _mods: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return len(self.symbols)

    def kernels(self, steps: int = 0):
        """Generated module with rhs and rk4_grid; jitted for long runs."""
        jit = accel.use_numba(steps)
        if jit not in self._mods:
            self._mods[jit] = compile_vector_field(self.fields, self.symbols, self.independent, jit)
        return self._mods[jit]

    def rhs(self, s: float, y) -> np.ndarray:
        out = np.empty(self.dim)
        self.kernels().rhs(float(s), np.asarray(y, dtype=float), float(self.frozen), out)
        return out

    @classmethod
    def from_hamiltonian(cls, Hm: Expr, n: int, independent: str, frozen: float) -> "OdeSystem":
        vf = hamilton_vector_field(Hm, n)
        syms = [qsym(i + 1) for i in range(n)] + [psym(i + 1) for i in range(n)]
        return cls([vf[s] for s in syms], syms, independent, frozen)


def x_flow(red: Reduction, t_frozen: float) -> OdeSystem:
    return OdeSystem.from_hamiltonian(red.H, red.n, "x", t_frozen)


def t_flow(red: Reduction, x_frozen: float) -> OdeSystem:
    return OdeSystem.from_hamiltonian(-red.Q_tilde, red.n, "t", x_frozen)


def rk4_step(sys: OdeSystem, s: float, y, h: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    k1 = sys.rhs(s, y)
    k2 = sys.rhs(s + h / 2, y + h / 2 * k1)
    k3 = sys.rhs(s + h / 2, y + h / 2 * k2)
    k4 = sys.rhs(s + h, y + h * k3)
    if not all(np.all(np.isfinite(k)) for k in (k1, k2, k3, k4)):
        raise NonFiniteRhs(f"non-finite right-hand side near s={s}")
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_grid(sys: OdeSystem, y0, grid) -> np.ndarray:
    """RK4 along an arbitrary monotone grid; returns states at every node."""
    grid = np.asarray(grid, dtype=float)
    Y, bad = sys.kernels(len(grid)).rk4_grid(grid, np.asarray(y0, dtype=float), float(sys.frozen))
    if bad >= 0:
        raise NonFiniteRhs(f"solution left the finite range near s={grid[bad]}")
    return Y


def uniform_grid(s0: float, s1: float, h: float) -> np.ndarray:
    n = max(1, int(math.ceil(abs(s1 - s0) / h - 1e-9)))
    return np.linspace(s0, s1, n + 1)


def integrate(sys: OdeSystem, y0, s0: float, s1: float, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 from s0 to s1 (the last step lands exactly on s1)."""
    grid = uniform_grid(s0, s1, h)
    return grid, integrate_grid(sys, y0, grid)


ROUNDOFF_FLOOR = 1e-13


def fitted_order(deltas: Sequence[float], errors: Sequence[float], floor: float = ROUNDOFF_FLOOR) -> float:
    """Least-squares slope of log(error) against log(delta).

    Errors below ``floor`` are roundoff and carry no order information, so
    they are left out.  If fewer than two points remain the result is inf:
    the difference never rose above roundoff.
    """
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > floor
    if keep.sum() < 2:
        return math.inf
    return float(np.polyfit(np.log(d[keep]), np.log(e[keep]), 1)[0])


def write_trajectory_csv(path: str, s, Y, n: int, extra: Optional[Dict[str, Sequence[float]]] = None) -> None:
    """Columns s, q1..qn, p1..pn and any extra columns, 17 significant digits."""
    extra = extra or {}
    header = ["s"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + list(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(s)):
            row = [s[k]] + list(Y[k]) + [extra[c][k] for c in extra]
            w.writerow([f"{float(v):.17g}" for v in row])


# Painleve equations ------------------------------------------------------------

def painleve_residual(kind: str, z, w, w1, w2):
    """Residual of the Painleve equation of the given kind ('I', 'II', 'III')."""
    if kind == "I":
        return w2 - 6 * w**2 - z
    if kind == "II":
        return w2 - 2 * w**3 - z * w
    if kind == "III":
        return 2 * z * w2 + 2 * w1 - np.sin(w)
    raise ValueError(f"unknown Painleve kind {kind!r}")


def painleve_second_derivative(kind: str, z, w, w1):
    if kind == "I":
        return 6 * w**2 + z
    if kind == "II":
        return 2 * w**3 + z * w
    if kind == "III":
        return (np.sin(w) - 2 * w1) / (2 * z)
    raise ValueError(f"unknown Painleve kind {kind!r}")


@dataclass
class ScalingMap:
    """Self-similar reduction between (x, t, q, p) and (z, w, dw/dz).

    Only the first-order reductions with a single pair (q, p) are covered.
    """

    kind: str

    def z_of(self, x, t):
        if self.kind == "I":
            return x - 6 * t**2
        if self.kind == "II":
            return x / np.cbrt(3 * t)
        return (x**2 - t**2) / 2

    def t_of(self, x, z):
        if self.kind == "I":
            return np.sqrt((x - z) / 6)
        if self.kind == "II":
            return (x / z) ** 3 / 3
        return np.sqrt(x**2 - 2 * z)

    def to_painleve(self, x, t, q, p):
        """Return (z, w, dw/dz)."""
        z = self.z_of(x, t)
        if self.kind == "I":
            return z, q / 2 + t, p / 2
        if self.kind == "II":
            r = np.cbrt(3 * t)
            return z, r * q, p / r
        return z, q, p / (2 * z)

    def from_painleve(self, x, t, w, w1):
        """Inverse map: (q, p) from (w, dw/dz) at (x, t)."""
        if self.kind == "I":
            return 2 * (w - t), 2 * w1
        if self.kind == "II":
            r = np.cbrt(3 * t)
            return w / r, w1 * r
        return w, 2 * self.z_of(x, t) * w1

    def check_window(self, x, t0, t1):
        ts = np.linspace(t0, t1, 5)
        if self.kind == "II" and (t0 * t1 <= 0 or x == 0):
            raise WindowContainsSingularity("PII scaling needs t != 0 and x != 0 across the window")
        if self.kind == "III":
            z = self.z_of(x, ts)
            if np.any(z <= 0) != np.all(z <= 0) or np.any(z == 0):
                raise WindowContainsSingularity("PIII scaling crosses z = 0")
        if self.kind == "I" and (t0 < 0) != (t1 < 0):
            raise WindowContainsSingularity("PI window must not cross t = 0")


def _painleve_system_rhs(kind: str):
    def rhs(z, y):
        return np.array([y[1], painleve_second_derivative(kind, z, y[0], y[1])])

    return rhs


def _rk4_plain(rhs, grid, y0):
    Y = np.empty((len(grid), len(y0)))
    y = np.asarray(y0, dtype=float)
    Y[0] = y
    for i in range(len(grid) - 1):
        s, h = grid[i], grid[i + 1] - grid[i]
        k1 = rhs(s, y)
        k2 = rhs(s + h / 2, y + h / 2 * k1)
        k3 = rhs(s + h / 2, y + h / 2 * k2)
        k4 = rhs(s + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1e8:
            raise WindowContainsSingularity(f"Painleve solution blows up near z={grid[i + 1]}")
        Y[i + 1] = y
    return Y


@dataclass
class ScalingReport:
    kind: str
    z: np.ndarray
    t: np.ndarray
    flow: np.ndarray
    w_flow: np.ndarray
    w1_flow: np.ndarray
    w_ode: np.ndarray
    w1_ode: np.ndarray
    residual: np.ndarray
    deviation: float
    max_residual: float


def scaling_consistency(red: Reduction, kind: str, x: float, t0: float, t1: float, h: float,
                        w0: float, w1_0: float) -> ScalingReport:
    """Compare the frozen-x t-flow with the Painleve equation it should solve.

    Both are integrated with RK4 on matched grids: the Painleve equation on
    a uniform z-grid and the t-flow on the t-values of those nodes.  The
    residual column is the Painleve residual with w'' from a centred second
    difference of the mapped t-flow trajectory (interior nodes).
    """
    smap = ScalingMap(kind)
    smap.check_window(x, t0, t1)
    z0, z1 = smap.z_of(x, t0), smap.z_of(x, t1)
    q0, p0 = smap.from_painleve(x, t0, w0, w1_0)
    if t0 == t1:
        one = lambda v: np.array([float(v)])
        return ScalingReport(kind, one(z0), one(t0), np.array([[q0, p0]], dtype=float), one(w0),
                             one(w1_0), one(w0), one(w1_0), one(np.nan), 0.0, 0.0)
    N = max(2, int(math.ceil(abs(t1 - t0) / h - 1e-9)))
    zg = np.linspace(z0, z1, N + 1)
    tg = smap.t_of(x, zg)
    tg[0], tg[-1] = t0, t1
    if t0 < 0:
        tg = -tg
    sys = t_flow(red, x)
    try:
        Y = integrate_grid(sys, [q0, p0], tg)
    except NonFiniteRhs as err:
        raise WindowContainsSingularity(str(err)) from None
    _, wf, w1f = smap.to_painleve(x, tg, Y[:, 0], Y[:, 1])
    W = _rk4_plain(_painleve_system_rhs(kind), zg, [w0, w1_0])
    dz = zg[1] - zg[0]
    res = np.full(len(zg), np.nan)
    w2 = (wf[2:] - 2 * wf[1:-1] + wf[:-2]) / dz**2
    res[1:-1] = painleve_residual(kind, zg[1:-1], wf[1:-1], w1f[1:-1], w2)
    dev = float(max(np.max(np.abs(wf - W[:, 0])), np.max(np.abs(w1f - W[:, 1]))))
    return ScalingReport(kind, zg, tg, Y, wf, w1f, W[:, 0], W[:, 1], res, dev,
                         float(np.nanmax(np.abs(res))))


def flow_commutation(red: Reduction, x0: float, t0: float, y0, deltas: Sequence[float],
                     substeps: int = 1, mutate: bool = False) -> Tuple[List[float], float]:
    """Commutator of the x- and t-flows over squares of side delta.

    Returns the errors |Phi_x Phi_t y - Phi_t Phi_x y| and their fitted
    order in delta.  ``mutate`` flips the sign of the t-flow vector field
    field-wise in q only, which breaks commutation (control experiment).
    """
    n = red.n
    Qt = red.Q_tilde
    Ht = -Qt
    syms = [qsym(i + 1) for i in range(n)] + [psym(i + 1) for i in range(n)]
    vt = hamilton_vector_field(Ht, n)
    vx = hamilton_vector_field(red.H, n)
    tf = [(-vt[s] if (mutate and s.kind == "q") else vt[s]) for s in syms]
    fx = [vx[s] for s in syms]
    errs = []
    for d in deltas:
        def adv(fields, indep, frozen, s0, y):
            sysm = OdeSystem(fields, syms, indep, frozen)
            grid = np.linspace(s0, s0 + d, substeps + 1)
            return integrate_grid(sysm, y, grid)[-1]

        a = adv(fx, "x", t0 + d, x0, adv(tf, "t", x0, t0, y0))
        b = adv(tf, "t", x0 + d, t0, adv(fx, "x", t0, x0, y0))
        errs.append(float(np.max(np.abs(a - b))))
    return errs, fitted_order(deltas, errs)


def energy_drift(red: Reduction, t_frozen: float, y0, x0: float, x1: float, h: float) -> float:
    """Max |H(y(x)) - H(y0)| along the x-flow (meaningful when H has no x)."""
    sys = x_flow(red, t_frozen)
    grid, Y = integrate(sys, y0, x0, x1, h)
    Hfn = compile_vector_field([red.H], sys.symbols, "x").rhs
    vals = np.empty(len(grid))
    buf = np.empty(1)
    for k in range(len(grid)):
        Hfn(float(grid[k]), Y[k], float(t_frozen), buf)
        vals[k] = buf[0]
    return float(np.max(np.abs(vals - vals[0])))


def rhs_agreement(sys: OdeSystem, rng: np.random.Generator, points: int = 100,
                  box: Tuple[float, float] = (0.5, 1.5)) -> float:
    """Max relative gap between the compiled rhs and exact symbolic evaluation.

    The frozen variable stays at ``sys.frozen``; the flow variable and the
    state are drawn uniformly from ``box``.  Points where a coefficient has
    a pole (or nearly so) are redrawn.
    """
    from .expr import PoleAtPoint, evaluate

    worst = 0.0
    done = 0
    tries = 0
    while done < points:
        tries += 1
        if tries > 50 * points:
            raise ValueError("could not find enough regular sample points")
        s, c = float(rng.uniform(*box)), float(sys.frozen)
        y = rng.uniform(*box, size=sys.dim)
        x, t = (s, c) if sys.independent == "x" else (c, s)
        if abs(x * x - t * t) < 1e-3:
            continue
        pt = {"x": float(x), "t": float(t)}
        pt.update({a: float(v) for a, v in zip(sys.symbols, y)})
        try:
            exact = np.array([float(evaluate(f, pt)) for f in sys.fields])
        except (PoleAtPoint, ZeroDivisionError):
            continue
        got = sys.rhs(s, y)
        gap = np.max(np.abs(got - exact) / np.maximum(1.0, np.abs(exact)))
        worst = max(worst, float(gap))
        done += 1
    return worst
