"""Commuting isomonodromic Lax flows on so(n).

A state is a matrix q together with distinct times t_1..t_n.  The flow in
t_k is dq/dt_k = [q, u_k] with (u_k)_ij = gamma_ij (delta_ik - delta_jk) and
gamma_ij = q_ij / (t_j - t_i).  Indices k are 0-based in this module; CSV
columns use 1-based labels.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import accel
from .painleve_numeric import fitted_order


class CoincidentTimes(ValueError):
    """Two times are closer than the separation guard."""


class InsufficientSamples(ValueError):
    """An order fit needs at least two step sizes."""


class NotSkew(ValueError):
    pass


def _mirror(q: np.ndarray) -> np.ndarray:
    up = np.triu(q, 1)
    return up - up.T


@dataclass(frozen=True)
class LaxState:
    q: np.ndarray
    times: np.ndarray
    skew: bool = True
    eps_sep: float = 1e-8

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        times = np.array(self.times, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] != times.shape[0]:
            raise ValueError("q must be n x n with n times")
        if self.skew:
            if not np.allclose(q, -q.T, atol=0.0, rtol=1e-14):
                raise NotSkew("q is not skew-symmetric")
            q = _mirror(q)
        q.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "times", times)
        check_separation(self.times, self.eps_sep)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def with_q(self, q, times=None) -> "LaxState":
        return replace(self, q=q, times=self.times if times is None else times)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, t_range=(0.0, 3.0), min_sep=0.5,
               scale=1.0) -> "LaxState":
        """Random skew q with times drawn from t_range, pairwise at least min_sep apart.

        Entries above the diagonal are independent N(0, scale^2).
        """
        for _ in range(10_000):
            t = np.sort(rng.uniform(*t_range, size=n))
            if np.min(np.diff(t)) >= min_sep:
                break
        else:  # pragma: no cover
            raise ValueError("could not place times with the requested separation")
        up = np.triu(rng.normal(scale=scale, size=(n, n)), 1)
        return cls(up - up.T, rng.permutation(t))


def check_separation(times, eps: float) -> None:
    t = np.asarray(times, dtype=float)
    d = np.abs(t[:, None] - t[None, :])
    np.fill_diagonal(d, np.inf)
    if d.size and np.min(d) < eps:
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise CoincidentTimes(f"t_{i + 1} and t_{j + 1} are within {eps:g}")


def _gamma(q, times):
    dt = times[None, :] - times[:, None]
    np.fill_diagonal(dt, 1.0)
    g = q / dt
    np.fill_diagonal(g, 0.0)
    return g


def gamma_from_q(s: LaxState) -> np.ndarray:
    """gamma_ij = q_ij / (t_j - t_i), zero diagonal."""
    return _gamma(s.q, s.times)


def _weighted_u(q, times, w, sign=1.0):
    # sum_k w_k u_k has entries gamma_ij (w_i - w_j)
    return sign * _gamma(q, times) * (w[:, None] - w[None, :])


def u_k(s: LaxState, k: int) -> np.ndarray:
    w = np.zeros(s.n)
    w[k] = 1.0
    return _weighted_u(s.q, s.times, w)


def hamiltonian_k(s: LaxState, k: int) -> float:
    """1/2 sum_{j != k} q_jk q_kj / (t_k - t_j)."""
    t, q = s.times, s.q
    return 0.5 * sum(q[j, k] * q[k, j] / (t[k] - t[j]) for j in range(s.n) if j != k)


def half_trace_q_uk(s: LaxState, k: int) -> float:
    """1/2 Tr(q u_k); equals -2 H_k."""
    return 0.5 * float(np.trace(s.q @ u_k(s, k)))


def hamiltonian_from_trace(s: LaxState, k: int) -> float:
    """H_k through the trace: -1/4 Tr(q u_k)."""
    return -0.25 * float(np.trace(s.q @ u_k(s, k)))


def residue_hamiltonian(s: LaxState, i: int) -> float:
    """sum_j (t_i - t_j) gamma_ij gamma_ji, which evaluates to -2 H_i."""
    g = gamma_from_q(s)
    t = s.times
    return float(sum((t[i] - t[j]) * g[i, j] * g[j, i] for j in range(s.n)))


def hamiltonian_gradient(s: LaxState, k: int) -> np.ndarray:
    """u_k as the gradient of H_k for the pairing <A, B> = -1/2 Tr(AB) on so(n)."""
    return u_k(s, k)


def flow_rhs(s: LaxState, k: int) -> np.ndarray:
    """[q, u_k]."""
    u = u_k(s, k)
    return s.q @ u - u @ s.q


def trace_power(q, m: int) -> float:
    return float(np.trace(np.linalg.matrix_power(q, m)))


# kernels -------------------------------------------------------------------

def _advance_np(q, times, w, delta, nsteps, sign, skew, eps):
    """RK4 for dq/ds = [q, sum_k w_k u_k] with times advancing as t + s w."""
    q = q.copy()
    h = delta / nsteps
    n = q.shape[0]
    off = ~np.eye(n, dtype=bool)

    def rhs(qq, tt):
        u = _weighted_u(qq, tt, w, sign)
        return qq @ u - u @ qq

    for i in range(nsteps):
        t0 = times + (i * h) * w
        # times move linearly, so a collision shows up at an endpoint or as a sign change
        d0 = (t0[:, None] - t0[None, :])[off]
        d1 = d0 + h * (w[:, None] - w[None, :])[off]
        if n > 1 and (np.min(np.abs(d0)) < eps or np.min(np.abs(d1)) < eps or np.any(d0 * d1 < 0)):
            return q, t0, i
        k1 = rhs(q, t0)
        k2 = rhs(q + 0.5 * h * k1, t0 + 0.5 * h * w)
        k3 = rhs(q + 0.5 * h * k2, t0 + 0.5 * h * w)
        k4 = rhs(q + h * k3, t0 + h * w)
        q = q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if skew:
            q = _mirror(q)
    return q, times + delta * w, -1


def _kernel(nsteps: int):
    if not accel.use_numba(nsteps):
        return _advance_np
    from . import _nwaves_jit

    return _nwaves_jit.advance_loops


def advance_weighted(s: LaxState, w, delta: float, h: Optional[float] = None,
                     mutate: bool = False) -> LaxState:
    """Flow along the direction w in time space by parameter delta.

    Times move as t + delta*w.  With ``mutate`` the sign of gamma is flipped
    (control experiment).
    """
    w = np.asarray(w, dtype=float)
    if delta == 0:
        return s
    nsteps = 1 if h is None else max(1, int(math.ceil(abs(delta) / h - 1e-9)))
    q, times, bad = _kernel(nsteps)(np.array(s.q), np.array(s.times), w, float(delta), nsteps,
                                    -1.0 if mutate else 1.0, s.skew, s.eps_sep)
    if bad >= 0:
        raise CoincidentTimes(f"times collide during step {bad}")
    return replace(s, q=q, times=times)


def advance(s: LaxState, k: int, delta: float, h: Optional[float] = None,
            mutate: bool = False) -> LaxState:
    """RK4 in t_k from t_k to t_k + delta; other times fixed."""
    w = np.zeros(s.n)
    w[k] = 1.0
    return advance_weighted(s, w, delta, h, mutate)


def trajectory(s: LaxState, k: int, delta: float, h: float, samples: int = 10) -> List[LaxState]:
    out = [s]
    for _ in range(samples):
        s = advance(s, k, delta / samples, h)
        out.append(s)
    return out


@dataclass
class CommutationResult:
    order: float
    deltas: List[float]
    errors: List[float]


def commutation_test(s: LaxState, i: int, j: int, deltas: Sequence[float],
                     h: Optional[float] = None, mutate: bool = False) -> CommutationResult:
    """Fit the decay order of |Phi_i Phi_j q - Phi_j Phi_i q| over delta.

    ``mutate`` flips the sign of gamma in the t_i flow only.  Flipping it in
    every flow is harmless (q -> -q maps one system to the other), so the
    control has to break the pair asymmetrically.
    """
    if i == j:
        raise ValueError("need two different flows")
    if len(deltas) < 2:
        raise InsufficientSamples("at least two step sizes are needed")
    errs = []
    for d in deltas:
        a = advance(advance(s, j, d, h), i, d, h, mutate)
        b = advance(advance(s, i, d, h, mutate), j, d, h)
        errs.append(float(np.max(np.abs(a.q - b.q))))
    return CommutationResult(fitted_order(deltas, errs), list(deltas), errs)


def clear_window(s: LaxState, k: int, margin: float = 0.5):
    """Interval around t_k that stays ``margin`` away from every other time."""
    others = np.delete(s.times, k)
    tk = s.times[k]
    above = others[others > tk]
    below = others[others < tk]
    hi = (np.min(above) - margin) if above.size else np.inf
    lo = (np.max(below) + margin) if below.size else -np.inf
    return lo, hi


def flow_for(s: LaxState, k: int, duration: float, h: float, margin: float = 0.5) -> LaxState:
    """Accumulate ``duration`` of t_k flow time without approaching other times.

    t_k sweeps back and forth across its clear window (limited to
    +-duration) so the flow time counts every leg, not just the net shift.
    """
    lo, hi = clear_window(s, k, margin)
    tk = s.times[k]
    lo, hi = max(lo, tk - duration), min(hi, tk + duration)
    if not (lo < tk or hi > tk) or hi - lo < 1e-6:
        raise CoincidentTimes(f"t_{k + 1} has no room to move")
    lo, hi = min(lo, tk), max(hi, tk)
    left = duration
    target = hi if hi > tk else lo
    while left > 1e-15:
        leg = target - s.times[k]
        step = math.copysign(min(abs(leg), left), leg)
        s = advance(s, k, step, h)
        left -= abs(step)
        target = lo if target == hi else hi
    return s


def invariant_drift(s: LaxState, k: int, duration: float, h: float, powers=(2, 3, 4)) -> dict:
    """Drift of Tr(q^m) per unit flow time along the t_k flow.

    Measured relative to max(1, |Tr(q^m)|) so that higher powers of a large
    q are judged on the same footing as Tr(q^2).
    """
    end = flow_for(s, k, duration, h)
    out = {}
    for m in powers:
        ref = trace_power(s.q, m)
        out[m] = abs(trace_power(end.q, m) - ref) / max(1.0, abs(ref)) / abs(duration)
    return out


# two-time frame ---------------------------------------------------------------

@dataclass
class TwoTimeFrame:
    """Times t_i = a_i x + b_i t driven by two parameters (x, t)."""

    a: np.ndarray
    b: np.ndarray
    x: float
    t: float
    eps_sep: float = 1e-8

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        check_separation(self.times, self.eps_sep)

    @property
    def times(self) -> np.ndarray:
        return self.a * self.x + self.b * self.t

    def state(self, q) -> LaxState:
        return LaxState(q, self.times, eps_sep=self.eps_sep)

    def gamma(self, q) -> np.ndarray:
        return _gamma(np.asarray(q, dtype=float), self.times)

    def uv(self, q):
        """u = [gamma, a], v = [gamma, b]; q = x u + t v."""
        g = self.gamma(q)
        u = g * (self.a[None, :] - self.a[:, None])
        v = g * (self.b[None, :] - self.b[:, None])
        return u, v

    def Q_t(self, q) -> float:
        """1/2 Tr(x u v + t v^2)."""
        u, v = self.uv(q)
        return 0.5 * float(np.trace(self.x * u @ v + self.t * v @ v))

    def Q_x(self, q) -> float:
        """1/2 Tr(t u v + x u^2)."""
        u, v = self.uv(q)
        return 0.5 * float(np.trace(self.t * u @ v + self.x * u @ u))

    def half_trace_qv(self, q) -> float:
        return 0.5 * float(np.trace(np.asarray(q) @ self.uv(q)[1]))

    def half_trace_qu(self, q) -> float:
        return 0.5 * float(np.trace(np.asarray(q) @ self.uv(q)[0]))

    def Q_t_components(self, q) -> float:
        a, b, g = self.a, self.b, self.gamma(q)
        da = a[None, :] - a[:, None]
        db = b[None, :] - b[:, None]
        return 0.5 * float(np.sum((-da * db * self.x - db**2 * self.t) * g * g.T))

    def Q_x_components(self, q) -> float:
        a, b, g = self.a, self.b, self.gamma(q)
        da = a[None, :] - a[:, None]
        db = b[None, :] - b[:, None]
        return 0.5 * float(np.sum((-da * db * self.t - da**2 * self.x) * g * g.T))

    def advance_x(self, q, delta: float, h: Optional[float] = None):
        """Move x by delta; the t_k flows compose with weights a_k."""
        s = advance_weighted(self.state(q), self.a, delta, h)
        return s.q, replace(self, x=self.x + delta)

    def advance_t(self, q, delta: float, h: Optional[float] = None):
        s = advance_weighted(self.state(q), self.b, delta, h)
        return s.q, replace(self, t=self.t + delta)


# output ----------------------------------------------------------------------

def csv_header(n: int) -> List[str]:
    cols = [f"t_{i + 1}" for i in range(n)]
    cols += [f"q_{i + 1}{j + 1}" for i in range(n) for j in range(i + 1, n)]
    cols += [f"H_{k + 1}" for k in range(n)]
    return cols + ["tr_q2"]


def csv_row(s: LaxState) -> List[float]:
    n = s.n
    row = list(s.times)
    row += [s.q[i, j] for i in range(n) for j in range(i + 1, n)]
    row += [hamiltonian_k(s, k) for k in range(n)]
    return row + [trace_power(s.q, 2)]


def write_csv(path: str, states: Sequence[LaxState]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(csv_header(states[0].n))
        for s in states:
            wr.writerow([f"{float(v):.17g}" for v in csv_row(s)])
