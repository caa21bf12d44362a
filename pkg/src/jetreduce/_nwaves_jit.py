"""numba versions of the n-waves RK4 loop; imported only when jitting."""
import numpy as np

from .accel import njit


@njit(enabled=True)
def rhs_loops(q, times, w, sign, eps, out):
    n = q.shape[0]
    u = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                d = times[j] - times[i]
                if abs(d) < eps:
                    return False
                u[i, j] = sign * q[i, j] / d * (w[i] - w[j])
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for l in range(n):
                acc += q[i, l] * u[l, j] - u[i, l] * q[l, j]
            out[i, j] = acc
    return True


@njit(enabled=True)
def advance_loops(q, times, w, delta, nsteps, sign, skew, eps):
    n = q.shape[0]
    q = q.copy()
    h = delta / nsteps
    k1 = np.empty((n, n))
    k2 = np.empty((n, n))
    k3 = np.empty((n, n))
    k4 = np.empty((n, n))
    for s in range(nsteps):
        t0 = times + (s * h) * w
        tm = t0 + (0.5 * h) * w
        t1 = t0 + h * w
        ok = rhs_loops(q, t0, w, sign, eps, k1)
        ok = ok and rhs_loops(q + (0.5 * h) * k1, tm, w, sign, eps, k2)
        ok = ok and rhs_loops(q + (0.5 * h) * k2, tm, w, sign, eps, k3)
        ok = ok and rhs_loops(q + h * k3, t1, w, sign, eps, k4)
        if not ok:
            return q, t0, s
        q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if skew:
            for i in range(n):
                q[i, i] = 0.0
                for j in range(i + 1, n):
                    q[j, i] = -q[i, j]
    return q, times + delta * w, -1
