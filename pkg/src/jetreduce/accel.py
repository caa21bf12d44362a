"""Optional numba acceleration.

``JETREDUCE_NUMBA`` selects the kernels: ``1`` forces numba, ``0`` forces
the pure numpy/Python path, ``auto`` (default) uses numba only for runs long
enough to amortize the JIT cost.  Without numba the plain path is used.
"""
from __future__ import annotations

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

# RK4 steps below which compiling costs more than it saves
AUTO_MIN_STEPS = 200_000


def mode() -> str:
    v = os.environ.get("JETREDUCE_NUMBA", "auto").strip().lower()
    return {"1": "on", "on": "on", "true": "on", "0": "off", "off": "off", "false": "off"}.get(v, "auto")


def numba_available() -> bool:
    return _numba is not None


def numba_enabled() -> bool:
    """True when numba may be used at all."""
    return numba_available() and mode() != "off"


def use_numba(steps: int) -> bool:
    m = mode()
    if not numba_available() or m == "off":
        return False
    return m == "on" or steps >= AUTO_MIN_STEPS


def identity(f):
    return f


def njit(fn=None, *, cache=True, enabled=None):
    """numba.njit when enabled, otherwise the plain Python function."""

    def wrap(f):
        on = numba_enabled() if enabled is None else (enabled and numba_available())
        if not on:
            return f
        return _numba.njit(cache=cache)(f)

    return wrap if fn is None else wrap(fn)
