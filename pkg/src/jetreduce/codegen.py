"""Turn chart-level expressions into fast numeric callables."""
from __future__ import annotations

import hashlib
import importlib.util
import math
import os
import sys
import tempfile
from fractions import Fraction
from typing import Dict, List, Sequence

from . import accel
from .expr import ChartSym, Expr, TrigSym
from .expr import coeff as C


def _num(c: Fraction) -> str:
    return repr(float(c))


def _poly_src(terms, xs: str, ts: str) -> str:
    parts = []
    for (i, j), c in terms:
        f = [_num(c)]
        f += [xs] * i
        f += [ts] * j
        parts.append("*".join(f))
    return "(" + " + ".join(parts) + ")" if parts else "0.0"


def _coeff_src(c, xs: str, ts: str) -> str:
    if C.is_const(c):
        return _num(c)
    num, den = C.numer_denom(c)
    n = _poly_src(num, xs, ts)
    if len(den) == 1 and den[0][0] == (0, 0):
        return f"({n} / {_num(den[0][1])})"
    return f"({n} / {_poly_src(den, xs, ts)})"


def expr_src(e: Expr, slots: Dict[ChartSym, str], xs: str = "x", ts: str = "t") -> str:
    """Python source for ``e`` with chart symbols read from ``slots``."""
    terms = []
    for m, c in e.sorted_terms():
        f = [_coeff_src(c, xs, ts)]
        for a, k in m:
            if isinstance(a, TrigSym):
                base = f"math.{a.func}({slots[a.arg]})"
            else:
                base = slots[a]
            f.extend([base] * k)
        terms.append("*".join(f))
    return " + ".join(terms) if terms else "0.0"


def vector_field_source(name: str, fields: Sequence[Expr], symbols: Sequence[ChartSym],
                        independent: str, frozen: str) -> str:
    """Source of ``name(s, y, c, out)``: s is the flow variable, c the frozen one."""
    slots = {sym: f"y[{i}]" for i, sym in enumerate(symbols)}
    xs, ts = ("s", "c") if independent == "x" else ("c", "s")
    # njit is injected by the loader
    lines = ["import math", "import numpy as np", "", "",
             "@njit", f"def {name}(s, y, c, out):"]
    for i, f in enumerate(fields):
        lines.append(f"    out[{i}] = {expr_src(f, slots, xs, ts)}")
    lines.append("    return out")
    return "\n".join(lines) + "\n" + _RK4_SRC


_RK4_SRC = """

@njit
def rk4_grid(grid, y0, c):
    n = grid.shape[0]
    d = y0.shape[0]
    Y = np.empty((n, d))
    y = y0.copy()
    Y[0, :] = y
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    for i in range(n - 1):
        s = grid[i]
        h = grid[i + 1] - s
        rhs(s, y, c, k1)
        rhs(s + 0.5 * h, y + 0.5 * h * k1, c, k2)
        rhs(s + 0.5 * h, y + 0.5 * h * k2, c, k3)
        rhs(s + h, y + h * k3, c, k4)
        for j in range(d):
            y[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not np.isfinite(y[j]):
                return Y, i
        Y[i + 1, :] = y
    return Y, -1
"""


def _cache_dir() -> str:
    d = os.environ.get("JETREDUCE_CACHE") or os.path.join(tempfile.gettempdir(), "jetreduce_codegen")
    os.makedirs(d, exist_ok=True)
    return d


def compile_vector_field(fields: Sequence[Expr], symbols: Sequence[ChartSym],
                         independent: str = "t", jit: bool = False):
    """Compile to a module exposing rhs(s, y, c, out) and rk4_grid(grid, y0, c).

    The source is written to a content-addressed file so numba can cache
    the compiled kernels between runs.  rk4_grid returns (states, bad) with
    bad the index of the first non-finite step or -1.
    """
    src = vector_field_source("rhs", fields, symbols, independent, "c")
    digest = hashlib.sha1(src.encode()).hexdigest()[:16]
    modname = f"_jr_rhs_{digest}"
    path = os.path.join(_cache_dir(), modname + ".py")
    if not os.path.exists(path):
        tmp = path + f".{os.getpid()}.tmp"
        with open(tmp, "w") as fh:
            fh.write(src)
        os.replace(tmp, path)
    # decorators run at import time, so each mode gets its own module object
    jit = jit and accel.numba_available()
    modname += "_nb" if jit else "_py"
    if modname in sys.modules:
        return sys.modules[modname]
    spec = importlib.util.spec_from_file_location(modname, path)
    mod = importlib.util.module_from_spec(spec)
    mod.njit = accel.njit(enabled=True) if jit else accel.identity
    spec.loader.exec_module(mod)
    sys.modules[modname] = mod
    return mod
