"""Pipeline orchestration and the report record."""
from __future__ import annotations

import json
import math
import os
from typing import Any, Dict, List, Optional

import numpy as np

from .. import nwaves as nw
from .. import painleve_numeric as pn
from ..checks import Check, zero_check
from ..expr import Expr, JetVar
from ..reduce_h import (
    ChartInconsistent,
    ChartSpec,
    DegenerateLagrangian,
    EvolutionPDE,
    LambdaMismatch,
    NonQuadraticTop,
    Reduction,
    certify_first_integral,
    reduce_scalar,
    verify_supplied,
    check_reduced_flows,
)
from ..reduce_l import (
    ChartChangeSingular,
    MixedRewrite,
    NonInvertibleTop,
    RegimeExceeded,
    reduce_lagrange,
    check_mixed_identities,
)
from ..variational import NonIntegrableRemainder, NotExact, differs_by_function_of_t, euler
from .problem import Problem

# errors a stage may raise; anything else is a bug and propagates
STAGE_ERRORS = (
    NotExact, NonIntegrableRemainder, DegenerateLagrangian, NonQuadraticTop, LambdaMismatch,
    ChartInconsistent, RegimeExceeded, NonInvertibleTop, ChartChangeSingular,
    pn.NonFiniteRhs, pn.WindowContainsSingularity, nw.CoincidentTimes, nw.InsufficientSamples,
    ZeroDivisionError,
)


class Report:
    """inputs, derived expressions, named checks and numeric summaries."""

    def __init__(self, inputs: Dict[str, Any]):
        self.inputs = inputs
        self.derived: Dict[str, Any] = {}
        self.checks: List[Check] = []
        self.numeric: List[Dict[str, Any]] = []

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks) -> None:
        for c in checks:
            self.add(c)

    def number(self, name: str, value: float, tolerance: float, relation: str = "<=") -> bool:
        value = float(value)
        ok = value <= tolerance if relation == "<=" else value >= tolerance
        # keep the JSON strict: non-finite values become strings
        shown = value if math.isfinite(value) else repr(value)
        self.numeric.append({"name": name, "value": shown, "tolerance": tolerance,
                             "relation": relation, "status": "pass" if ok else "fail"})
        return ok

    def stage_failed(self, stage: str, err: Exception) -> None:
        self.add(Check(f"stage_{stage}", False, f"{type(err).__name__}: {err}"))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks) and all(n["status"] == "pass" for n in self.numeric)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inputs": self.inputs,
            "derived": self.derived,
            "checks": [c.as_dict() for c in self.checks],
            "numeric": self.numeric,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary_lines(self) -> List[str]:
        out = [f"{c.status:4s}  {c.name}" + (f"  [{c.witness}]" if not c.ok and c.witness else "")
               for c in self.checks]
        for n in self.numeric:
            v = n["value"]
            v = f"{v:.3e}" if isinstance(v, float) else v
            out.append(f"{n['status']:4s}  {n['name']} = {v} ({n['relation']} {n['tolerance']:g})")
        return out


# expectations -------------------------------------------------------------------

def _expect_exact(pb: Problem, rep: Report, key: str, got: Expr, text: str) -> None:
    rep.add(zero_check(f"expect_{key}", got - pb.parse(text, f"expect.{key}")))


def _expect_mod_t(pb: Problem, rep: Report, key: str, got: Expr, text: str) -> None:
    want = pb.parse(text, f"expect.{key}")
    ok = differs_by_function_of_t(got, want)
    rep.add(Check(f"expect_{key}", ok, None if ok else str(got - want)))


def _expect_list(pb, rep, key, got: List[Expr], texts: List[str]) -> None:
    if len(got) != len(texts):
        rep.add(Check(f"expect_{key}", False, f"expected {len(texts)} entries, got {len(got)}"))
        return
    for i, (g, t) in enumerate(zip(got, texts)):
        _expect_exact(pb, rep, f"{key}[{i}]", g, t)


MOD_T_KEYS = ("Lambda", "Q_tilde", "hatL", "hatLambda", "Q_hat")


def apply_expectations(pb: Problem, rep: Report, values: Dict[str, Any]) -> None:
    """Compare every ``expect`` entry whose value has been produced."""
    for key, want in pb.expect.items():
        if key not in values:
            continue
        got = values[key]
        if isinstance(want, dict):
            for sub, text in want.items():
                if sub not in got:
                    rep.add(Check(f"expect_{key}.{sub}", False, "not produced"))
                else:
                    _expect_exact(pb, rep, f"{key}.{sub}", got[sub], text)
        elif isinstance(want, list):
            _expect_list(pb, rep, key, got, want)
        elif key in MOD_T_KEYS:
            _expect_mod_t(pb, rep, key, got, want)
        else:
            _expect_exact(pb, rep, key, got, want)


# stages -------------------------------------------------------------------------

def _pde(pb: Problem) -> EvolutionPDE:
    return EvolutionPDE(dict(pb.pde))


def hamiltonian_stage(pb: Problem, rep: Report, mode: str) -> Optional[Reduction]:
    pde = _pde(pb)
    values: Dict[str, Any] = {"euler": {f: euler(pb.L, f) for f in pb.fields}}
    rep.derived["euler"] = {f: str(e) for f, e in values["euler"].items()}
    try:
        if mode == "verify":
            ch = pb.chart
            chart = ChartSpec(ch["q"], ch["p"], ch["inverse"])
            red = verify_supplied(pb.L, pde, chart, pb.Lambda)
            rep.add(Check("lambda_supplied_consistent", True))
        else:
            cert = certify_first_integral(pb.L, pde)
            if not cert.ok:
                # check_reduced_flows reports the passing case
                rep.add(Check("first_integral", False, _witness_text(cert.witness)))
                return None
            red = reduce_scalar(pb.L, pde)
    except LambdaMismatch as err:
        rep.add(Check("lambda_supplied_consistent", False, str(err.witness)))
        return None
    except STAGE_ERRORS as err:
        rep.stage_failed("hamiltonian", err)
        return None
    values.update({
        "chart_q": list(red.chart.q_defs), "chart_p": list(red.chart.p_defs),
        "H": red.H, "Lambda": red.Lambda, "Q_tilde": red.Q_tilde,
        "hamilton_x": {k.name(): v for k, v in red.hamilton_x.items()},
        "hamilton_t": {k.name(): v for k, v in red.hamilton_t.items()},
    })
    for key in ("chart_q", "chart_p"):
        rep.derived[key] = [str(e) for e in values[key]]
    for key in ("H", "Lambda", "Q_tilde"):
        rep.derived[key] = str(values[key])
    for key in ("hamilton_x", "hamilton_t"):
        rep.derived[key] = {k: str(v) for k, v in values[key].items()}
    rep.extend(check_reduced_flows(red))
    apply_expectations(pb, rep, values)
    return red


def _witness_text(w: Dict[str, Expr]) -> str:
    return "; ".join(f"E_{f} = {v}" for f, v in sorted(w.items()))


def _mixed_rewrite(pb: Problem, red: Reduction) -> MixedRewrite:
    lg = pb.lagrange or {}
    if "top" in lg:
        return MixedRewrite(lg.get("field", pb.fields[0]), int(lg["order"]), lg["top"],
                            int(lg.get("alpha", 1)), lg.get("eliminate") or None)
    return MixedRewrite.from_pde(red.pde, red.n)


def lagrange_stage(pb: Problem, rep: Report, red: Reduction) -> None:
    try:
        mr = _mixed_rewrite(pb, red)
        res = reduce_lagrange(red, mr)
    except STAGE_ERRORS as err:
        rep.stage_failed("lagrange", err)
        return
    values = {
        "hatL": res.hatL, "hatLambda": res.hatLambda, "el_t": list(res.el),
        "tchart_q": list(res.tchart.q_defs), "tchart_p": list(res.tchart.p_defs), "Q_hat": res.Q_hat,
    }
    rep.derived["alpha"] = mr.alpha
    for key in ("hatL", "hatLambda", "Q_hat"):
        rep.derived[key] = str(values[key])
    for key in ("el_t", "tchart_q", "tchart_p"):
        rep.derived[key] = [str(e) for e in values[key]]
    rep.extend(res.checks)
    if not (pb.lagrange and "top" in pb.lagrange):
        try:
            rep.extend(check_mixed_identities(red.L, red, mr, res.hatL, res.hatLambda))
        except STAGE_ERRORS as err:
            rep.stage_failed("mixed_identities", err)
    apply_expectations(pb, rep, values)


def numeric_stage(pb: Problem, rep: Report, red: Reduction, seed: int, h: Optional[float],
                  csv_dir: Optional[str]) -> None:
    num = pb.numeric
    rng = np.random.default_rng(seed)
    frozen = float(num.get("rhs_check", {}).get("frozen", 0.7))
    gap = max(pn.rhs_agreement(pn.t_flow(red, frozen), rng), pn.rhs_agreement(pn.x_flow(red, frozen), rng))
    rep.number("rhs_matches_symbolic", gap, 1e-12)

    if "scaling" in num:
        sc = num["scaling"]
        kind = (pb.scaling or {}).get("kind") or sc.get("kind")
        try:
            r = pn.scaling_consistency(red, kind, float(sc["x"]), float(sc["t0"]), float(sc["t1"]),
                                       float(h or sc.get("h", 1e-4)), float(sc["w0"]), float(sc["w1"]))
        except STAGE_ERRORS as err:
            rep.stage_failed("scaling", err)
        else:
            rep.number(f"scaling_deviation_P{kind}", r.deviation, float(sc.get("tol", 1e-6)))
            rep.number(f"painleve_residual_P{kind}", r.max_residual, float(sc.get("residual_tol", 1e-5)))
            if csv_dir:
                pn.write_trajectory_csv(os.path.join(csv_dir, f"{pb.name}_scaling.csv"), r.t, r.flow, red.n,
                                        {"w": r.w_flow, "z": r.z, "residual": r.residual})
    if "commutation" in num:
        cm = num["commutation"]
        deltas = [float(d) for d in cm.get("deltas", [1e-2, 5e-3, 2.5e-3])]
        try:
            errs, order = pn.flow_commutation(red, float(cm["x0"]), float(cm["t0"]),
                                              [float(v) for v in cm["y0"]], deltas)
        except STAGE_ERRORS as err:
            rep.stage_failed("commutation", err)
        else:
            rep.number("flow_commutation_order", order, float(cm.get("min_order", 2.9)), ">=")
    if "energy" in num:
        en = num["energy"]
        drift = pn.energy_drift(red, float(en.get("t", 0.0)), [float(v) for v in en["y0"]],
                                float(en.get("x0", 0.0)), float(en.get("x1", 1.0)), float(h or en.get("h", 1e-3)))
        rep.number("energy_drift", drift, float(en.get("tol", 1e-9)))
    if csv_dir and "trajectory" in num:
        tr = num["trajectory"]
        flow = pn.t_flow(red, float(tr["x"])) if tr.get("flow", "t") == "t" else pn.x_flow(red, float(tr["t"]))
        s, Y = pn.integrate(flow, [float(v) for v in tr["y0"]], float(tr["s0"]), float(tr["s1"]),
                            float(h or tr.get("h", 1e-3)))
        pn.write_trajectory_csv(os.path.join(csv_dir, f"{pb.name}_trajectory.csv"), s, Y, red.n)


def nwaves_stage(pb: Problem, rep: Report, seed: int, h: Optional[float], csv_dir: Optional[str]) -> None:
    cfg = pb.nwaves
    rng = np.random.default_rng(seed)
    n = int(cfg.get("n", 3))
    h = float(h or cfg.get("h", 1e-3))
    duration = float(cfg.get("duration", 1.0))
    deltas = [float(d) for d in cfg.get("deltas", [1e-2, 5e-3, 2.5e-3])]
    try:
        s = nw.LaxState.random(n, rng, tuple(cfg.get("t_range", (0.0, 3.0))), float(cfg.get("min_sep", 0.5)))
    except STAGE_ERRORS as err:
        rep.stage_failed("nwaves", err)
        return
    rep.derived["times"] = [float(v) for v in s.times]
    rep.derived["q0"] = [[float(v) for v in row] for row in s.q]
    rep.derived["H"] = [nw.hamiltonian_k(s, k) for k in range(n)]
    ident = max(abs(nw.hamiltonian_from_trace(s, k) - nw.hamiltonian_k(s, k)) for k in range(n))
    rep.number("trace_identity_H_k", ident, 1e-12)
    resid = max(abs(nw.residue_hamiltonian(s, k) + 2 * nw.hamiltonian_k(s, k)) for k in range(n))
    rep.number("residue_form_is_minus_2H", resid, 1e-12)
    try:
        drift = 0.0
        skew_ok = True
        for k in range(n):
            end = nw.flow_for(s, k, duration, h)
            skew_ok &= bool(np.array_equal(end.q, -end.q.T))
            drift = max(drift, abs(nw.trace_power(end.q, 2) - nw.trace_power(s.q, 2)) / duration)
        rep.add(Check("skew_symmetry_exact", skew_ok))
        rep.number("tr_q2_drift_per_unit", drift, 1e-10)
        worst, mut, gap = np.inf, -np.inf, 0.0
        for i in range(n):
            for j in range(i + 1, n):
                r = nw.commutation_test(s, i, j, deltas)
                worst = min(worst, r.order)
                gap = max(gap, max(r.errors))
                mut = max(mut, nw.commutation_test(s, i, j, deltas, mutate=True).order)
        # inf means the commutator never rose above roundoff
        rep.number("commutation_order_min", worst, float(cfg.get("min_order", 2.9)), ">=")
        rep.number("commutator_max_error", gap, float(cfg.get("commutator_tol", 1e-8)))
        rep.number("mutation_order_max", mut, float(cfg.get("mutation_max", 2.3)))
    except STAGE_ERRORS as err:
        rep.stage_failed("nwaves", err)
        return
    if csv_dir:
        lo, hi = nw.clear_window(s, 0)
        span = min(duration, hi - s.times[0]) if hi > s.times[0] else -min(duration, s.times[0] - lo)
        states = nw.trajectory(s, 0, span, h, samples=int(cfg.get("samples", 10)))
        nw.write_csv(os.path.join(csv_dir, f"{pb.name}_nwaves.csv"), states)


# entry ------------------------------------------------------------------------

STAGES = {
    "reduce": ("hamiltonian",),
    "verify": ("hamiltonian",),
    "lagrange": ("hamiltonian", "lagrange"),
    "integrate": ("hamiltonian", "numeric"),
    "nwaves": ("nwaves",),
    "full": ("hamiltonian", "lagrange", "numeric", "nwaves"),
}


def run(pb: Problem, command: str = "full", seed: int = 0, h: Optional[float] = None,
        csv_dir: Optional[str] = None) -> Report:
    """Run the stages of ``command`` on a loaded problem."""
    rep = Report({"name": pb.name, "mode": pb.mode, "command": command, "seed": seed, "h": h,
                  "problem": pb.raw})
    stages = STAGES[command]
    if csv_dir:
        os.makedirs(csv_dir, exist_ok=True)
    if pb.mode == "nwaves":
        if "nwaves" in stages:
            nwaves_stage(pb, rep, seed, h, csv_dir)
        else:
            rep.add(Check("stage_select", False, f"command {command!r} does not apply to an nwaves problem"))
        return rep
    if command == "nwaves":
        rep.add(Check("stage_select", False, "problem has no [nwaves] section"))
        return rep
    mode = "verify" if (command == "verify" or pb.mode == "verify") else "derive"
    if command == "verify" and pb.Lambda is None:
        rep.add(Check("stage_select", False, "verify needs chart.lambda"))
        return rep
    red = hamiltonian_stage(pb, rep, mode)
    if red is None:
        return rep
    if "lagrange" in stages and (command == "lagrange" or pb.mode == "lagrange" or pb.lagrange):
        lagrange_stage(pb, rep, red)
    if "numeric" in stages and pb.numeric:
        numeric_stage(pb, rep, red, seed, h, csv_dir)
    return rep
