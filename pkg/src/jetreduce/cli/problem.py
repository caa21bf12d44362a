"""Problem files: a TOML document describing one reduction run."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from ..expr import Expr, JetVar
from .parser import ExprSyntaxError, parse_expr

MODES = ("derive", "verify", "lagrange", "nwaves")
BUNDLED_DIR = os.path.join(os.path.dirname(__file__), "problems")
BUNDLED = ("pi", "pii", "sg", "kdv-t7", "nwaves3")


class ProblemError(ValueError):
    """The problem file is malformed or misses a section its mode needs."""


@dataclass
class Problem:
    name: str
    mode: str
    fields: List[str]
    raw: Dict[str, Any]
    pde: Dict[str, Expr] = field(default_factory=dict)
    L: Optional[Expr] = None
    chart: Optional[dict] = None
    Lambda: Optional[Expr] = None
    lagrange: Optional[dict] = None
    scaling: Optional[dict] = None
    numeric: Dict[str, dict] = field(default_factory=dict)
    expect: Dict[str, Any] = field(default_factory=dict)
    nwaves: Optional[dict] = None
    source: str = "<string>"

    def parse(self, text: str, where: str) -> Expr:
        try:
            return parse_expr(text, tuple(self.fields))
        except ExprSyntaxError as err:
            raise ProblemError(f"{self.source}: {where}: {err}") from None
        except NameError as err:
            raise ProblemError(f"{self.source}: {where}: {err}") from None


def _jet_key(name: str, fields) -> JetVar:
    e = parse_expr(name, tuple(fields))
    atoms = list(e.atoms())
    if len(atoms) != 1 or not isinstance(atoms[0], JetVar) or e != Expr.atom(atoms[0]):
        raise ProblemError(f"inverse key {name!r} is not a single jet variable")
    return atoms[0]


def load_problem(path: str) -> Problem:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return problem_from_dict(raw, source=path)


def load_bundled(name: str) -> Problem:
    return load_problem(os.path.join(BUNDLED_DIR, f"{name}.toml"))


def problem_from_dict(raw: Dict[str, Any], source: str = "<string>") -> Problem:
    mode = raw.get("mode", "derive")
    if mode not in MODES:
        raise ProblemError(f"{source}: unknown mode {mode!r}")
    fields = list(raw.get("fields", ["u"]))
    pb = Problem(raw.get("name", os.path.splitext(os.path.basename(source))[0]), mode, fields, raw,
                 source=source)
    pb.numeric = dict(raw.get("numeric", {}))
    pb.scaling = raw.get("scaling")
    pb.expect = dict(raw.get("expect", {}))
    if mode == "nwaves":
        if "nwaves" not in raw:
            raise ProblemError(f"{source}: mode nwaves needs an [nwaves] section")
        pb.nwaves = dict(raw["nwaves"])
        return pb

    if "pde" not in raw:
        raise ProblemError(f"{source}: missing [pde] section")
    for f, rhs in raw["pde"].items():
        if f not in fields:
            raise ProblemError(f"{source}: pde for undeclared field {f!r}")
        pb.pde[f] = pb.parse(rhs, f"pde.{f}")
    if "symmetry" not in raw or "L" not in raw["symmetry"]:
        raise ProblemError(f"{source}: missing symmetry.L")
    pb.L = pb.parse(raw["symmetry"]["L"], "symmetry.L")

    if "chart" in raw:
        ch = raw["chart"]
        pb.chart = {
            "q": [pb.parse(s, "chart.q") for s in ch.get("q", [])],
            "p": [pb.parse(s, "chart.p") for s in ch.get("p", [])],
            "inverse": {_jet_key(k, fields): pb.parse(v, f"chart.inverse.{k}")
                        for k, v in ch.get("inverse", {}).items()},
        }
        if "lambda" in ch:
            pb.Lambda = pb.parse(ch["lambda"], "chart.lambda")
    if mode == "verify" and (pb.chart is None or pb.Lambda is None):
        raise ProblemError(f"{source}: mode verify needs chart.q, chart.p, chart.inverse and chart.lambda")

    if "lagrange" in raw:
        lg = dict(raw["lagrange"])
        if "top" in lg:
            lg["top"] = pb.parse(lg["top"], "lagrange.top")
        lg["eliminate"] = {k: pb.parse(v, f"lagrange.eliminate.{k}")
                           for k, v in lg.get("eliminate", {}).items()}
        pb.lagrange = lg
    return pb
