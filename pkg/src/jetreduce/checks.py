"""Named pass/fail records shared by the reduction pipelines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from .expr import Expr


@dataclass
class Check:
    name: str
    ok: bool
    witness: Optional[str] = None

    @property
    def status(self) -> str:
        return "pass" if self.ok else "fail"

    def as_dict(self) -> dict:
        d = {"name": self.name, "status": self.status}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def zero_check(name: str, diff: Expr) -> Check:
    """Pass when ``diff`` is identically zero; otherwise keep it as witness."""
    diff = Expr.lift(diff)
    return Check(name, diff.is_zero(), None if diff.is_zero() else str(diff))


@dataclass
class CheckList:
    checks: List[Check] = field(default_factory=list)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def __iter__(self):
        return iter(self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> List[Check]:
        return [c for c in self.checks if not c.ok]
