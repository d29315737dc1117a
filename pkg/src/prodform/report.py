"""Run reports: per-check residual tables and verdicts, serialised as JSON."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from .errors import ContractViolation, ParseError
from .extrinsic import ResidualStats

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_INPUT = 2
EXIT_INCONSISTENT = 3


def plain(v: Any) -> Any:
    """Recursively convert to JSON-native values; non-finite floats become strings."""
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, np.ndarray):
        return [plain(t) for t in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [plain(t) for t in v]
    if isinstance(v, dict):
        return {str(k): plain(t) for k, t in v.items()}
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def residual_row(stats: ResidualStats, tolerance: Optional[float]) -> dict:
    row = stats.to_dict()
    row["tolerance"] = tolerance
    row["passed"] = None if tolerance is None else bool(stats.max < tolerance)
    return plain(row)


def residual_table(values: dict[str, Sequence[float]], points, tolerances: dict[str, Optional[float]]) -> dict:
    return {k: residual_row(ResidualStats.from_values(v, points), tolerances.get(k)) for k, v in values.items()}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residuals: dict = field(default_factory=dict)
    verdict: Optional[dict] = None
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "residuals", plain(self.residuals))
        object.__setattr__(self, "verdict", plain(self.verdict))
        object.__setattr__(self, "notes", tuple(str(n) for n in self.notes))

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "residuals": plain(self.residuals),
                "verdict": plain(self.verdict), "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(d["name"], bool(d["passed"]), d.get("residuals", {}), d.get("verdict"), tuple(d.get("notes", ())))


@dataclass(frozen=True)
class Report:
    scenario: dict
    checks: tuple[CheckResult, ...]
    engine: dict
    fd: dict
    timing: dict = field(default_factory=dict, compare=False)
    error: Optional[dict] = None

    def __post_init__(self) -> None:
        for k in ("scenario", "engine", "fd", "timing", "error"):
            object.__setattr__(self, k, plain(getattr(self, k)))
        object.__setattr__(self, "checks", tuple(self.checks))
        names = [c.name for c in self.checks]
        if len(set(names)) != len(names):
            raise ContractViolation(f"checks reported more than once: {names}")
        if self.error is None and sorted(names) != sorted(self.scenario.get("checks", names)):
            raise ContractViolation("every requested check must appear exactly once in the report")

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return int(self.error["exit_code"])
        return EXIT_PASS if self.passed else EXIT_TOLERANCE

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self, timing: bool = True) -> dict:
        out = {"scenario": plain(self.scenario), "checks": [c.to_dict() for c in self.checks],
               "engine": plain(self.engine), "fd": plain(self.fd), "error": plain(self.error),
               "status": "pass" if self.passed else "fail", "exit_code": self.exit_code}
        if timing:
            out["timing"] = plain(self.timing)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(d["scenario"], tuple(CheckResult.from_dict(c) for c in d["checks"]), d["engine"], d["fd"],
                   d.get("timing", {}), d.get("error"))

    def summary(self) -> str:
        lines = [f"scenario {self.scenario.get('name', '?')}: {'PASS' if self.passed else 'FAIL'}"
                 f" (exit {self.exit_code})"]
        if self.error is not None:
            lines.append(f"  error [{self.error['kind']}]: {self.error['message']}")
        for c in self.checks:
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}")
            for k, row in c.residuals.items():
                tol = row.get("tolerance")
                flag = "" if row.get("passed") in (None, True) else "  <-- exceeds tolerance"
                tol_s = "" if tol is None else f" / tol {tol:.1e}"
                lines.append(f"      {k:<24} max {row['max']:.3e}  rms {row['rms']:.3e}{tol_s}{flag}")
            if c.verdict and "label" in c.verdict:
                lines.append(f"      verdict: {c.verdict['label']}")
            for k, mg in ((c.verdict or {}).get("margins") or {}).items():
                lines.append(f"      {k:<24} {mg['value']:.3e} vs threshold {mg['threshold']:.1e}")
            for n in c.notes:
                lines.append(f"      note: {n}")
        return "\n".join(lines)


def emit(report: Report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def parse(text: str) -> Report:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return Report.from_dict(d)
