"""Scenario files: TOML documents describing one verification run.

A scenario names an ambient product, a source immersion (a gallery entry or an
inline map written in the expression language of :mod:`prodform.expr`), the
sample grid, tolerance overrides, finite-difference settings and the checks to
run.  Example::

    name = "diagonal"
    checks = ["tensors", "classify"]

    [ambient]
    k1 = 1.0
    n1 = 2
    k2 = 1.0
    n2 = 2

    [source]
    gallery = "DiagonalGeodesic"
    params = { k1 = 1.0, k2 = 1.0, n = 2 }
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ambient import ProductAmbient
from .classifier import Tolerances
from .errors import ContractViolation, ParseError, ProdformError, ValidationError
from .expr import chart_symbols, parse_expression
from .immersion import ChartBox, DiffConfig

CHECKS = ("tensors", "identities", "equations", "parallel", "umbilic", "classify", "reduce")

_TOP_KEYS = {"name", "seed", "checks", "ambient", "source", "grid", "tolerances", "fd", "expect"}
_EXPECT_KEYS = {"theorem", "case", "parallel", "umbilic", "reduction"}


@dataclass(frozen=True)
class GallerySource:
    label: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"gallery": self.label, "params": dict(self.params)}


@dataclass(frozen=True)
class InlineSource:
    dim: int
    components: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"dim": self.dim, "components": list(self.components)}


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: Optional[int] = None
    inset: float = 0.1
    lower: Optional[tuple[float, ...]] = None
    upper: Optional[tuple[float, ...]] = None

    @property
    def box(self) -> Optional[ChartBox]:
        if self.lower is None:
            return None
        return ChartBox(self.lower, self.upper)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"points_per_axis": self.points_per_axis, "inset": self.inset}
        if self.lower is not None:
            out["lower"] = list(self.lower)
            out["upper"] = list(self.upper)
        return out


@dataclass(frozen=True)
class Scenario:
    name: str
    ambient: Optional[tuple[float, int, float, int]]
    source: GallerySource | InlineSource
    grid: GridSpec = GridSpec()
    tolerances: Tolerances = Tolerances()
    checks: tuple[str, ...] = CHECKS
    fd: DiffConfig = DiffConfig()
    seed: Optional[int] = None
    expect: dict = field(default_factory=dict)

    def product(self) -> Optional[ProductAmbient]:
        if self.ambient is None:
            return None
        k1, n1, k2, n2 = self.ambient
        return ProductAmbient.of(k1, n1, k2, n2)

    def ordered_checks(self) -> tuple[str, ...]:
        return tuple(c for c in CHECKS if c in self.checks)

    def to_dict(self) -> dict:
        amb = None
        if self.ambient is not None:
            amb = dict(zip(("k1", "n1", "k2", "n2"), self.ambient))
        return {"name": self.name, "seed": self.seed, "checks": list(self.ordered_checks()),
                "ambient": amb, "source": self.source.to_dict(), "grid": self.grid.to_dict(),
                "tolerances": self.tolerances.to_dict(), "expect": dict(self.expect),
                "fd": {"step": self.fd.fd_step, "order": self.fd.fd_order, "use_exact": self.fd.use_exact}}


# --- loading ---------------------------------------------------------------------------------

class _Locator:
    """Best-effort line numbers for dotted field names in the source text."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line(self, dotted: str, needle: str | None = None) -> Optional[int]:
        parts = re.sub(r"\[\d+\]", "", dotted).split(".")
        start = 0
        if len(parts) > 1:
            header = re.compile(rf"^\s*\[\s*{re.escape(parts[0])}\s*\]")
            for i, ln in enumerate(self.lines):
                if header.match(ln):
                    start = i
                    break
        key = re.compile(rf"^\s*{re.escape(parts[-1])}\s*=")
        found = None
        for i in range(start, len(self.lines)):
            if key.match(self.lines[i]):
                found = i
                break
        if found is None and len(parts) == 1:
            header = re.compile(rf"^\s*\[\s*{re.escape(parts[0])}\s*\]")
            found = next((i for i, ln in enumerate(self.lines) if header.match(ln)), None)
        if needle is not None:
            for i in range(found or start, len(self.lines)):
                if needle in self.lines[i]:
                    return i + 1
        return None if found is None else found + 1


def _fail(loc: _Locator, fieldname: str, msg: str) -> ValidationError:
    line = loc.line(fieldname)
    where = f"field {fieldname!r}" + (f", line {line}" if line else "")
    err = ValidationError(f"{where}: {msg}")
    err.field, err.line = fieldname, line
    return err


def _number(loc, name, v, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _fail(loc, name, f"expected a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise _fail(loc, name, f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _table(loc, name, v) -> dict:
    if not isinstance(v, dict):
        raise _fail(loc, name, "expected a table")
    return v


def _unknown(loc, name, got, allowed):
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise _fail(loc, f"{name}.{extra[0]}" if name else extra[0],
                    f"unknown key (allowed: {', '.join(sorted(allowed))})")


def parse_scenario(text: str, origin: str = "<scenario>") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        if m:
            raise ParseError(f"{origin}: {msg}", int(m.group(1)), int(m.group(2))) from None
        raise ParseError(f"{origin}: {msg}") from None
    loc = _Locator(text)
    _unknown(loc, "", doc, _TOP_KEYS)

    name = str(doc.get("name", Path(origin).stem))
    seed = None if "seed" not in doc else _number(loc, "seed", doc["seed"], int)

    checks = doc.get("checks", list(CHECKS))
    if isinstance(checks, str):
        checks = [c.strip() for c in checks.split(",") if c.strip()]
    if not isinstance(checks, list) or not checks:
        raise _fail(loc, "checks", "expected a non-empty list of check names")
    for c in checks:
        if c not in CHECKS:
            raise _fail(loc, "checks", f"unknown check {c!r} (choose from {', '.join(CHECKS)})")
    if len(set(checks)) != len(checks):
        raise _fail(loc, "checks", "duplicate check names")

    ambient = None
    if "ambient" in doc:
        a = _table(loc, "ambient", doc["ambient"])
        _unknown(loc, "ambient", a, {"k1", "n1", "k2", "n2"})
        missing = [k for k in ("k1", "n1", "k2", "n2") if k not in a]
        if missing:
            raise _fail(loc, "ambient", f"missing {', '.join(missing)}")
        ambient = (_number(loc, "ambient.k1", a["k1"]), _number(loc, "ambient.n1", a["n1"], int),
                   _number(loc, "ambient.k2", a["k2"]), _number(loc, "ambient.n2", a["n2"], int))
        for key, n in (("n1", ambient[1]), ("n2", ambient[3])):
            if n < 1:
                raise _fail(loc, f"ambient.{key}", f"factor dimension must be at least 1, got {n}")
        try:
            ProductAmbient.of(*ambient)
        except ProdformError as exc:
            raise _fail(loc, "ambient", str(exc)) from None

    if "source" not in doc:
        raise _fail(loc, "source", "a [source] section is required")
    src = _table(loc, "source", doc["source"])
    if "gallery" in src:
        _unknown(loc, "source", src, {"gallery", "params"})
        params = _table(loc, "source.params", src.get("params", {}))
        source: GallerySource | InlineSource = GallerySource(str(src["gallery"]), dict(params))
    elif "components" in src:
        _unknown(loc, "source", src, {"dim", "components"})
        if ambient is None:
            raise _fail(loc, "ambient", "inline maps need an [ambient] section")
        dim = _number(loc, "source.dim", src.get("dim", 0), int)
        comps = src["components"]
        if not isinstance(comps, list) or not all(isinstance(c, str) for c in comps):
            raise _fail(loc, "source.components", "expected a list of expression strings")
        if dim < 1:
            raise _fail(loc, "source.dim", "chart dimension must be at least 1")
        N = ProductAmbient.of(*ambient).N
        if len(comps) != N:
            raise _fail(loc, "source.components", f"the flat model has {N} coordinates, got {len(comps)} components")
        syms = chart_symbols(dim)
        for i, c in enumerate(comps):
            try:
                parse_expression(c, syms, f"source.components[{i}]")
            except ParseError as exc:
                raise ParseError(exc.message, loc.line("source.components", c), exc.column, exc.field) from None
        source = InlineSource(dim, tuple(comps))
    else:
        raise _fail(loc, "source", "give either 'gallery' (with optional params) or 'dim' and 'components'")

    g = _table(loc, "grid", doc.get("grid", {}))
    _unknown(loc, "grid", g, {"points_per_axis", "inset", "lower", "upper"})
    ppa = g.get("points_per_axis")
    ppa = None if ppa is None else _number(loc, "grid.points_per_axis", ppa, int)
    if ppa is not None and ppa < 1:
        raise _fail(loc, "grid.points_per_axis", "need at least one point per axis")
    inset = _number(loc, "grid.inset", g.get("inset", 0.1))
    if not 0 <= inset < 0.5:
        raise _fail(loc, "grid.inset", "inset must lie in [0, 0.5)")
    lower = upper = None
    if ("lower" in g) != ("upper" in g):
        raise _fail(loc, "grid", "give both lower and upper, or neither")
    if "lower" in g:
        lower = tuple(_number(loc, "grid.lower", v) for v in g["lower"])
        upper = tuple(_number(loc, "grid.upper", v) for v in g["upper"])
        try:
            ChartBox(lower, upper)
        except ContractViolation as exc:
            raise _fail(loc, "grid", str(exc)) from None
    if isinstance(source, InlineSource):
        if lower is None:
            raise _fail(loc, "grid", "inline maps need a chart box (grid.lower and grid.upper)")
        if len(lower) != source.dim:
            raise _fail(loc, "grid.lower", f"chart box has {len(lower)} axes but the map has dim {source.dim}")
    grid = GridSpec(ppa, inset, lower, upper)

    t = _table(loc, "tolerances", doc.get("tolerances", {}))
    _unknown(loc, "tolerances", t, Tolerances.names())
    tvals = {k: _number(loc, f"tolerances.{k}", v) for k, v in t.items()}
    for k, v in tvals.items():
        if not (v > 0 and math.isfinite(v)):
            raise _fail(loc, f"tolerances.{k}", f"tolerance must be a positive number, got {v!r}")
    tol = Tolerances().updated(**tvals)

    f = _table(loc, "fd", doc.get("fd", {}))
    _unknown(loc, "fd", f, {"step", "order", "use_exact"})
    try:
        fd = DiffConfig(_number(loc, "fd.step", f.get("step", 1e-5)), _number(loc, "fd.order", f.get("order", 4), int),
                        bool(f.get("use_exact", True)))
    except ContractViolation as exc:
        raise _fail(loc, "fd", str(exc)) from None

    expect = _table(loc, "expect", doc.get("expect", {}))
    _unknown(loc, "expect", expect, _EXPECT_KEYS)
    if "reduction" in expect:
        r = expect["reduction"]
        if not (isinstance(r, list) and len(r) == 2):
            raise _fail(loc, "expect.reduction", "expected [left, right]")
        expect = {**expect, "reduction": [_number(loc, "expect.reduction", v, int) for v in r]}

    return Scenario(name, ambient, source, grid, tol, tuple(checks), fd, seed, dict(expect))


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {str(p)!r}: {exc.strerror}") from None
    return parse_scenario(text, str(p))
