"""Constructors for the standard families of immersions into a product of space forms.

Factor immersions are described by `FactorMap`, a symbolic chart map into
one space form.  The constructors combine them into `ImmersionMap`s with
exact derivatives (through sympy) and attach the invariants the construction
predicts, so the numerical pipeline can be checked against them.  The
extrinsic-circle family has no closed form and is evaluated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp
from numpy.typing import NDArray

from . import _fields
from ._frenet import FrenetCircle, curve_residual
from .ambient import ProductAmbient, SpaceFormSpec
from .errors import (ContractViolation, DomainError, InputContractError, NotIsometric,
                     UnsupportedError)
from .immersion import ChartBox, DiffConfig, ImmersionMap, frame_at, local_frames
from .tensors import CompositionData, compute_tensors

Array = NDArray[np.float64]

ISOMETRY_TOL = 1e-8


class Label(str, Enum):
    SLICE = "Slice"
    EXTRINSIC_PRODUCT = "ExtrinsicProduct"
    DIAGONAL_GEODESIC = "DiagonalGeodesic"
    WEIGHTED_SUM = "WeightedSum"
    EXTRINSIC_CIRCLE_PRODUCT = "ExtrinsicCircleProduct"
    TOTALLY_GEODESIC_COMPOSITION = "TotallyGeodesicComposition"
    GENERIC_GRAPH = "GenericGraph"


@dataclass(frozen=True)
class Expected:
    """Invariants predicted by a construction.  None means "not predicted"."""

    theorem: Optional[str] = None
    case: Optional[str] = None
    R_spectrum: Optional[tuple[float, ...]] = None
    rank_S: Optional[int] = None
    parallel: Optional[bool] = None
    umbilic: Optional[bool] = None
    totally_geodesic: Optional[bool] = None
    reduction: Optional[tuple[int, int]] = None
    umbilical_case: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for k in ("theorem", "case", "R_spectrum", "rank_S", "parallel", "umbilic",
                  "totally_geodesic", "reduction", "umbilical_case"):
            v = getattr(self, k)
            if v is not None:
                out[k] = list(v) if isinstance(v, tuple) else v
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class GalleryInstance:
    immersion: ImmersionMap
    label: Label
    expected: Expected
    params: dict = field(default_factory=dict)
    name: str = ""
    circle: Optional[Callable[[float], Array]] = field(default=None, repr=False, compare=False)

    @property
    def ambient(self) -> ProductAmbient:
        return self.immersion.ambient

    def with_expected(self, **kw) -> "GalleryInstance":
        return replace(self, expected=replace(self.expected, **kw))


# --- factor maps -----------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorMap:
    """Chart map into a single space form Q_k^n, given by flat-model components."""

    k: float
    n: int
    symbols: tuple
    exprs: tuple
    box: ChartBox
    name: str = ""

    def __post_init__(self) -> None:
        spec = SpaceFormSpec(self.k, self.n)
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "exprs", tuple(sp.sympify(e) for e in self.exprs))
        if len(self.exprs) != spec.flat_dim:
            raise ContractViolation(f"a map into {spec.label()} needs {spec.flat_dim} components, "
                                    f"got {len(self.exprs)}")
        if len(self.symbols) != self.box.dim:
            raise ContractViolation("chart box dimension does not match the number of chart variables")

    @property
    def spec(self) -> SpaceFormSpec:
        return SpaceFormSpec(self.k, self.n)

    @property
    def dim(self) -> int:
        return len(self.symbols)

    def renamed(self, prefix: str) -> "FactorMap":
        new = sp.symbols(f"{prefix}0:{self.dim}", real=True)
        sub = dict(zip(self.symbols, new))
        return replace(self, symbols=tuple(new), exprs=tuple(e.subs(sub) for e in self.exprs))

    def evaluator(self) -> Callable[[Array], Array]:
        fn = sp.lambdify(list(self.symbols), list(self.exprs), modules="numpy")
        return lambda x: np.asarray(fn(*np.asarray(x, float)), dtype=float)

    def metric(self, x: Sequence[float]) -> Array:
        J = sp.Matrix(self.exprs).jacobian(sp.Matrix(self.symbols))
        Jn = np.asarray(sp.lambdify(list(self.symbols), J, "numpy")(*np.asarray(x, float)), float)
        s = self.spec.signs()
        return Jn.T @ (s[:, None] * Jn)

    def check_quadric(self, points_per_axis: int = 3, tol: float = 1e-9) -> None:
        ev = self.evaluator()
        for x in self.box.grid(points_per_axis):
            d = self.spec.quadric_defect(ev(x))
            if d > tol:
                raise DomainError(f"{self.name or 'factor map'} leaves Q_{self.k:g}^{self.n} at {x.tolist()} "
                                  f"(defect {d:.2e})")

    def included(self, n_big: int) -> "FactorMap":
        """Compose with the coordinate inclusion Q_k^n -> Q_k^{n_big}."""
        if n_big < self.n:
            raise ContractViolation("target dimension is smaller than the current one")
        return replace(self, n=n_big, exprs=self.exprs + (sp.Integer(0),) * (n_big - self.n))


def _unit_sphere(angles: Sequence[sp.Expr]) -> list[sp.Expr]:
    """Spherical coordinates on S^m in R^{m+1}: (cos a1 * omega(a2..), sin a1)."""
    if len(angles) == 1:
        return [sp.cos(angles[0]), sp.sin(angles[0])]
    rest = _unit_sphere(angles[1:])
    return [sp.cos(angles[0]) * r for r in rest] + [sp.sin(angles[0])]


def _chart_symbols(m: int, prefix: str = "x") -> tuple:
    return tuple(sp.symbols(f"{prefix}1:{m + 1}", real=True))


def space_form_chart(k: float, m: int, half_width: float = 0.6) -> FactorMap:
    """A chart of Q_k^m itself: angles on spheres, graph coordinates on hyperbolic space."""
    xs = _chart_symbols(m)
    box = ChartBox.cube(m, half_width)
    if k > 0:
        exprs = [e / math.sqrt(k) for e in _unit_sphere(xs)]
    elif k < 0:
        exprs = [sp.sqrt(1 / abs(k) + sum(x ** 2 for x in xs))] + list(xs)
    else:
        exprs = list(xs)
    return FactorMap(k, m, xs, exprs, box, f"chart of Q_{k:g}^{m}")


def round_sphere(k: float, n: int, m: int, rho: float, half_width: float = 0.6) -> FactorMap:
    """An m-sphere of radius rho in Q_k^n, n >= m + 1 (great sphere when rho is the radius)."""
    if n < m + 1 and k != 0:
        raise ContractViolation("a round m-sphere needs n >= m + 1")
    if k > 0 and rho > 1 / math.sqrt(k) + 1e-15:
        raise ContractViolation("sphere radius exceeds the radius of the ambient sphere")
    xs = _chart_symbols(m)
    om = [rho * e for e in _unit_sphere(xs)]
    if k > 0:
        h = math.sqrt(max(1 / k - rho ** 2, 0.0))
        exprs = om + [sp.Float(h)]
    elif k < 0:
        exprs = [sp.Float(math.sqrt(rho ** 2 + 1 / abs(k)))] + om
    else:
        exprs = om
    fm = FactorMap(k, len(exprs) - (1 if k != 0 else 0), xs, exprs, ChartBox.cube(m, half_width),
                   f"S^{m}({rho:g}) in Q_{k:g}")
    return fm.included(n) if fm.n < n else fm


def clifford_torus(k: float, r1: float, half_width: float = 0.8) -> FactorMap:
    """S^1(r1) x S^1(r2) in S^3(1/sqrt k), r1^2 + r2^2 = 1/k."""
    if k <= 0:
        raise ContractViolation("the Clifford torus lives in a sphere")
    r2 = math.sqrt(1 / k - r1 ** 2)
    s, t = _chart_symbols(2)
    exprs = [r1 * sp.cos(s / r1), r1 * sp.sin(s / r1), r2 * sp.cos(t / r2), r2 * sp.sin(t / r2)]
    return FactorMap(k, 3, (s, t), exprs, ChartBox.cube(2, half_width), f"torus({r1:g},{r2:g})")


def flat_circle(n: int, rho: float, half_width: float = 0.8) -> FactorMap:
    (t,) = _chart_symbols(1)
    exprs = [rho * sp.cos(t / rho), rho * sp.sin(t / rho)] + [0] * (n - 2)
    return FactorMap(0.0, n, (t,), exprs, ChartBox.cube(1, half_width), f"circle({rho:g})")


def flat_ellipse(n: int, a: float, b: float, half_width: float = 0.8) -> FactorMap:
    (t,) = _chart_symbols(1)
    exprs = [a * sp.cos(t), b * sp.sin(t)] + [0] * (n - 2)
    return FactorMap(0.0, n, (t,), exprs, ChartBox.cube(1, half_width), f"ellipse({a:g},{b:g})")


def flat_identity(n: int, m: int | None = None, half_width: float = 1.0) -> FactorMap:
    m = n if m is None else m
    xs = _chart_symbols(m)
    return FactorMap(0.0, n, xs, list(xs) + [0] * (n - m), ChartBox.cube(m, half_width), f"R^{m}")


def point_on(k: float, n: int, seed: int = 0) -> Array:
    """A fixed point of Q_k^n for slices."""
    amb = ProductAmbient(SpaceFormSpec(k, n), SpaceFormSpec(1.0, 1))
    rng = np.random.default_rng(seed)
    return amb.random_point(rng)[: SpaceFormSpec(k, n).flat_dim]


# --- constructors ----------------------------------------------------------------------------

def _immersion(amb: ProductAmbient, fm_symbols, exprs, box: ChartBox, name: str) -> ImmersionMap:
    imm = ImmersionMap.from_sympy(amb, fm_symbols, exprs, box, name)
    imm.validate()
    return imm


def make_slice(inner: FactorMap, point: Sequence[float], k_other: float, side: int = 1,
               expected: Expected | None = None, name: str = "") -> GalleryInstance:
    """j o inner with the other factor frozen at `point`; side 2 puts inner into the second factor."""
    point = np.asarray(point, float)
    other = SpaceFormSpec(k_other, point.size - (1 if k_other != 0 else 0))
    if other.quadric_defect(point) > 1e-9:
        raise DomainError(f"slice point is off Q_{k_other:g}^{other.n}")
    inner.check_quadric()
    pt_exprs = [sp.Float(float(v)) for v in point]
    if side == 1:
        amb = ProductAmbient(inner.spec, other)
        exprs = list(inner.exprs) + pt_exprs
        R = (0.0,) * inner.dim
    elif side == 2:
        amb = ProductAmbient(other, inner.spec)
        exprs = pt_exprs + list(inner.exprs)
        R = (1.0,) * inner.dim
    else:
        raise ContractViolation("side must be 1 or 2")
    imm = _immersion(amb, inner.symbols, exprs, inner.box, name or f"slice of {inner.name}")
    exp = expected or Expected()
    exp = replace(exp, R_spectrum=R, rank_S=0)
    return GalleryInstance(imm, Label.SLICE, exp, {"side": side}, name)


def make_product(f1: FactorMap, f2: FactorMap, expected: Expected | None = None, name: str = "") -> GalleryInstance:
    """(x, y) -> (f1(x), f2(y))."""
    f1.check_quadric()
    f2.check_quadric()
    g1, g2 = f1.renamed("u"), f2.renamed("w")
    amb = ProductAmbient(f1.spec, f2.spec)
    imm = _immersion(amb, g1.symbols + g2.symbols, list(g1.exprs) + list(g2.exprs), f1.box.product(f2.box),
                     name or f"{f1.name} x {f2.name}")
    exp = replace(expected or Expected(), R_spectrum=(0.0,) * f1.dim + (1.0,) * f2.dim, rank_S=0)
    return GalleryInstance(imm, Label.EXTRINSIC_PRODUCT, exp, {}, name)


def diagonal_coefficients(k1: float, k2: float) -> tuple[float, float, float]:
    """(k, a, b) with k = k1 k2 / (k1 + k2), a^2 = k2 / (k1 + k2), b^2 = k1 / (k1 + k2)."""
    if not k1 * k2 > 0:
        raise UnsupportedError("the diagonal embedding needs k1 k2 > 0")
    s = k1 + k2
    return k1 * k2 / s, math.sqrt(k2 / s), math.sqrt(k1 / s)


def make_diagonal(k1: float, k2: float, inner: FactorMap, expected: Expected | None = None,
                  name: str = "") -> GalleryInstance:
    """g o inner with g(x) = (a x, b x)."""
    k, a, b = diagonal_coefficients(k1, k2)
    if abs(inner.k - k) > 1e-12 * max(1.0, abs(k)):
        raise ContractViolation(f"inner map must take values in Q_{k:g}, got curvature {inner.k:g}")
    inner.check_quadric()
    amb = ProductAmbient.of(k1, inner.n, k2, inner.n)
    exprs = [a * e for e in inner.exprs] + [b * e for e in inner.exprs]
    imm = _immersion(amb, inner.symbols, exprs, inner.box, name or f"diagonal over {inner.name}")
    exp = expected or Expected()
    if inner.dim == inner.n:
        exp = replace(exp, R_spectrum=(b * b,) * inner.dim)
    exp = replace(exp, extra={**exp.extra, "b2": b * b})
    return GalleryInstance(imm, Label.DIAGONAL_GEODESIC, exp, {"k1": k1, "k2": k2}, name)


def make_weighted_sum(f1: FactorMap, f2: FactorMap, theta: float, expected: Expected | None = None,
                      name: str = "") -> GalleryInstance:
    """(cos theta f1, sin theta f2) for f_i into Q_{k_i cos^2}, Q_{k_i sin^2} on a common chart."""
    if not (0 < theta < math.pi / 2):
        raise ContractViolation("theta must lie in (0, pi/2)")
    if f1.dim != f2.dim or f1.box != f2.box:
        raise ContractViolation("weighted sums need both maps on the same chart")
    c, s = math.cos(theta), math.sin(theta)
    k1 = f1.k / c ** 2
    k2 = f2.k / s ** 2
    f1.check_quadric()
    f2.check_quadric()
    sub = dict(zip(f2.symbols, f1.symbols))
    e2 = [e.subs(sub) for e in f2.exprs]
    f2s = replace(f2, symbols=f1.symbols, exprs=tuple(e2))
    pts = np.vstack([f1.box.grid(3), f1.box.center[None, :]])
    for x in pts:
        d = float(np.max(np.abs(f1.metric(x) - f2s.metric(x))))
        if d > ISOMETRY_TOL:
            raise NotIsometric(f"the two maps induce different metrics at {x.tolist()} (difference {d:.2e})")
    amb = ProductAmbient.of(k1, f1.n, k2, f2.n)
    exprs = [c * e for e in f1.exprs] + [s * e for e in e2]
    imm = _immersion(amb, f1.symbols, exprs, f1.box, name or f"weighted sum ({theta:.4g})")
    exp = replace(expected or Expected(), R_spectrum=(s * s,) * f1.dim)
    return GalleryInstance(imm, Label.WEIGHTED_SUM, exp, {"theta": theta}, name)


@dataclass(frozen=True)
class HelixParams:
    """gamma(t) = ((r cos wt, r sin wt, z0), v t) in S^2 x R, unit speed r^2 w^2 + v^2 = 1."""

    r: float
    omega: float
    v: float
    z0: float


@dataclass(frozen=True)
class FrenetParams:
    """Extrinsic circle of curvature kappa with vertical speed A cos(kappa t)."""

    kappa: float
    amplitude: float


def make_circle_product(k1: float, params: HelixParams | FrenetParams, tail: FactorMap | None = None,
                        expected: Expected | None = None, name: str = "") -> GalleryInstance:
    """j o (gamma x tail) with gamma a curve in Q_{k1}^2 x R and tail into R^{n2 - 1}.

    Without a tail the result is the curve itself in Q_{k1}^2 x R.
    """
    if k1 <= 0:
        raise UnsupportedError("only the spherical model Q_{k1}^2 with k1 > 0 is provided")
    if tail is not None:
        if tail.k != 0:
            raise ContractViolation("the tail factor must be Euclidean")
        tail.check_quadric()
        tail = tail.renamed("w")
    n_tail = 0 if tail is None else tail.n
    amb = ProductAmbient.of(k1, 2, 0.0, n_tail + 1)
    box = ChartBox.cube(1, 1.0)
    if tail is not None:
        box = box.product(tail.box)
    if isinstance(params, HelixParams):
        p = params
        if abs(p.r ** 2 + p.z0 ** 2 - 1 / k1) > 1e-12:
            raise ContractViolation("helix needs r^2 + z0^2 = 1/k1")
        if abs(p.r ** 2 * p.omega ** 2 + p.v ** 2 - 1) > 1e-12:
            raise ContractViolation("helix needs unit speed r^2 omega^2 + v^2 = 1")
        t = sp.Symbol("t", real=True)
        gexprs = [p.r * sp.cos(p.omega * t), p.r * sp.sin(p.omega * t), sp.Float(p.z0), p.v * t]
        syms = (t,) + (() if tail is None else tail.symbols)
        exprs = gexprs + ([] if tail is None else list(tail.exprs))
        imm = _immersion(amb, syms, exprs, box, name or "helix product")
        ev = sp.lambdify(t, gexprs, "numpy")
        circle = lambda s: np.asarray(ev(s), float)
        prm = {"r": p.r, "omega": p.omega, "v": p.v, "z0": p.z0}
    else:
        fc = FrenetCircle(1 / math.sqrt(k1), params.kappa, params.amplitude)
        tail_ev = None if tail is None else tail.evaluator()

        def evaluator(x):
            x = np.asarray(x, float)
            return fc(x[0]) if tail_ev is None else np.concatenate([fc(x[0]), tail_ev(x[1:])])

        imm = ImmersionMap(amb, box.dim, box, evaluator, name=name or "extrinsic circle product")
        imm.validate()
        circle = fc
        prm = {"kappa": params.kappa, "amplitude": params.amplitude}
    return GalleryInstance(imm, Label.EXTRINSIC_CIRCLE_PRODUCT, expected or Expected(), prm, name, circle)


def extrinsic_circle_residual(inst: GalleryInstance, samples: int = 7) -> float:
    """max over sample times of the normal derivative of the curvature vector of gamma."""
    if inst.circle is None:
        raise ContractViolation("instance does not carry an extrinsic-circle curve")
    rad = 1 / math.sqrt(inst.ambient.k1)
    ts = np.linspace(-0.8, 0.8, samples)
    return max(curve_residual(inst.circle, float(t), rad)["normal_derivative"] for t in ts)


def circle_fullness(inst: GalleryInstance, samples: int = 41, tol: float = 1e-6) -> dict:
    """Whether gamma leaves every totally geodesic surface of Q^2 x R.

    Those surfaces are the horizontal slices and the vertical cylinders over
    great circles, so gamma is full iff its height varies and its spherical
    part spans R^3.
    """
    ts = np.linspace(-0.9, 0.9, samples)
    pts = np.array([inst.circle(float(t)) for t in ts])
    height_range = float(np.ptp(pts[:, 3]))
    sv = np.linalg.svd(pts[:, :3], compute_uv=False)
    planar = float(sv[-1] / sv[0])
    return {"height_range": height_range, "planarity": planar,
            "full": bool(height_range > tol and planar > tol)}


def _block_matrix(A1: Array, A2: Array) -> Array:
    M = np.zeros((A1.shape[0] + A2.shape[0], A1.shape[1] + A2.shape[1]))
    M[: A1.shape[0], : A1.shape[1]] = A1
    M[A1.shape[0]:, A1.shape[1]:] = A2
    return M


def standard_inclusion(k: float, n_small: int, n_big: int) -> Array:
    """Coordinate inclusion of the flat model of Q_k^{n_small} into that of Q_k^{n_big}."""
    small = SpaceFormSpec(k, n_small).flat_dim
    big = SpaceFormSpec(k, n_big).flat_dim
    A = np.zeros((big, small))
    A[:small, :small] = np.eye(small)
    return A


def make_composition(inner: GalleryInstance, j: tuple[Array, Array], expected: Expected | None = None,
                     name: str = "") -> GalleryInstance:
    """j o f for a pair of linear isometric maps of the flat models (a totally geodesic inclusion)."""
    A1, A2 = (np.asarray(a, float) for a in j)
    amb0 = inner.ambient
    if A1.shape[1] != amb0.N1 or A2.shape[1] != amb0.N2:
        raise InputContractError("inclusion matrices do not match the source flat models")
    if A1.shape[0] < amb0.N1 or A2.shape[0] < amb0.N2:
        raise InputContractError("inclusion matrices must not lower dimension")
    shift = lambda f: 1 if f.k != 0 else 0
    big1 = SpaceFormSpec(amb0.k1, A1.shape[0] - shift(amb0.factor1))
    big2 = SpaceFormSpec(amb0.k2, A2.shape[0] - shift(amb0.factor2))
    for A, small, big in ((A1, amb0.factor1, big1), (A2, amb0.factor2, big2)):
        if np.max(np.abs(A.T @ (big.signs()[:, None] * A) - np.diag(small.signs()))) > 1e-12:
            raise InputContractError("inclusion is not isometric, so it does not preserve the quadric")
        if small.k < 0 and A[0, 0] <= 0:
            raise InputContractError("inclusion swaps the sheets of the hyperboloid")
    amb = ProductAmbient(big1, big2)
    M = _block_matrix(A1, A2)
    src = inner.immersion
    jac = None if src.exact_jacobian is None else (lambda x: M @ np.asarray(src.exact_jacobian(x)))
    hes = None if src.exact_hessian is None else (
        lambda x: np.einsum("ab,bij->aij", M, np.asarray(src.exact_hessian(x))))
    imm = ImmersionMap(amb, src.dim, src.box, lambda x: M @ src(x), jac, hes,
                       name=name or f"inclusion of {src.name}")
    imm.validate()
    exp = expected or inner.expected
    circle = inner.circle
    return GalleryInstance(imm, Label.TOTALLY_GEODESIC_COMPOSITION, exp,
                           {**inner.params, "inner": inner.name}, name, circle)


def inclusion_normal_map(inner: ImmersionMap, outer: ImmersionMap, M: Array, x: Sequence[float],
                         cfg: DiffConfig = DiffConfig()) -> Array:
    """Normal coordinates in the outer frame of the images of the inner normal frame."""
    Nf_in = local_frames(inner, np.asarray(x, float), cfg)[3]
    Nf_out = local_frames(outer, np.asarray(x, float), cfg)[3]
    return Nf_out.T @ (outer.ambient.signs[:, None] * (M @ Nf_in))


def pullback(outer: ImmersionMap, symbols: Sequence[sp.Symbol], chart_exprs: Sequence[sp.Expr],
             box: ChartBox, name: str = "") -> ImmersionMap:
    """outer o fbar where fbar is a map between charts given symbolically."""
    if outer.symbolic is None:
        raise ContractViolation("pullback needs a symbolic outer map")
    osyms, oexprs = outer.symbolic
    sub = dict(zip(osyms, chart_exprs))
    return _immersion(outer.ambient, symbols, [e.subs(sub) for e in oexprs], box, name)


def composition_data(g: ImmersionMap, F: ImmersionMap, fbar: Callable[[Array], Array],
                     x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> CompositionData:
    """Everything needed to compare the tensors of F = g o fbar and g at x."""
    x = np.asarray(x, float)
    y = np.asarray(fbar(x), float)
    fpF = frame_at(F, x, cfg)
    fpg = frame_at(g, y, cfg)
    s = F.ambient.signs
    D = fpg.tangent_frame.T @ (s[:, None] * fpF.tangent_frame)
    q = D.shape[0] - D.shape[1]
    _, _, vt = np.linalg.svd(D.T)
    B = vt[D.shape[1]:].T if q else np.zeros((D.shape[0], 0))
    G = fpF.normal_frame.T @ (s[:, None] * (fpg.tangent_frame @ B))
    Ng = fpF.normal_frame.T @ (s[:, None] * fpg.normal_frame)
    return CompositionData(compute_tensors(fpF), compute_tensors(fpg), D, B, G, Ng)


# --- generic controls ------------------------------------------------------------------------

def _random_trig(rng: np.random.Generator, xs, terms: int, amplitude: float) -> sp.Expr:
    out = sp.Integer(0)
    for _ in range(terms):
        w = rng.uniform(0.5, 2.0, size=len(xs))
        ph = rng.uniform(0, 2 * math.pi)
        c = rng.uniform(-1, 1) * amplitude
        out += c * sp.sin(sum(float(wi) * x for wi, x in zip(w, xs)) + float(ph))
    return out


def make_generic_graph(seed: int = 7, amplitude: float = 0.3, name: str = "generic_graph") -> GalleryInstance:
    """x -> (x, phi(x)) in S^2 x S^2 with phi a random trigonometric map (seeded)."""
    rng = np.random.default_rng(seed)
    xs = _chart_symbols(2)
    first = _unit_sphere(list(xs))
    a = 0.4 * xs[0] + _random_trig(rng, xs, 3, amplitude)
    b = 0.6 * xs[1] + _random_trig(rng, xs, 3, amplitude)
    second = _unit_sphere([a, b])
    amb = ProductAmbient.of(1.0, 2, 1.0, 2)
    imm = _immersion(amb, xs, first + second, ChartBox.cube(2, 0.6), name)
    exp = Expected(theorem="None", case="-", parallel=False, umbilic=False, totally_geodesic=False)
    return GalleryInstance(imm, Label.GENERIC_GRAPH, exp, {"seed": seed, "amplitude": amplitude}, name)


def make_twisted_curve(seed: int = 3, name: str = "twisted_curve") -> GalleryInstance:
    """A generic curve in S^3 x S^3: U and N1-perp meet in a line that rotates."""
    rng = np.random.default_rng(seed)
    (t,) = _chart_symbols(1)
    ang1 = [0.5 * t + _random_trig(rng, (t,), 2, 0.4), 0.3 + 0.8 * t ** 2, 0.7 * t + 0.2 * t ** 3]
    ang2 = [0.4 * t + _random_trig(rng, (t,), 2, 0.3), 0.2 * t ** 2 - 0.1, 0.6 * t]
    amb = ProductAmbient.of(1.0, 3, 1.0, 3)
    imm = _immersion(amb, (t,), _unit_sphere(ang1) + _unit_sphere(ang2), ChartBox.cube(1, 0.8), name)
    # a curve is trivially umbilic
    exp = Expected(theorem="None", case="-", parallel=False, umbilic=True, totally_geodesic=False,
                   reduction=(0, 0))
    return GalleryInstance(imm, Label.GENERIC_GRAPH, exp, {"seed": seed}, name)


def make_covered_umbilical(D: float = 0.5, name: str = "covered_umbilical") -> GalleryInstance:
    """Umbilical hypersurface {x0 = D sinh h} of R x S^3 pushed into S^3 x S^2.

    The line is wrapped onto a great circle of the second factor, so the
    image is umbilical in S^3 x S^2 with S of rank one and ker S = ker R.
    """
    h, a, b = sp.symbols("h a b", real=True)
    x0 = D * sp.sinh(h)
    w = _unit_sphere([a, b])
    first = [x0] + [sp.sqrt(1 - x0 ** 2) * e for e in w]
    second = [sp.cos(h), sp.sin(h), sp.Integer(0)]
    amb = ProductAmbient.of(1.0, 3, 1.0, 2)
    box = ChartBox((0.2, -0.6, -0.6), (0.9, 0.6, 0.6))
    imm = _immersion(amb, (h, a, b), first + second, box, name)
    exp = Expected(theorem="Umbilical_1_4", case="iii", rank_S=1, umbilic=True, totally_geodesic=False,
                   parallel=False, extra={"kernel_side": "ker_R"})
    return GalleryInstance(imm, Label.TOTALLY_GEODESIC_COMPOSITION, exp, {"D": D}, name)


def make_covered_circle(rho: float = 0.5, c0: float = 0.3, name: str = "covered_circle") -> GalleryInstance:
    """Circle x line in R^3 wrapped onto S^1 x R^2 inside S^2 x R^2."""
    s, t = sp.symbols("s t", real=True)
    u = c0 + rho * sp.cos(s / rho)
    exprs = [sp.cos(u), sp.sin(u), sp.Integer(0), rho * sp.sin(s / rho), t]
    amb = ProductAmbient.of(1.0, 2, 0.0, 2)
    imm = _immersion(amb, (s, t), exprs, ChartBox.cube(2, 0.8), name)
    exp = Expected(theorem="ParallelFlat_1_2", case="iii", parallel=True, umbilic=False, totally_geodesic=False)
    return GalleryInstance(imm, Label.TOTALLY_GEODESIC_COMPOSITION, exp, {"rho": rho, "c0": c0}, name)


# --- registry --------------------------------------------------------------------------------

@dataclass(frozen=True)
class GalleryEntry:
    name: str
    label: Label
    builder: Callable[..., GalleryInstance]
    defaults: dict
    summary: str
    exact: bool = True

    def build(self, **params) -> GalleryInstance:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ContractViolation(f"{self.name}: unknown parameters {sorted(unknown)}")
        inst = self.builder(**{**self.defaults, **params})
        return replace(inst, name=self.name, params={**self.defaults, **params, **inst.params})


def _great_circle_slice():
    return make_slice(round_sphere(1.0, 2, 1, 1.0), [0.0, 0.0, 1.0], 1.0,
                      expected=Expected("TotGeod_1_3", "i", parallel=True, umbilic=True,
                                        totally_geodesic=True, reduction=(1, 2)))


def _great_sphere_slice():
    return make_slice(round_sphere(1.0, 4, 2, 1.0), [0.6, 0.0, 0.0, 0.8], 1.0,
                      expected=Expected("TotGeod_1_3", "i", parallel=True, umbilic=True,
                                        totally_geodesic=True, reduction=(2, 3)))


def _small_sphere_slice(rho):
    return make_slice(round_sphere(1.0, 3, 2, rho), [1.0, 0.0], 1.0,
                      expected=Expected("Parallel_1_1", "i", parallel=True, umbilic=True,
                                        totally_geodesic=False, reduction=(0, 1)))


def _small_sphere_slice_3(rho):
    return make_slice(round_sphere(1.0, 4, 3, rho), [0.0, 0.0, 1.0], 1.0,
                      expected=Expected("Parallel_1_1", "i", parallel=True, umbilic=True,
                                        totally_geodesic=False, umbilical_case="i", reduction=(0, 2)))


def _clifford_torus_slice(r1):
    return make_slice(clifford_torus(1.0, r1), [1.0, 0.0], 1.0,
                      expected=Expected("Parallel_1_1", "i", parallel=True, umbilic=False,
                                        totally_geodesic=False))


def _plane_slice():
    return make_slice(flat_identity(2), [math.sqrt(1.25), 0.5, 0.0], -1.0, side=2,
                      expected=Expected("TotGeod_1_3", "i", parallel=True, umbilic=True,
                                        totally_geodesic=True, reduction=(2, 0)))


def _circle_x_circle(rho1, rho2):
    return make_product(round_sphere(1.0, 2, 1, rho1), round_sphere(1.0, 2, 1, rho2),
                        expected=Expected("Parallel_1_1", "ii", parallel=True, umbilic=False,
                                          totally_geodesic=False))


def _geodesic_x_geodesic():
    return make_product(round_sphere(1.0, 2, 1, 1.0), round_sphere(1.0, 2, 1, 1.0),
                        expected=Expected("TotGeod_1_3", "ii", parallel=True, umbilic=True,
                                          totally_geodesic=True))


def _sphere_x_circle(rho1, rho2):
    return make_product(round_sphere(1.0, 3, 2, rho1), flat_circle(2, rho2),
                        expected=Expected("ParallelFlat_1_2", "ii", parallel=True, umbilic=False,
                                          totally_geodesic=False))


def _sphere_x_ellipse(rho1, a, b):
    return make_product(round_sphere(1.0, 3, 2, rho1), flat_ellipse(2, a, b),
                        expected=Expected("None", "-", parallel=False, umbilic=False, totally_geodesic=False))


def _diagonal_identity(k1, k2, n):
    k, _, _ = diagonal_coefficients(k1, k2)
    return make_diagonal(k1, k2, space_form_chart(k, n),
                         expected=Expected("TotGeod_1_3", "iii", parallel=True, umbilic=True,
                                           totally_geodesic=True, rank_S=n))


def _diagonal_small_sphere(k1, k2, rho):
    k, _, _ = diagonal_coefficients(k1, k2)
    return make_diagonal(k1, k2, round_sphere(k, 3, 2, rho),
                         expected=Expected("Parallel_1_1", "iii", parallel=True, umbilic=True,
                                           totally_geodesic=False, rank_S=2))


def _diagonal_small_sphere_5_5(rho):
    inner = _diagonal_small_sphere(1.0, 1.0, rho)
    A = standard_inclusion(1.0, 3, 5)
    return make_composition(inner, (A, A), expected=replace(inner.expected, reduction=(2, 2),
                                                             extra={**inner.expected.extra, "ell": 1}))


def _weighted_sum(theta, rho):
    c, s = math.cos(theta), math.sin(theta)
    f = round_sphere(1.0, 3, 2, rho)
    return make_weighted_sum(f, f, theta,
                             expected=Expected("Parallel_1_1", "iii", parallel=True, umbilic=True,
                                               totally_geodesic=False, rank_S=2,
                                               extra={"sin2": s * s, "cos2": c * c}))


def _weighted_sum_umbilical_3(theta, rho, c2):
    f1 = round_sphere(1.0, 4, 3, rho)
    f2 = round_sphere(c2, 4, 3, rho)
    return make_weighted_sum(f1, f2, theta,
                             expected=Expected("Umbilical_1_4", "ii", parallel=False, umbilic=True,
                                               totally_geodesic=False, rank_S=3, umbilical_case="ii"))


def _full_circle_x_line(kappa, amplitude):
    return make_circle_product(1.0, FrenetParams(kappa, amplitude), flat_identity(1),
                               expected=Expected("ParallelFlat_1_2", "iv", parallel=True, umbilic=False,
                                                 totally_geodesic=False, extra={"full": True}))


def _full_circle(kappa, amplitude):
    return make_circle_product(1.0, FrenetParams(kappa, amplitude), None,
                               expected=Expected("ParallelFlat_1_2", "iv", parallel=True, umbilic=True,
                                                 totally_geodesic=False, extra={"full": True}))


def _helix_geodesic_x_line(v):
    r = 1.0
    omega = math.sqrt(1 - v * v) / r
    return make_circle_product(1.0, HelixParams(r, omega, v, 0.0), flat_identity(1),
                               expected=Expected("TotGeod_1_3", "iv", parallel=True, umbilic=True,
                                                 totally_geodesic=True, extra={"full": False}))


def _great_circle_slice_in_4_3():
    inner = _great_circle_slice()
    return make_composition(inner, (standard_inclusion(1.0, 2, 4), standard_inclusion(1.0, 2, 3)),
                            expected=replace(inner.expected, reduction=(3, 3)))


_ENTRIES = [
    GalleryEntry("great_circle_slice", Label.SLICE, _great_circle_slice, {},
                 "great circle of S^2 x {pt} in S^2 x S^2"),
    GalleryEntry("great_sphere_slice", Label.SLICE, _great_sphere_slice, {},
                 "great S^2 of S^4 x {pt} in S^4 x S^3"),
    GalleryEntry("small_sphere_slice", Label.SLICE, _small_sphere_slice, {"rho": 0.6},
                 "small S^2 of S^3 x {pt} in S^3 x S^1"),
    GalleryEntry("small_sphere_slice_3", Label.SLICE, _small_sphere_slice_3, {"rho": 0.7},
                 "small S^3 of S^4 x {pt} in S^4 x S^2"),
    GalleryEntry("clifford_torus_slice", Label.SLICE, _clifford_torus_slice, {"r1": 0.6},
                 "flat torus of S^3 x {pt} in S^3 x S^1"),
    GalleryEntry("plane_slice", Label.SLICE, _plane_slice, {},
                 "{pt} x R^2 in H^2 x R^2"),
    GalleryEntry("circle_x_circle", Label.EXTRINSIC_PRODUCT, _circle_x_circle, {"rho1": 0.6, "rho2": 0.8},
                 "product of small circles in S^2 x S^2"),
    GalleryEntry("geodesic_x_geodesic", Label.EXTRINSIC_PRODUCT, _geodesic_x_geodesic, {},
                 "product of great circles in S^2 x S^2"),
    GalleryEntry("sphere_x_circle", Label.EXTRINSIC_PRODUCT, _sphere_x_circle, {"rho1": 0.6, "rho2": 0.8},
                 "small S^2 times a circle in S^3 x R^2"),
    GalleryEntry("sphere_x_ellipse", Label.EXTRINSIC_PRODUCT, _sphere_x_ellipse,
                 {"rho1": 0.6, "a": 1.0, "b": 0.5}, "small S^2 times an ellipse in S^3 x R^2"),
    GalleryEntry("diagonal", Label.DIAGONAL_GEODESIC, _diagonal_identity, {"k1": 1.0, "k2": 1.0, "n": 2},
                 "diagonal embedding of Q_k^n into Q_k1^n x Q_k2^n"),
    GalleryEntry("diagonal_small_sphere", Label.DIAGONAL_GEODESIC, _diagonal_small_sphere,
                 {"k1": 1.0, "k2": 1.0, "rho": 1.0}, "diagonal over a small S^2 of Q_k^3"),
    GalleryEntry("diagonal_small_sphere_5_5", Label.TOTALLY_GEODESIC_COMPOSITION, _diagonal_small_sphere_5_5,
                 {"rho": 1.0}, "diagonal over a small sphere, included into S^5 x S^5"),
    GalleryEntry("great_circle_slice_4_3", Label.TOTALLY_GEODESIC_COMPOSITION, _great_circle_slice_in_4_3, {},
                 "great circle slice included into S^4 x S^3"),
    GalleryEntry("weighted_sum", Label.WEIGHTED_SUM, _weighted_sum, {"theta": math.pi / 4, "rho": 0.9},
                 "(cos t f, sin t f) for a small S^2 of S^3"),
    GalleryEntry("weighted_sum_umbilical_3", Label.WEIGHTED_SUM, _weighted_sum_umbilical_3,
                 {"theta": math.pi / 3, "rho": 0.9, "c2": 0.5}, "weighted sum of two umbilical S^3"),
    GalleryEntry("covered_umbilical", Label.TOTALLY_GEODESIC_COMPOSITION, make_covered_umbilical, {"D": 0.5},
                 "umbilical hypersurface of R x S^3 wrapped into S^3 x S^2"),
    GalleryEntry("covered_circle", Label.TOTALLY_GEODESIC_COMPOSITION, make_covered_circle,
                 {"rho": 0.5, "c0": 0.3}, "circle x line of R^3 wrapped into S^2 x R^2"),
    GalleryEntry("full_circle_x_line", Label.EXTRINSIC_CIRCLE_PRODUCT, _full_circle_x_line,
                 {"kappa": 1.0, "amplitude": 0.5}, "full extrinsic circle of S^2 x R times a line", exact=False),
    GalleryEntry("full_circle", Label.EXTRINSIC_CIRCLE_PRODUCT, _full_circle,
                 {"kappa": 1.0, "amplitude": 0.5}, "full extrinsic circle in S^2 x R", exact=False),
    GalleryEntry("helix_geodesic_x_line", Label.EXTRINSIC_CIRCLE_PRODUCT, _helix_geodesic_x_line, {"v": 0.6},
                 "helix of S^1 x R times a line in S^2 x R^2"),
    GalleryEntry("generic_graph", Label.GENERIC_GRAPH, make_generic_graph, {"seed": 7, "amplitude": 0.3},
                 "seeded random graph in S^2 x S^2"),
    GalleryEntry("twisted_curve", Label.GENERIC_GRAPH, make_twisted_curve, {"seed": 3},
                 "seeded generic curve in S^3 x S^3"),
]

REGISTRY: dict[str, GalleryEntry] = {e.name: e for e in _ENTRIES}


def gallery_names() -> list[str]:
    return list(REGISTRY)


def build(name: str, **params) -> GalleryInstance:
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise ContractViolation(f"unknown gallery instance {name!r}") from None
    return entry.build(**params)


def find(label: str, **params) -> GalleryInstance:
    """Look an instance up by label (or name) plus parameters, as scenario files do."""
    if label in REGISTRY:
        return build(label, **params)
    matches = [e for e in _ENTRIES if e.label.value == label and set(params) <= set(e.defaults)]
    if not matches:
        raise ContractViolation(f"no gallery instance with label {label!r} accepts {sorted(params)}")
    return matches[0].build(**params)


def list_gallery() -> str:
    """One line per registered instance: name, label, defaults, expected verdict."""
    lines = []
    for e in _ENTRIES:
        inst = e.build()
        ex = inst.expected
        verdict = ex.theorem if ex.theorem in (None, "None") else f"{ex.theorem} ({ex.case})"
        params = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in e.defaults.items())
        lines.append(f"{e.name:<28} {e.label.value:<28} [{params}] -> {verdict}  # {e.summary}")
    return "\n".join(lines)
