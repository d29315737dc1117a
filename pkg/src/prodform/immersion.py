"""Parametric immersions into the product ambient and their differentiation.

An immersion is given on one chart (an axis-aligned box in R^m) by the map
F = h o f into the flat model.  Derivatives come either from exact evaluators
(built symbolically by the gallery and the scenario parser) or from central
finite differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp
from numpy.typing import NDArray

from . import _fields
from .ambient import QUADRIC_TOL, AmbientVector, ProductAmbient
from .errors import ContractViolation, DomainError, GeometryInconsistency, ImmersionDegenerate

Array = NDArray[np.float64]

RANK_REL_TOL = 1e-10
MAX_GRID_POINTS = 625


@dataclass(frozen=True)
class ChartBox:
    """Axis-aligned chart domain [lower_i, upper_i]."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ContractViolation("chart box bounds must be non-empty and of equal length")
        if any(not (a < b) for a, b in zip(lo, hi)):
            raise ContractViolation(f"chart box needs lower < upper on every axis, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, half_width: float, center: Sequence[float] | None = None) -> "ChartBox":
        c = np.zeros(dim) if center is None else np.asarray(center, float)
        return cls(tuple(c - half_width), tuple(c + half_width))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "ChartBox":
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> Array:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2

    def contains(self, x: Sequence[float], margin: float = 0.0) -> bool:
        x = np.asarray(x, float)
        return bool(np.all(x >= np.asarray(self.lower) + margin) and np.all(x <= np.asarray(self.upper) - margin))

    def product(self, other: "ChartBox") -> "ChartBox":
        return ChartBox(self.lower + other.lower, self.upper + other.upper)

    def grid(self, points_per_axis: int | None = None, inset: float = 0.1) -> Array:
        """Tensor grid on the box shrunk by `inset` of its width on each side.

        The default uses 5 points per axis, reduced so that at most 625 points
        are produced.
        """
        m = self.dim
        if points_per_axis is None:
            points_per_axis = 5
            while points_per_axis > 1 and points_per_axis ** m > MAX_GRID_POINTS:
                points_per_axis -= 1
        if points_per_axis < 1:
            raise ContractViolation("grid needs at least one point per axis")
        axes = []
        for a, b in zip(self.lower, self.upper):
            w = b - a
            if points_per_axis == 1:
                axes.append(np.array([(a + b) / 2]))
            else:
                axes.append(np.linspace(a + inset * w, b - inset * w, points_per_axis))
        return np.array(list(itertools.product(*axes)), dtype=float)


@dataclass(frozen=True)
class DiffConfig:
    """Finite-difference configuration.

    `fd_step` is the step used to differentiate exactly known data.  When a
    quantity is itself produced by finite differences, its derivative is taken
    with an enlarged step so that round-off is not amplified: second
    derivatives of F use 100 * fd_step, fields built from a differenced
    Jacobian are differentiated with 100 * fd_step and fields built from a
    differenced Hessian with 1000 * fd_step.  A nested derivative uses ten
    times the step of the derivative inside it.
    """

    fd_step: float = 1e-5
    fd_order: int = 4
    use_exact: bool = True

    def __post_init__(self) -> None:
        if not (self.fd_step > 0 and math.isfinite(self.fd_step)):
            raise ContractViolation(f"fd_step must be positive, got {self.fd_step!r}")
        if self.fd_order not in (2, 4):
            raise ContractViolation(f"fd_order must be 2 or 4, got {self.fd_order!r}")

    def key(self) -> tuple:
        return (self.fd_step, self.fd_order, self.use_exact)

    def exact_jacobian(self, imm: "ImmersionMap") -> bool:
        return self.use_exact and imm.exact_jacobian is not None

    def exact_hessian(self, imm: "ImmersionMap") -> bool:
        return self.use_exact and imm.exact_hessian is not None

    @property
    def hessian_step(self) -> float:
        return 100 * self.fd_step

    def tangent_step(self, imm: "ImmersionMap") -> float:
        """Step for differentiating fields that depend on F and its Jacobian."""
        return self.fd_step if self.exact_jacobian(imm) else 100 * self.fd_step

    def alpha_step(self, imm: "ImmersionMap") -> float:
        """Step for differentiating fields that also depend on second derivatives."""
        if self.exact_jacobian(imm) and self.exact_hessian(imm):
            return self.fd_step
        return 1000 * self.fd_step

    def with_step(self, fd_step: float) -> "DiffConfig":
        return DiffConfig(fd_step, self.fd_order, self.use_exact)


def _lambdify_array(symbols, exprs, shape):
    flat = sp.Matrix(list(exprs)).reshape(len(exprs), 1)
    fn = sp.lambdify(list(symbols), flat, modules="numpy")

    def call(x):
        return np.asarray(fn(*np.asarray(x, float)), dtype=float).reshape(shape)

    return call


@dataclass(frozen=True)
class ImmersionMap:
    """f: chart box in R^m -> product, represented by F = h o f into the flat model."""

    ambient: ProductAmbient
    dim: int
    box: ChartBox
    evaluator: Callable[[Array], AmbientVector]
    exact_jacobian: Optional[Callable[[Array], Array]] = None
    exact_hessian: Optional[Callable[[Array], Array]] = None
    name: str = ""
    symbolic: Optional[tuple] = field(default=None, compare=False, repr=False)
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self) -> None:
        if isinstance(self.dim, bool) or int(self.dim) != self.dim or self.dim < 1:
            raise ContractViolation(f"intrinsic dimension must be a positive integer, got {self.dim!r}")
        if self.box.dim != self.dim:
            raise ContractViolation(f"chart box has dimension {self.box.dim}, expected {self.dim}")
        if self.dim > self.ambient.dim:
            raise ContractViolation("intrinsic dimension exceeds the ambient dimension")

    def __call__(self, x: Sequence[float]) -> AmbientVector:
        return np.asarray(self.evaluator(np.asarray(x, float)), dtype=float).reshape(self.ambient.N)

    @property
    def codim(self) -> int:
        return self.ambient.dim - self.dim

    @classmethod
    def from_sympy(cls, ambient: ProductAmbient, symbols: Sequence[sp.Symbol], exprs: Sequence[sp.Expr],
                   box: ChartBox, name: str = "") -> "ImmersionMap":
        """Build an immersion with exact Jacobian and Hessian from symbolic components."""
        symbols = list(symbols)
        exprs = [sp.sympify(e) for e in exprs]
        if len(exprs) != ambient.N:
            raise ContractViolation(f"expected {ambient.N} components, got {len(exprs)}")
        m = len(symbols)
        N = ambient.N
        jac = [sp.diff(e, s) for e in exprs for s in symbols]
        hess = [sp.diff(e, s, t) for e in exprs for s in symbols for t in symbols]
        return cls(ambient, m, box,
                   _lambdify_array(symbols, exprs, (N,)),
                   _lambdify_array(symbols, jac, (N, m)),
                   _lambdify_array(symbols, hess, (N, m, m)),
                   name=name, symbolic=(tuple(symbols), tuple(exprs)))

    def numeric_only(self) -> "ImmersionMap":
        """The same map with exact derivative evaluators dropped."""
        return ImmersionMap(self.ambient, self.dim, self.box, self.evaluator, name=self.name,
                            symbolic=self.symbolic)

    def with_affine_chart(self, A: Array, b: Array, box: ChartBox) -> "ImmersionMap":
        """Re-chart through x = A y + b; `box` is the new domain in y."""
        A = np.asarray(A, float)
        b = np.asarray(b, float)
        if A.shape != (self.dim, self.dim) or abs(np.linalg.det(A)) < 1e-12:
            raise ContractViolation("affine chart change must be an invertible m x m matrix")
        for corner in itertools.product(*zip(box.lower, box.upper)):
            if not self.box.contains(A @ np.asarray(corner) + b):
                raise ContractViolation("re-charted box does not map into the original chart box")
        ev, jac, hes = self.evaluator, self.exact_jacobian, self.exact_hessian
        new_jac = None if jac is None else (lambda y: np.asarray(jac(A @ y + b)) @ A)
        new_hes = None if hes is None else (
            lambda y: np.einsum("nkl,ki,lj->nij", np.asarray(hes(A @ y + b)), A, A))
        return ImmersionMap(self.ambient, self.dim, box, lambda y: ev(A @ np.asarray(y) + b),
                            new_jac, new_hes, name=f"{self.name} (re-charted)")

    def validate(self, points_per_axis: int = 3, tol: float = QUADRIC_TOL) -> None:
        """Check the quadric constraint and the immersion condition on a sample grid."""
        cfg = DiffConfig()
        for x in self.box.grid(points_per_axis):
            p = self(x)
            d = self.ambient.quadric_defects(p)
            if max(d) > tol:
                raise DomainError(f"{self.name or 'map'}: point {x.tolist()} is off the quadric "
                                  f"(defects {d[0]:.2e}, {d[1]:.2e})")
            _, J, _ = _fields.jet(self, x, cfg, hessian=False)
            s = np.linalg.svd(J, compute_uv=False)
            if s[-1] <= RANK_REL_TOL * max(s[0], 1e-300):
                raise ImmersionDegenerate(f"{self.name or 'map'}: Jacobian loses rank at {x.tolist()}")


@dataclass(frozen=True)
class FramedPoint:
    """Point data in orthonormal frames.

    tangent_frame is N x m with orthonormal columns spanning f_*T_xM;
    normal_frame is N x (n1 + n2 - m) with orthonormal columns spanning N_fM;
    chart_to_frame C satisfies tangent_frame = jacobian @ C.
    christoffel[k, i, j] holds Gamma^k_ij.
    """

    chart_coords: Array
    position: AmbientVector
    tangent_frame: Array
    normal_frame: Array
    h_normals: tuple[Optional[AmbientVector], Optional[AmbientVector]]
    metric: Array
    metric_inverse: Array
    christoffel: Array
    chart_to_frame: Array
    jacobian: Array
    ambient: ProductAmbient

    @property
    def dim(self) -> int:
        return self.tangent_frame.shape[1]

    @property
    def codim(self) -> int:
        return self.normal_frame.shape[1]

    def tangent_coords(self, v: AmbientVector) -> Array:
        return self.tangent_frame.T @ (self.ambient.signs * v)

    def normal_coords(self, v: AmbientVector) -> Array:
        return self.normal_frame.T @ (self.ambient.signs * v)

    def orthonormality_defect(self) -> float:
        s = self.ambient.signs
        basis = [self.tangent_frame, self.normal_frame]
        basis += [nu[:, None] for nu in self.h_normals if nu is not None]
        B = np.hstack(basis)
        gram = B.T @ (s[:, None] * B)
        target = np.diag(np.sign(np.diag(gram)))
        return float(np.max(np.abs(gram - target)))


def _gram_schmidt(vectors: Array, signs: Array, rel_tol: float) -> tuple[Array, Array]:
    """Pivoted Gram-Schmidt in the signed inner product, restricted to spacelike directions.

    Returns (Q, C) with Q = vectors @ C having orthonormal columns; the next
    pivot is always the remaining vector with the largest self inner product.
    """
    W = np.array(vectors, dtype=float, copy=True)
    k = W.shape[1]
    M = np.eye(k)
    norms0 = np.einsum("ni,n,ni->i", W, signs, W)
    scale = max(float(np.max(np.abs(norms0))) if k else 0.0, 1e-300)
    remaining = list(range(k))
    q_cols, c_cols = [], []
    while remaining:
        self_ip = np.array([W[:, i] @ (signs * W[:, i]) for i in remaining])
        best = int(np.argmax(self_ip))
        if self_ip[best] <= (rel_tol ** 2) * scale:
            break
        j = remaining.pop(best)
        nrm = math.sqrt(self_ip[best])
        q = W[:, j] / nrm
        c = M[:, j] / nrm
        for _ in range(2):
            for qq, cc in zip(q_cols, c_cols):
                t = qq @ (signs * q)
                q = q - t * qq
                c = c - t * cc
            nq = math.sqrt(max(q @ (signs * q), 1e-300))
            q, c = q / nq, c / nq
        q_cols.append(q)
        c_cols.append(c)
        for i in remaining:
            t = q @ (signs * W[:, i])
            W[:, i] -= t * q
            M[:, i] -= t * c
    if not q_cols:
        return np.zeros((vectors.shape[0], 0)), np.zeros((k, 0))
    return np.column_stack(q_cols), np.column_stack(c_cols)


def _require_margin(imm: ImmersionMap, x: Array, margin: float) -> None:
    if not imm.box.contains(x, margin):
        raise ContractViolation(f"chart point {x.tolist()} is closer than {margin:g} to the boundary of the chart box")


def _metric_at(imm: ImmersionMap, y: Array, cfg: DiffConfig) -> Array:
    return _fields.point_fields(imm, y, cfg, hessian=False).g


def _christoffel(imm: ImmersionMap, x: Array, cfg: DiffConfig, step: float) -> Array:
    """Gamma^k_ij by central differences of the metric."""
    dg = _fields.gradient(lambda y: _metric_at(imm, y, cfg), x, step, cfg.fd_order)
    ginv = np.linalg.inv(_metric_at(imm, x, cfg))
    # dg[l, i, j] = d_l g_ij
    first_kind = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    # first_kind[l, i, j] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    return np.einsum("kl,lij->kij", ginv, first_kind)


def local_frames(imm: ImmersionMap, x: Array, cfg: DiffConfig = DiffConfig()):
    """(fields, tangent frame E, chart_to_frame C, normal frame, position normals) at x, memoised."""
    x = np.asarray(x, dtype=float)

    def build():
        pf = _fields.point_fields(imm, x, cfg, hessian=False)
        amb = imm.ambient
        s = pf.signs
        E, C = _gram_schmidt(pf.J, s, RANK_REL_TOL)
        if E.shape[1] < imm.dim:
            raise ImmersionDegenerate(f"Jacobian has rank {E.shape[1]} < {imm.dim} at {x.tolist()}")
        nus = _raw_normals(pf.F, amb)
        rows = [E.T * s[None, :]] + [(nu * s)[None, :] for nu in nus if nu is not None]
        _, sv, vt = np.linalg.svd(np.vstack(rows))
        rank = int(np.sum(sv > RANK_REL_TOL * sv[0]))
        expected_codim = amb.dim - imm.dim
        Nf, _ = _gram_schmidt(vt[rank:].T, s, RANK_REL_TOL)
        if Nf.shape[1] != expected_codim:
            raise GeometryInconsistency(
                f"normal space has dimension {Nf.shape[1]}, expected {expected_codim} at {x.tolist()}")
        return pf, E, C, Nf, nus

    return _fields._memo(imm, ("frames", x.tobytes(), cfg.key()), build)


def frame_at(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> FramedPoint:
    """Orthonormal tangent and normal frames, metric and Christoffels at a chart point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (imm.dim,):
        raise ContractViolation(f"chart point must have {imm.dim} coordinates")
    step = cfg.tangent_step(imm)
    _require_margin(imm, x, 2 * max(step, cfg.fd_step))
    pf, E, C, Nf, nus = local_frames(imm, x, cfg)
    gamma = _christoffel(imm, x, cfg, step)
    return FramedPoint(x, pf.F, E, Nf, nus, pf.g, pf.ginv, gamma, C, pf.J, imm.ambient)


def _raw_normals(F: AmbientVector, amb: ProductAmbient):
    out = []
    for f, sl in ((amb.factor1, slice(0, amb.N1)), (amb.factor2, slice(amb.N1, amb.N))):
        if f.k == 0:
            out.append(None)
        else:
            v = np.zeros(amb.N)
            v[sl] = F[sl] / f.radius
            out.append(v)
    return tuple(out)


def second_derivative(imm: ImmersionMap, x: Sequence[float], i: int, j: int,
                      cfg: DiffConfig = DiffConfig()) -> AmbientVector:
    """d^2 F / dx^i dx^j, exact when available, else by the central stencil."""
    x = np.asarray(x, dtype=float)
    if not (0 <= i < imm.dim and 0 <= j < imm.dim):
        raise ContractViolation("derivative index out of range")
    step = cfg.fd_step if cfg.exact_hessian(imm) else cfg.hessian_step
    _require_margin(imm, x, 2 * step)
    _, _, H = _fields.jet(imm, x, cfg, hessian=True)
    return H[:, i, j].copy()


@dataclass(frozen=True)
class CurvatureSample:
    """Riemann tensor with tensor[i, j, k, l] = <R(d_i, d_j) d_l, d_k>.

    With this ordering tensor[0, 1, 0, 1] = K det g on a surface of constant
    curvature K.  The antisymmetries in (i, j) and (k, l) are enforced;
    `raw_asymmetry` is the defect before symmetrisation.
    """

    tensor: Array
    raw_asymmetry: float

    def sectional(self, metric: Array, i: int = 0, j: int = 1) -> float:
        det = metric[i, i] * metric[j, j] - metric[i, j] ** 2
        return float(self.tensor[i, j, i, j] / det)


def intrinsic_curvature(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> CurvatureSample:
    """Riemann tensor of the pulled-back metric from Christoffels and their differences."""
    x = np.asarray(x, dtype=float)
    inner = cfg.tangent_step(imm)
    outer = 10 * inner
    _require_margin(imm, x, 2 * outer + 2 * inner)
    gamma = _christoffel(imm, x, cfg, inner)
    dgamma = _fields.gradient(lambda y: _christoffel(imm, y, cfg, inner), x, outer, cfg.fd_order)
    # dgamma[i, l, j, k] = d_i Gamma^l_jk
    up = (np.einsum("iljk->lkij", dgamma) - np.einsum("jlik->lkij", dgamma)
          + np.einsum("mjk,lim->lkij", gamma, gamma) - np.einsum("mik,ljm->lkij", gamma, gamma))
    g = _metric_at(imm, x, cfg)
    low = np.einsum("pl,lkij->ijkp", g, up)      # <R(d_i, d_j) d_k, d_p>
    raw = np.einsum("ijkl->ijlk", low)           # <R(d_i, d_j) d_l, d_k>
    asym = max(float(np.max(np.abs(raw + raw.transpose(1, 0, 2, 3)))),
               float(np.max(np.abs(raw + raw.transpose(0, 1, 3, 2)))))
    sym = (raw - raw.transpose(1, 0, 2, 3) - raw.transpose(0, 1, 3, 2) + raw.transpose(1, 0, 3, 2)) / 4
    return CurvatureSample(sym, asym)
