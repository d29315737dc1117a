"""Second fundamental form, normal connection and the residuals built on them.

Covariant derivatives are assembled without frames.  A tensor field on M
with values in N_fM is written at every chart point y as an ambient object
that eats constant ambient vectors through the tangent projector at y and
returns its value projected to N_f(y).  Differentiating that object along a
chart direction and projecting the result back onto N_f(x) gives the
covariant derivative, since the derivative of a projector maps its range into
the complement.  Only per-point frames are used to read off coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _fields
from ._parallel import pmap
from .ambient import AmbientVector, alpha_h, theta_vector
from .errors import GeometryInconsistency, InputContractError
from .immersion import DiffConfig, FramedPoint, ImmersionMap, frame_at, local_frames, _require_margin

Array = NDArray[np.float64]

N1_RANK_TOL = 1e-8
NORMAL_FIELD_TOL = 1e-7


@dataclass(frozen=True)
class ExtrinsicData:
    """alpha[a, b] holds the normal coordinates of alpha_f(e_a, e_b)."""

    alpha: Array
    shape_ops: Array
    mean_curvature: Array
    first_normal_basis: Array
    first_normal_rank: int
    first_normal_spectrum: Array
    alpha_ambient: Array

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.alpha))

    def shape_operator(self, xi: Array) -> Array:
        """A_xi in the tangent frame for xi given in normal coordinates."""
        return np.einsum("abk,k->ab", self.alpha, np.asarray(xi, float))


def first_normal_space(alpha: Array, rel_tol: float = N1_RANK_TOL) -> tuple[Array, int, Array]:
    """Orthonormal basis (normal coordinates) of span Im alpha, its rank and singular values."""
    p = alpha.shape[-1]
    M = alpha.reshape(-1, p).T
    if p == 0:
        return np.zeros((0, 0)), 0, np.zeros(0)
    U, sv, _ = np.linalg.svd(M, full_matrices=True)
    thresh = rel_tol * max(float(sv[0]) if sv.size else 0.0, 1.0)
    rank = int(np.sum(sv > thresh))
    return U[:, :rank], rank, sv


def _frame_alpha(pf: _fields.PointFields, E: Array) -> Array:
    """alpha_f(e_a, e_b) as ambient vectors for a frame E (columns), shape (m, m, N)."""
    Ec = pf.Jplus @ E
    return np.einsum("ijn,ia,jb->abn", pf.alpha_coord, Ec, Ec)


def second_fundamental_form(fp: FramedPoint, imm: ImmersionMap, cfg: DiffConfig = DiffConfig()) -> ExtrinsicData:
    """alpha_f, shape operators, mean curvature and first normal space at a framed point."""
    pf = _fields.point_fields(imm, fp.chart_coords, cfg, hessian=True)
    amb = imm.ambient
    s = pf.signs
    C = fp.chart_to_frame
    H_frame = np.einsum("nij,ia,jb->abn", pf.H, C, C)
    alpha_F = H_frame - np.einsum("nk,abk->abn", pf.P_T, H_frame)
    alpha_f = np.einsum("nk,abk->abn", pf.P_N, H_frame)
    E = fp.tangent_frame
    m = E.shape[1]
    ah = np.empty_like(alpha_F)
    for a in range(m):
        for b in range(m):
            ah[a, b] = alpha_h(E[:, a], E[:, b], pf.F, amb)
    defect = float(np.max(np.abs(alpha_F - ah - alpha_f))) if m else 0.0
    scale = max(1.0, float(np.max(np.abs(alpha_F))) if m else 1.0)
    if defect > 1e-7 * scale:
        raise GeometryInconsistency(f"alpha_F - alpha_h disagrees with the N_f projection by {defect:.2e}")
    Nf = fp.normal_frame
    alpha = np.einsum("abn,n,nk->abk", alpha_f, s, Nf)
    alpha = (alpha + alpha.transpose(1, 0, 2)) / 2
    shape_ops = np.einsum("abk->kab", alpha)
    eta = np.einsum("aak->k", alpha) / m
    basis, rank, spec = first_normal_space(alpha)
    return ExtrinsicData(alpha, shape_ops, eta, basis, rank, spec, alpha_f)


def extrinsic_at(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> tuple[FramedPoint, ExtrinsicData]:
    fp = frame_at(imm, x, cfg)
    return fp, second_fundamental_form(fp, imm, cfg)


def gauss_formula_residual(fp: FramedPoint, imm: ImmersionMap, cfg: DiffConfig = DiffConfig()) -> float:
    """max |d_i d_j F - Gamma^k_ij d_k F - alpha_f(d_i, d_j) - alpha_h(d_i F, d_j F)|."""
    pf = _fields.point_fields(imm, fp.chart_coords, cfg, hessian=True)
    amb = imm.ambient
    m = imm.dim
    worst = 0.0
    alpha_c = pf.alpha_coord
    for i in range(m):
        for j in range(m):
            recon = pf.J @ fp.christoffel[:, i, j] + alpha_c[i, j] + alpha_h(pf.J[:, i], pf.J[:, j], pf.F, amb)
            worst = max(worst, float(np.max(np.abs(pf.H[:, i, j] - recon))))
    return worst


def umbilic_residual(ed: ExtrinsicData) -> float:
    """max over frame pairs of |alpha(e_a, e_b) - delta_ab H|."""
    m = ed.alpha.shape[0]
    diff = ed.alpha - np.eye(m)[:, :, None] * ed.mean_curvature[None, None, :]
    return float(np.max(np.linalg.norm(diff, axis=-1))) if m else 0.0


@dataclass(frozen=True)
class NormalDerivativeSample:
    """nabla-perp along chart direction `direction` of a normal field, in normal coordinates."""

    base_point: Array
    direction: int
    field_id: str
    components: Array
    ambient: AmbientVector
    reconstruction_residual: float


def normal_derivative(imm: ImmersionMap, x: Sequence[float], i: int,
                      normal_field: Callable[[Array], AmbientVector], cfg: DiffConfig = DiffConfig(),
                      field_id: str = "", step: float | None = None) -> NormalDerivativeSample:
    """Normal covariant derivative of a field of N_fM along the chart axis i.

    The flat derivative is split as nabla-perp xi - F_* A_xi X - <SX, xi> theta;
    the residual of that reconstruction is recorded with the sample.
    """
    x = np.asarray(x, float)
    h = cfg.alpha_step(imm) if step is None else step
    _require_margin(imm, x, 2 * h)
    amb = imm.ambient

    def checked(y: Array) -> Array:
        v = np.asarray(normal_field(y), float).reshape(amb.N)
        P_N = _fields.point_fields(imm, y, cfg, hessian=False).P_N
        drift = float(np.max(np.abs(v - P_N @ v)))
        if drift > NORMAL_FIELD_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise InputContractError(f"normal field {field_id or ''} leaves N_fM by {drift:.2e} at {y.tolist()}")
        return v

    xi = checked(x)
    d = _fields.first_derivative(checked, x, i, h, cfg.fd_order)
    pf = _fields.point_fields(imm, x, cfg, hessian=True)
    nabla = pf.P_N @ d
    X = pf.J[:, i]
    SX_xi = float(np.dot(amb.signs[amb.N1:] * X[amb.N1:], xi[amb.N1:]))
    recon = nabla - pf.shape_operator(xi) @ X - SX_xi * theta_vector(pf.F, amb)
    residual = float(np.max(np.abs(d - recon)))
    _, _, _, Nf, _ = local_frames(imm, x, cfg)
    comps = Nf.T @ (amb.signs * nabla)
    return NormalDerivativeSample(x, i, field_id, comps, nabla, residual)


def covariant_alpha(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig(),
                    fp: FramedPoint | None = None) -> Array:
    """D[c, a, b] = (nabla_{e_c} alpha)(e_a, e_b) in normal coordinates at x."""
    x = np.asarray(x, float)
    fp = frame_at(imm, x, cfg) if fp is None else fp
    h = cfg.alpha_step(imm)
    _require_margin(imm, x, 2 * h)
    E = fp.tangent_frame

    def alpha_field(y: Array) -> Array:
        return _frame_alpha(_fields.point_fields(imm, y, cfg, hessian=True), E)

    d = _fields.gradient(alpha_field, x, h, cfg.fd_order)
    d_frame = np.einsum("kc,kabn->cabn", fp.chart_to_frame, d)
    return np.einsum("nk,n,cabn->cabk", fp.normal_frame, imm.ambient.signs, d_frame)


def nabla_alpha_norm(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> float:
    """Frobenius norm of nabla alpha over all frame index triples."""
    return float(np.linalg.norm(covariant_alpha(imm, x, cfg)))


@dataclass(frozen=True)
class ResidualStats:
    max: float
    rms: float
    worst_point: tuple[float, ...]
    count: int

    @classmethod
    def from_values(cls, values: Sequence[float], points: Sequence[Sequence[float]]) -> "ResidualStats":
        v = np.asarray(values, float)
        if v.size == 0:
            return cls(0.0, 0.0, (), 0)
        k = int(np.argmax(v))
        return cls(float(v[k]), float(np.sqrt(np.mean(v ** 2))), tuple(float(t) for t in points[k]), int(v.size))

    def to_dict(self) -> dict:
        return {"max": self.max, "rms": self.rms, "worst_point": list(self.worst_point), "count": self.count}


def grid_residuals(fn: Callable[[Array], float], points: Array, threads: int | None = None) -> ResidualStats:
    """Evaluate a scalar residual on every grid point and summarise it."""
    vals = pmap(lambda p: float(fn(p)), list(points), threads)
    return ResidualStats.from_values(vals, points)
