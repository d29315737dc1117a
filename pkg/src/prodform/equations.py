"""Gauss, Codazzi and Ricci equations for submanifolds of a product of space forms.

Both sides are evaluated independently.  The intrinsic curvature comes from
the pulled-back metric, the normal curvature from the projector identity
R-perp(d_i, d_j) = P_N [d_i P_N, d_j P_N] P_N, and the derivatives of alpha
and of the shape operator from differentiating their ambient representatives.
Everything is expressed in orthonormal frames: four-index arrays follow
[a, b, c, d] = <R(e_a, e_b) e_c, e_d>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from . import _fields
from ._parallel import pmap
from .extrinsic import ExtrinsicData, ResidualStats, covariant_alpha, second_fundamental_form
from .immersion import DiffConfig, FramedPoint, ImmersionMap, frame_at, intrinsic_curvature, _require_margin
from .tensors import ProductTensors, compute_tensors

Array = NDArray[np.float64]


def wedge(X: Array, Y: Array) -> Array:
    """Matrix of Z -> <Y, Z> X - <X, Z> Y in orthonormal coordinates."""
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    return np.outer(X, Y) - np.outer(Y, X)


def _wedge4(P: Array, Q: Array) -> Array:
    """[a, b, c, d] = <(P e_a ^ Q e_b) e_c, e_d>."""
    return np.einsum("cb,da->abcd", Q, P) - np.einsum("ca,db->abcd", P, Q)


def ambient_curvature_terms(pt: ProductTensors) -> Array:
    """k1 (X^Y - X^RY - RX^Y) + (k1 + k2) RX^RY as a four-index array."""
    I = np.eye(pt.m)
    R = pt.R
    return (pt.k1 * (_wedge4(I, I) - _wedge4(I, R) - _wedge4(R, I))
            + (pt.k1 + pt.k2) * _wedge4(R, R))


def gauss_rhs(pt: ProductTensors, ed: ExtrinsicData) -> Array:
    a = ed.alpha
    shape = np.einsum("adk,bck->abcd", a, a) - np.einsum("bdk,ack->abcd", a, a)
    return ambient_curvature_terms(pt) + shape


def gauss_lhs(imm: ImmersionMap, fp: FramedPoint, cfg: DiffConfig) -> Array:
    Rm = intrinsic_curvature(imm, fp.chart_coords, cfg).tensor
    C = fp.chart_to_frame
    # Rm[i, j, k, l] = <R(d_i, d_j) d_l, d_k>
    return np.einsum("ijkl,ia,jb,lc,kd->abcd", Rm, C, C, C, C)


def _margin(imm: ImmersionMap, cfg: DiffConfig) -> float:
    t = cfg.tangent_step(imm)
    return max(22 * t, 2 * cfg.alpha_step(imm))


@dataclass(frozen=True)
class EquationTerms:
    """Both sides of each fundamental equation at one chart point."""

    x: Array
    gauss_lhs: Array
    gauss_rhs: Array
    codazzi_lhs: Array       # [a, b, c, k]: (nabla_a alpha)(e_b, e_c) - (nabla_b alpha)(e_a, e_c)
    codazzi_rhs: Array
    shape_lhs: Array         # [b, a, k, d]: (nabla_b A)(e_a, xi_k) - (nabla_a A)(e_b, xi_k)
    shape_rhs: Array
    ricci_lhs: Array         # [a, b, j, k]: <R-perp(e_a, e_b) xi_j, xi_k>
    ricci_rhs: Array
    tensors: ProductTensors = field(repr=False)
    extrinsic: ExtrinsicData = field(repr=False)
    nabla_alpha: Array = field(repr=False)

    def residuals(self) -> dict:
        def mx(a, b, axis=None):
            d = a - b
            if d.size == 0:
                return 0.0
            return float(np.max(np.abs(d))) if axis is None else float(np.max(np.linalg.norm(d, axis=axis)))
        return {"gauss": mx(self.gauss_lhs, self.gauss_rhs),
                "codazzi": mx(self.codazzi_lhs, self.codazzi_rhs, -1),
                "codazzi_shape": mx(self.shape_lhs, self.shape_rhs, -1),
                "ricci": mx(self.ricci_lhs, self.ricci_rhs, -1)}


def _shape_field(imm: ImmersionMap, y: Array, cfg: DiffConfig, E: Array, Nf: Array) -> Array:
    """A_{P_N xi_k}(P_T e_a) at y as ambient vectors, shape (m, p, N)."""
    pf = _fields.point_fields(imm, y, cfg, hessian=True)
    coeff = np.einsum("ijn,n,nk->ijk", pf.alpha_coord, pf.signs, Nf)
    return np.einsum("ni,ij,jlk,la->akn", pf.J, pf.ginv, coeff, pf.Jplus @ E)


def _normal_curvature(imm: ImmersionMap, fp: FramedPoint, cfg: DiffConfig) -> Array:
    """<R-perp(e_a, e_b) xi_j, xi_k> from derivatives of the normal projector."""
    x = fp.chart_coords
    h = cfg.tangent_step(imm)
    dP = _fields.gradient(lambda y: _fields.point_fields(imm, y, cfg, hessian=False).P_N, x, h, cfg.fd_order)
    P = _fields.point_fields(imm, x, cfg, hessian=False).P_N
    comm = np.einsum("inm,jml->ijnl", dP, dP) - np.einsum("jnm,iml->ijnl", dP, dP)
    Rp = np.einsum("nq,ijqr,rl->ijnl", P, comm, P)
    C = fp.chart_to_frame
    s = imm.ambient.signs
    Nf = fp.normal_frame
    Rp = np.einsum("ijnl,ia,jb->abnl", Rp, C, C)
    return np.einsum("nk,n,abnl,lj->abjk", Nf, s, Rp, Nf)


def equation_terms(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> EquationTerms:
    x = np.asarray(x, float)
    _require_margin(imm, x, _margin(imm, cfg))
    fp = frame_at(imm, x, cfg)
    pt = compute_tensors(fp)
    ed = second_fundamental_form(fp, imm, cfg)
    a, S, Phi = ed.alpha, pt.S, pt.Phi
    s = imm.ambient.signs
    E, Nf = fp.tangent_frame, fp.normal_frame

    gl = gauss_lhs(imm, fp, cfg)
    gr = gauss_rhs(pt, ed)

    D = covariant_alpha(imm, x, cfg, fp)
    cl = D - D.transpose(1, 0, 2, 3)
    # <Phi e_a, e_c> S e_b - <Phi e_b, e_c> S e_a
    cr = np.einsum("ac,kb->abck", Phi, S) - np.einsum("bc,ka->abck", Phi, S)

    h = cfg.alpha_step(imm)
    dA = _fields.gradient(lambda y: _shape_field(imm, y, cfg, E, Nf), x, h, cfg.fd_order)
    dA = np.einsum("ic,iakn->cakn", fp.chart_to_frame, dA)
    DA = np.einsum("nd,n,cakn->cakd", E, s, dA)          # (nabla_c A)(e_a, xi_k), tangent coords
    sl = DA - DA.transpose(1, 0, 2, 3)                     # [b, a, k, :]
    # <S e_a, xi_k> Phi e_b - <S e_b, xi_k> Phi e_a
    sr = np.einsum("ka,db->bakd", S, Phi) - np.einsum("kb,da->bakd", S, Phi)

    rl = _normal_curvature(imm, fp, cfg)
    # alpha(e_a, A_j e_b) - alpha(A_j e_a, e_b) + (k1 + k2) (S e_a ^ S e_b) xi_j
    rr = (np.einsum("bdj,adk->abjk", a, a) - np.einsum("adj,dbk->abjk", a, a)
          + (pt.k1 + pt.k2) * (np.einsum("jb,ka->abjk", S, S) - np.einsum("ja,kb->abjk", S, S)))
    return EquationTerms(x, gl, gr, cl, cr, sl, sr, rl, rr, pt, ed, D)


def gauss_residual(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> float:
    return equation_terms(imm, x, cfg).residuals()["gauss"]


def codazzi_residual(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> tuple[float, float]:
    r = equation_terms(imm, x, cfg).residuals()
    return r["codazzi"], r["codazzi_shape"]


def ricci_residual(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> float:
    return equation_terms(imm, x, cfg).residuals()["ricci"]


# --- umbilical specialisations ---------------------------------------------------------------

def _mean_curvature_derivative(imm: ImmersionMap, fp: FramedPoint, cfg: DiffConfig) -> Array:
    """nabla-perp_{e_c} eta in normal coordinates, shape (m, p)."""
    x = fp.chart_coords
    h = cfg.alpha_step(imm)
    d = _fields.gradient(lambda y: _fields.point_fields(imm, y, cfg, hessian=True).mean_curvature(),
                         x, h, cfg.fd_order)
    d = np.einsum("ic,in->cn", fp.chart_to_frame, d)
    return np.einsum("nk,n,cn->ck", fp.normal_frame, imm.ambient.signs, d)


def umbilical_equation_residuals(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig(),
                                 terms: EquationTerms | None = None) -> dict:
    """Distance between each general equation and its shape for umbilical alpha = <.,.> eta.

    `gauss` and `ricci` compare right-hand sides; `codazzi` and `codazzi_shape`
    compare the differentiated side with the form built from nabla-perp eta.
    """
    terms = equation_terms(imm, x, cfg) if terms is None else terms
    pt, ed = terms.tensors, terms.extrinsic
    m = pt.m
    I = np.eye(m)
    eta = ed.mean_curvature
    fp = frame_at(imm, x, cfg)
    g_umb = ambient_curvature_terms(pt) + float(eta @ eta) * _wedge4(I, I)
    S = pt.S
    r_umb = (pt.k1 + pt.k2) * (np.einsum("jb,ka->abjk", S, S) - np.einsum("ja,kb->abjk", S, S))
    Deta = _mean_curvature_derivative(imm, fp, cfg)
    # <e_b, e_c> nabla_a eta - <e_a, e_c> nabla_b eta
    c_umb = np.einsum("bc,ak->abck", I, Deta) - np.einsum("ac,bk->abck", I, Deta)
    # <xi_k, nabla_b eta> e_a - <xi_k, nabla_a eta> e_b, laid out as [b, a, k, d]
    s_umb = np.einsum("bk,ad->bakd", Deta, I) - np.einsum("ak,bd->bakd", Deta, I)

    def mx(u, v, axis=None):
        d = u - v
        if d.size == 0:
            return 0.0
        return float(np.max(np.abs(d))) if axis is None else float(np.max(np.linalg.norm(d, axis=axis)))

    return {"gauss": mx(terms.gauss_rhs, g_umb),
            "codazzi": mx(terms.codazzi_lhs, c_umb, -1),
            "ricci": mx(terms.ricci_rhs, r_umb, -1),
            "codazzi_shape": mx(terms.shape_lhs, s_umb, -1)}


@dataclass(frozen=True)
class EquationReport:
    gauss_residual: float
    codazzi_residual: float
    codazzi_shape_residual: float
    ricci_residual: float
    worst: dict
    stats: dict

    def to_dict(self) -> dict:
        return {"gauss_residual": self.gauss_residual, "codazzi_residual": self.codazzi_residual,
                "codazzi_shape_residual": self.codazzi_shape_residual, "ricci_residual": self.ricci_residual,
                "worst": self.worst, "stats": {k: v.to_dict() for k, v in self.stats.items()}}


def _worst_index(lhs: Array, rhs: Array, axis) -> list[int]:
    d = np.abs(lhs - rhs) if axis is None else np.linalg.norm(lhs - rhs, axis=axis)
    if d.size == 0:
        return []
    return [int(i) for i in np.unravel_index(int(np.argmax(d)), d.shape)]


def equation_report(imm: ImmersionMap, points: Array, cfg: DiffConfig = DiffConfig(),
                    threads: int | None = None) -> EquationReport:
    """All four residuals over a grid, with the offending point and frame indices."""
    terms = pmap(lambda p: equation_terms(imm, p, cfg), list(points), threads)
    names = ("gauss", "codazzi", "codazzi_shape", "ricci")
    per_point = [t.residuals() for t in terms]
    stats = {n: ResidualStats.from_values([r[n] for r in per_point], points) for n in names}
    worst = {}
    pairs = {"gauss": ("gauss_lhs", "gauss_rhs", None), "codazzi": ("codazzi_lhs", "codazzi_rhs", -1),
             "codazzi_shape": ("shape_lhs", "shape_rhs", -1), "ricci": ("ricci_lhs", "ricci_rhs", -1)}
    for n in names:
        k = int(np.argmax([r[n] for r in per_point])) if per_point else 0
        if per_point:
            lhs, rhs, ax = pairs[n]
            worst[n] = {"point": [float(v) for v in points[k]],
                        "indices": _worst_index(getattr(terms[k], lhs), getattr(terms[k], rhs), ax)}
    return EquationReport(stats["gauss"].max, stats["codazzi"].max, stats["codazzi_shape"].max,
                          stats["ricci"].max, worst, stats)
