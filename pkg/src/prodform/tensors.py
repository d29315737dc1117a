"""The tensors L, K, R, S, T and Phi of an immersion into a product, and their identities.

With pi_2 the projection onto the second factor, pi_2 f_* X = f_* R X + S X
and pi_2 xi = f_* S^t xi + T xi for tangent X and normal xi.  All matrices
are expressed in the orthonormal frames of a FramedPoint; only invariants
built from them (spectra, ranks, residual norms) are compared across points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from . import _fields
from .errors import GeometryInconsistency, UnsupportedError
from .extrinsic import ExtrinsicData, second_fundamental_form
from .immersion import DiffConfig, FramedPoint, ImmersionMap, frame_at, _require_margin

Array = NDArray[np.float64]

DECOMPOSITION_TOL = 1e-8
KERNEL_TOL = 1e-6
LOOSE_FACTOR = 1e3


@dataclass(frozen=True)
class ProductTensors:
    """L is N2 x m, K is N2 x p (block-2 coordinates); R, Phi are m x m, S is p x m, T is p x p."""

    L: Array
    K: Array
    R: Array
    S: Array
    T: Array
    Phi: Array
    k1: float
    k2: float

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def p(self) -> int:
        return self.T.shape[0]

    def spectral_defect(self) -> float:
        """How far the spectra of R and T stick out of [0, 1]."""
        worst = 0.0
        for M in (self.R, self.T):
            if M.size:
                w = np.linalg.eigvalsh(M)
                worst = max(worst, float(max(-w.min(), w.max() - 1.0, 0.0)))
        return worst

    def swapped(self) -> "ProductTensors":
        """The same immersion seen in Q_{k2} x Q_{k1}: pi_1 and pi_2 exchange roles."""
        m, p = self.m, self.p
        R = np.eye(m) - self.R
        return ProductTensors(np.zeros((0, m)), np.zeros((0, p)), R, -self.S, np.eye(p) - self.T,
                              self.k2 * np.eye(m) - (self.k1 + self.k2) * R, self.k2, self.k1)


def _block2(amb, V: Array) -> Array:
    return V[amb.N1:]


def compute_tensors(fp: FramedPoint) -> ProductTensors:
    """R, S, T and friends at a framed point, with the decomposition identities asserted."""
    amb = fp.ambient
    s2 = amb.signs[amb.N1:]
    E, Nf = fp.tangent_frame, fp.normal_frame
    L = _block2(amb, E)
    K = _block2(amb, Nf)
    R = L.T @ (s2[:, None] * L)
    S = K.T @ (s2[:, None] * L)
    T = K.T @ (s2[:, None] * K)
    R = (R + R.T) / 2
    T = (T + T.T) / 2
    m = E.shape[1]
    Phi = amb.k1 * np.eye(m) - (amb.k1 + amb.k2) * R
    scale = max(1.0, float(np.max(np.abs(E))), float(np.max(np.abs(Nf))) if Nf.size else 1.0) ** 2
    pad = np.zeros((amb.N, 1))
    pi2E = np.vstack([np.zeros((amb.N1, m)), L])
    res_t = pi2E - E @ R - Nf @ S if Nf.size else pi2E - E @ R
    pi2N = np.vstack([np.zeros((amb.N1, Nf.shape[1])), K]) if Nf.size else pad[:, :0]
    res_n = pi2N - E @ S.T - Nf @ T if Nf.size else pi2N
    worst = max(float(np.max(np.abs(res_t))) if res_t.size else 0.0,
                float(np.max(np.abs(res_n))) if res_n.size else 0.0)
    if worst > DECOMPOSITION_TOL * scale:
        raise GeometryInconsistency(f"pi_2 decomposition fails by {worst:.2e}")
    return ProductTensors(L, K, R, S, T, Phi, amb.k1, amb.k2)


def tensors_at(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig()) -> ProductTensors:
    return compute_tensors(frame_at(imm, x, cfg))


def algebraic_identity_residuals(pt: ProductTensors) -> tuple[float, float, float]:
    """Frobenius norms of S^tS - R(I-R), TS - S(I-R) and SS^t - T(I-T)."""
    I_m = np.eye(pt.m)
    I_p = np.eye(pt.p)
    r1 = np.linalg.norm(pt.S.T @ pt.S - pt.R @ (I_m - pt.R))
    r2 = np.linalg.norm(pt.T @ pt.S - pt.S @ (I_m - pt.R))
    r3 = np.linalg.norm(pt.S @ pt.S.T - pt.T @ (I_p - pt.T))
    return float(r1), float(r2), float(r3)


@dataclass(frozen=True)
class DifferentialTerms:
    """Both sides of the covariant derivative identities for R, S and T at one point.

    Index layout: R-terms [c, b, d] = component d of (nabla_{e_c} R) e_b;
    S-terms [c, b, k] = normal component k of (nabla_{e_c} S) e_b;
    T-terms [c, j, k] = normal component k of (nabla_{e_c} T) xi_j.
    """

    dR: Array
    rhs_R: Array
    dS: Array
    rhs_S: Array
    dT: Array
    rhs_T: Array
    tensors: ProductTensors = field(repr=False)
    extrinsic: ExtrinsicData = field(repr=False)

    def residuals(self) -> tuple[float, float, float]:
        return (float(np.linalg.norm(self.dR - self.rhs_R)),
                float(np.linalg.norm(self.dS - self.rhs_S)),
                float(np.linalg.norm(self.dT - self.rhs_T)))


def _operator_fields(imm: ImmersionMap, y: Array, cfg: DiffConfig) -> Array:
    """Stack of the ambient operators P_T Pi2 P_T, P_N Pi2 P_T and P_N Pi2 P_N at y."""
    pf = _fields.point_fields(imm, y, cfg, hessian=False)
    Pi2 = imm.ambient.pi2
    return np.stack([pf.P_T @ Pi2 @ pf.P_T, pf.P_N @ Pi2 @ pf.P_T, pf.P_N @ Pi2 @ pf.P_N])


def differential_terms(imm: ImmersionMap, x: Sequence[float], cfg: DiffConfig = DiffConfig(),
                       fp: FramedPoint | None = None) -> DifferentialTerms:
    x = np.asarray(x, float)
    fp = frame_at(imm, x, cfg) if fp is None else fp
    h = cfg.tangent_step(imm)
    _require_margin(imm, x, 2 * h)
    pt = compute_tensors(fp)
    ed = second_fundamental_form(fp, imm, cfg)
    s = imm.ambient.signs
    E, Nf, C = fp.tangent_frame, fp.normal_frame, fp.chart_to_frame
    d = _fields.gradient(lambda y: _operator_fields(imm, y, cfg), x, h, cfg.fd_order)
    d = np.einsum("kc,kqij->cqij", C, d)
    Et = E.T * s[None, :]
    Nt = Nf.T * s[None, :]
    dR = np.einsum("di,cij,jb->cbd", Et, d[:, 0], E)
    dS = np.einsum("ki,cij,jb->cbk", Nt, d[:, 1], E)
    dT = np.einsum("ki,cij,jl->clk", Nt, d[:, 2], Nf)
    a, S, R, T = ed.alpha, pt.S, pt.R, pt.T
    rhs_R = np.einsum("cdk,kb->cbd", a, S) + np.einsum("kd,cbk->cbd", S, a)
    rhs_S = np.einsum("kl,cbl->cbk", T, a) - np.einsum("db,cdk->cbk", R, a)
    rhs_T = -np.einsum("kd,cdl->clk", S, a) - np.einsum("ld,cdk->clk", S, a)
    return DifferentialTerms(dR, rhs_R, dS, rhs_S, dT, rhs_T, pt, ed)


def differential_identity_residuals(imm: ImmersionMap, x: Sequence[float],
                                    cfg: DiffConfig = DiffConfig()) -> tuple[float, float, float]:
    """Residual norms of the covariant derivative identities for R, S and T."""
    return differential_terms(imm, x, cfg).residuals()


def umbilical_forms(pt: ProductTensors, ed: ExtrinsicData) -> tuple[Array, Array, Array]:
    """The right-hand sides of the R, S, T derivative identities when alpha = <.,.> eta."""
    m = pt.m
    I = np.eye(m)
    eta = ed.mean_curvature
    Seta = pt.S.T @ eta                       # S^t eta, tangent
    SYeta = eta @ pt.S                        # <S e_b, eta>
    rhs_R = np.einsum("b,cd->cbd", SYeta, I) + np.einsum("cb,d->cbd", I, Seta)
    Teta = pt.T @ eta
    rhs_S = np.einsum("cb,k->cbk", I, Teta) - np.einsum("cb,k->cbk", pt.R, eta)
    rhs_T = -np.einsum("kc,l->clk", pt.S, eta) - np.einsum("lc,k->clk", pt.S, eta)
    return rhs_R, rhs_S, rhs_T


def umbilical_identity_residuals(terms: DifferentialTerms) -> tuple[float, float, float]:
    """Distance between the general and the umbilical right-hand sides (zero iff umbilic)."""
    uR, uS, uT = umbilical_forms(terms.tensors, terms.extrinsic)
    return (float(np.linalg.norm(terms.rhs_R - uR)), float(np.linalg.norm(terms.rhs_S - uS)),
            float(np.linalg.norm(terms.rhs_T - uT)))


def _null_basis(M: Array, tol: float) -> Array:
    """Orthonormal basis of {v : |M v| small}, via singular values below tol."""
    n = M.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    if M.shape[0] == 0:
        return np.eye(n)
    _, sv, vt = np.linalg.svd(M, full_matrices=True)
    full = np.zeros(n)
    full[: sv.size] = sv
    return vt[full < tol].T


def _count_below(values: Array, tol: float) -> int:
    return int(np.sum(values < tol))


@dataclass(frozen=True)
class SubbundleSample:
    """Bases (frame coordinates, as columns) of U, V, ker R, ker(I-R), ker S and ker S^t."""

    U: Array
    V: Array
    ker_R: Array
    ker_I_minus_R: Array
    ker_S: Array
    ker_St: Array
    T_spectrum: Array
    ranks: dict
    loose_ranks: dict

    def splitting_defect(self) -> float:
        """Distance of ker S from the orthogonal sum ker R + ker(I-R)."""
        P = lambda B: B @ B.T
        m = self.ker_R.shape[0]
        if m == 0:
            return 0.0
        return float(np.linalg.norm(P(self.ker_S) - P(self.ker_R) - P(self.ker_I_minus_R)))

    def normal_splitting_defect(self) -> float:
        """Distance of ker S^t from the orthogonal sum U + V."""
        P = lambda B: B @ B.T
        if self.ker_St.shape[0] == 0:
            return 0.0
        return float(np.linalg.norm(P(self.ker_St) - P(self.U) - P(self.V)))


def _sv_full(M: Array, n: int) -> Array:
    sv = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    full = np.zeros(n)
    full[: sv.size] = sv
    return full


def extract_subbundles(pt: ProductTensors, tol: float = KERNEL_TOL,
                       loose_factor: float = LOOSE_FACTOR) -> SubbundleSample:
    m, p = pt.m, pt.p
    loose = tol * loose_factor
    wR, VR = np.linalg.eigh(pt.R)
    ker_R = VR[:, wR < tol]
    ker_IR = VR[:, wR > 1 - tol]
    ker_S = _null_basis(pt.S, tol) if p else np.eye(m)
    ker_St = _null_basis(pt.S.T, tol) if p else np.zeros((0, 0))
    if p and ker_St.shape[1]:
        Tr = ker_St.T @ pt.T @ ker_St
        wT, VT = np.linalg.eigh((Tr + Tr.T) / 2)
        band = (wT >= tol) & (wT <= 1 - tol)
        if np.any(band):
            raise GeometryInconsistency(
                f"T has eigenvalues {wT[band].tolist()} strictly inside (0, 1) on ker S^t")
        U = ker_St @ VT[:, wT < tol]
        V = ker_St @ VT[:, wT > 1 - tol]
    else:
        wT = np.zeros(0)
        U = np.zeros((p, 0))
        V = np.zeros((p, 0))
    sS_tan = _sv_full(pt.S, m)
    sS_nor = _sv_full(pt.S.T, p)
    ranks = {"U": U.shape[1], "V": V.shape[1], "ker_R": ker_R.shape[1], "ker_I_minus_R": ker_IR.shape[1],
             "ker_S": ker_S.shape[1], "ker_St": ker_St.shape[1]}
    loose_ranks = {"U": _count_below(wT, loose), "V": _count_below(1 - wT, loose),
                   "ker_R": _count_below(wR, loose), "ker_I_minus_R": _count_below(1 - wR, loose),
                   "ker_S": _count_below(sS_tan, loose), "ker_St": _count_below(sS_nor, loose)}
    return SubbundleSample(U, V, ker_R, ker_IR, ker_S, ker_St, wT, ranks, loose_ranks)


# --- relations under composition -------------------------------------------------------------

@dataclass(frozen=True)
class CompositionData:
    """Tensors of F = g o fbar and of g at fbar(x), linked through fbar_* and g_*.

    `D` is fbar_* from the frame of F to the tangent frame of g (n x m);
    `fbar_normal` an orthonormal basis of the fbar-normal space in g's tangent
    frame (n x q); `G` the map g_* from that basis into the normal frame of F
    (p_F x q); `Ng` the inclusion of N_g into N_F (p_F x p_g).
    """

    F: ProductTensors
    g: ProductTensors
    D: Array
    fbar_normal: Array
    G: Array
    Ng: Array


def composition_residuals(cd: CompositionData) -> dict:
    """The six relations between the tensors of F = g o fbar and those of g."""
    F, g, D = cd.F, cd.g, cd.D
    B = cd.fbar_normal                   # basis of N_fbar inside T(g) frame (n x q)
    out = {}
    out["R"] = float(np.linalg.norm(F.R - D.T @ g.R @ D))
    out["S_on_g_normals"] = float(np.linalg.norm(cd.Ng.T @ F.S - g.S @ D))
    out["S_on_fbar_normals"] = float(np.linalg.norm(cd.G.T @ F.S - B.T @ g.R @ D))
    out["T_g_g"] = float(np.linalg.norm(cd.Ng.T @ F.T @ cd.Ng - g.T))
    out["T_fbar_g"] = float(np.linalg.norm(cd.Ng.T @ F.T @ cd.G - g.S @ B))
    out["T_fbar_fbar"] = float(np.linalg.norm(cd.G.T @ F.T @ cd.G - B.T @ g.R @ B))
    return out


def inclusion_residuals(inner: ProductTensors, outer: ProductTensors, J: Array) -> dict:
    """Compare tensors before and after a totally geodesic inclusion.

    J maps the inner normal frame into the outer one (p_out x p_in).
    """
    return {"R": float(np.linalg.norm(outer.R - inner.R)),
            "S": float(np.linalg.norm(outer.S - J @ inner.S)),
            "T": float(np.linalg.norm(outer.T @ J - J @ inner.T))}


def vertical_decomposition(fp: FramedPoint, pt: ProductTensors) -> dict:
    """When the second factor is a line, d/dt = f_* Z + eta determines R, S and T.

    Returns the residuals of R = Z Z^t, S = eta Z^t and T = eta eta^t.
    """
    amb = fp.ambient
    if amb.k2 != 0 or amb.n2 != 1:
        raise UnsupportedError("the vertical decomposition needs a flat one-dimensional second factor")
    et = np.zeros(amb.N)
    et[-1] = 1.0
    Z = fp.tangent_coords(et)
    eta = fp.normal_coords(et)
    return {"R": float(np.linalg.norm(pt.R - np.outer(Z, Z))),
            "S": float(np.linalg.norm(pt.S - np.outer(eta, Z))),
            "T": float(np.linalg.norm(pt.T - np.outer(eta, eta)))}


def braid_check(terms: DifferentialTerms) -> tuple[float, float]:
    """(|nabla R|, max |<alpha(X, Y), S Z>|): both vanish together."""
    nR = float(np.linalg.norm(terms.dR))
    SZ = terms.tensors.S                   # columns S e_c
    pairing = np.einsum("abk,kc->abc", terms.extrinsic.alpha, SZ)
    return nR, float(np.max(np.abs(pairing))) if pairing.size else 0.0


def similarity_check(fp: FramedPoint, L: Array, lam: float) -> float:
    """max |<pi2 xi, pi2 zeta> - lam <xi, zeta>| over an orthonormal normal-coordinate basis L."""
    amb = fp.ambient
    s2 = amb.signs[amb.N1:]
    V = (fp.normal_frame @ L)[amb.N1:]
    gram = V.T @ (s2[:, None] * V)
    return float(np.max(np.abs(gram - lam * np.eye(L.shape[1])))) if L.size else 0.0


def theta_shape_residual(fp: FramedPoint, pt: ProductTensors, ed: ExtrinsicData) -> float:
    """max |<alpha_F(X, Y), theta> - <Phi X, Y>| over frame pairs (both factors curved)."""
    from .ambient import theta_vector
    amb = fp.ambient
    theta = theta_vector(fp.position, amb)
    m = pt.m
    E = fp.tangent_frame
    s = amb.signs
    worst = 0.0
    p1 = np.zeros(amb.N)
    p1[: amb.N1] = fp.position[: amb.N1]
    p2 = fp.position - p1
    for a in range(m):
        for b in range(m):
            X, Y = E[:, a], E[:, b]
            c1 = float(np.dot(s[: amb.N1] * X[: amb.N1], Y[: amb.N1]))
            c2 = float(np.dot(s[amb.N1:] * X[amb.N1:], Y[amb.N1:]))
            aF = ed.alpha_ambient[a, b] - amb.k1 * c1 * p1 - amb.k2 * c2 * p2
            worst = max(worst, abs(float(np.dot(s * aF, theta)) - pt.Phi[a, b]))
    return worst
