"""Case detection for parallel, totally geodesic and umbilical immersions, and reduction of codimension.

All decisions are taken from invariants sampled on a chart grid, so every
verdict holds "on the sampled chart" only.  Thresholds live in `Tolerances`;
each verdict records the measured values next to the thresholds it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _fields
from ._parallel import pmap
from .errors import ContractViolation, InconsistencyError
from .extrinsic import ExtrinsicData, covariant_alpha, first_normal_space, second_fundamental_form, umbilic_residual
from .immersion import DiffConfig, FramedPoint, ImmersionMap, _require_margin, frame_at
from .tensors import ProductTensors, compute_tensors, extract_subbundles, similarity_check

Array = NDArray[np.float64]


class Theorem(str, Enum):
    PARALLEL = "Parallel_1_1"
    PARALLEL_FLAT = "ParallelFlat_1_2"
    TOTALLY_GEODESIC = "TotGeod_1_3"
    UMBILICAL = "Umbilical_1_4"
    NONE = "None"


class Criterion(str, Enum):
    WITNESS = "Thm_4_2"
    FIRST_NORMAL_INVARIANT = "Cor_4_3"
    NORMAL_CURVATURE_ROUTE = "Thm_4_4"
    DIAGONAL = "Thm_6_6"
    DIAGONAL_FIRST_NORMAL = "Cor_6_7"


@dataclass(frozen=True)
class Tolerances:
    parallel: float = 1e-4
    umbilic: float = 1e-6
    zero: float = 1e-6
    kernel: float = 1e-6
    algebraic: float = 1e-8
    differential: float = 1e-4
    gauss: float = 1e-3
    codazzi: float = 1e-4
    ricci: float = 1e-4
    reduction: float = 1e-4
    dichotomy: float = 1e-5
    similarity: float = 1e-6
    braid: float = 1e-5

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ContractViolation(f"tolerance {f.name} must be a positive number, got {v!r}")

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def updated(self, **kw) -> "Tolerances":
        unknown = set(kw) - set(self.names())
        if unknown:
            raise ContractViolation(f"unknown tolerances {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in kw.items()})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# --- sampling --------------------------------------------------------------------------------

@dataclass(frozen=True)
class PointSample:
    x: Array
    fp: FramedPoint
    ed: ExtrinsicData
    pt: ProductTensors
    nabla_alpha: float

    @property
    def umbilic_residual(self) -> float:
        return umbilic_residual(self.ed)


@dataclass(frozen=True)
class Survey:
    """Per-point invariants on the sample grid."""

    samples: tuple[PointSample, ...]
    k1: float
    k2: float

    @property
    def points(self) -> Array:
        return np.array([s.x for s in self.samples])

    def values(self, name: str) -> Array:
        fn = {
            "alpha": lambda s: s.ed.norm,
            "nabla_alpha": lambda s: s.nabla_alpha,
            "umbilic": lambda s: s.umbilic_residual,
            "mean_curvature": lambda s: float(np.linalg.norm(s.ed.mean_curvature)),
            "S": lambda s: float(np.linalg.norm(s.pt.S)),
            "Phi": lambda s: float(np.linalg.norm(s.pt.Phi)),
        }[name]
        return np.array([fn(s) for s in self.samples])

    def max(self, name: str) -> float:
        v = self.values(name)
        return float(v.max()) if v.size else 0.0

    @property
    def m(self) -> int:
        return self.samples[0].pt.m


def _sample_point(imm: ImmersionMap, x: Array, cfg: DiffConfig) -> PointSample:
    fp = frame_at(imm, x, cfg)
    ed = second_fundamental_form(fp, imm, cfg)
    pt = compute_tensors(fp)
    na = float(np.linalg.norm(covariant_alpha(imm, x, cfg, fp)))
    return PointSample(np.asarray(x, float), fp, ed, pt, na)


def survey(imm: ImmersionMap, points: Array, cfg: DiffConfig = DiffConfig(), threads: int | None = None) -> Survey:
    pts = np.atleast_2d(np.asarray(points, float))
    samples = pmap(lambda x: _sample_point(imm, x, cfg), list(pts), threads)
    return Survey(tuple(samples), imm.ambient.k1, imm.ambient.k2)


# --- verdicts --------------------------------------------------------------------------------

_CASES = {
    Theorem.PARALLEL: {"i", "ii", "iii"},
    Theorem.PARALLEL_FLAT: {"i", "ii", "iii", "iv"},
    Theorem.TOTALLY_GEODESIC: {"i", "ii", "iii", "iv"},
    Theorem.UMBILICAL: {"i", "ii", "iii"},
    Theorem.NONE: {"-"},
}


def _plain(v: Any) -> Any:
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, np.ndarray):
        return [_plain(t) for t in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(t) for t in v]
    if isinstance(v, dict):
        return {str(k): _plain(t) for k, t in v.items()}
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


@dataclass(frozen=True)
class ClassificationVerdict:
    theorem: Theorem
    case_id: str
    evidence: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.case_id not in _CASES[self.theorem]:
            raise ContractViolation(f"case {self.case_id!r} is not a case of {self.theorem.value}")

    @property
    def label(self) -> str:
        return self.theorem.value if self.theorem is Theorem.NONE else f"{self.theorem.value} ({self.case_id})"

    def to_dict(self) -> dict:
        return {"theorem": self.theorem.value, "case": self.case_id, "evidence": _plain(self.evidence),
                "margins": {k: {"value": float(v), "threshold": float(t)} for k, (v, t) in self.margins.items()},
                "notes": list(self.notes), "scope": "sampled chart"}


def _none(reason: str, evidence: dict | None = None, margins: dict | None = None) -> ClassificationVerdict:
    return ClassificationVerdict(Theorem.NONE, "-", evidence or {}, margins or {}, (reason,))


def _effective(sv: Survey) -> tuple[list[ProductTensors], bool]:
    """Tensors with the flat factor (if any) placed second."""
    swap = sv.k1 == 0 and sv.k2 != 0
    return [s.pt.swapped() if swap else s.pt for s in sv.samples], swap


def _R_eigs(pts: Sequence[ProductTensors]) -> Array:
    return np.array([np.linalg.eigvalsh(p.R) for p in pts])



def _projection_split(eigs: Array, tol: float) -> Optional[str]:
    """'zero', 'one' or 'mixed' if every spectrum lies in {0, 1}; None otherwise."""
    if not np.all((np.abs(eigs) < tol) | (np.abs(eigs - 1) < tol)):
        return None
    if np.all(np.abs(eigs) < tol):
        return "zero"
    if np.all(np.abs(eigs - 1) < tol):
        return "one"
    return "mixed"


def _theorem_for(k1: float, k2: float) -> Theorem:
    return Theorem.PARALLEL_FLAT if (k1 == 0) != (k2 == 0) else Theorem.PARALLEL


def detect_totally_geodesic_case(sv: Survey, tol: Tolerances = Tolerances()) -> ClassificationVerdict:
    a_max = sv.max("alpha")
    margins = {"alpha": (a_max, tol.zero)}
    if a_max >= tol.zero:
        return _none("second fundamental form does not vanish", {"alpha_max": a_max}, margins)
    if sv.k1 == 0 and sv.k2 == 0:
        return _none("both factors are flat", {"alpha_max": a_max}, margins)
    pts, swapped = _effective(sv)
    k1, k2 = pts[0].k1, pts[0].k2
    eigs = _R_eigs(pts)
    ev = {"alpha_max": a_max, "R_spectrum_min": float(eigs.min()), "R_spectrum_max": float(eigs.max()),
          "factors_swapped": swapped}
    split = _projection_split(eigs, tol.zero)
    if split in ("zero", "one"):
        ev["slice_factor"] = (1 if split == "zero" else 2) if not swapped else (2 if split == "zero" else 1)
        return ClassificationVerdict(Theorem.TOTALLY_GEODESIC, "i", ev, margins)
    if split == "mixed":
        ev["dims"] = [int(np.sum(np.abs(e) < tol.zero)) for e in eigs[:1]] + \
                     [int(np.sum(np.abs(e - 1) < tol.zero)) for e in eigs[:1]]
        return ClassificationVerdict(Theorem.TOTALLY_GEODESIC, "ii", ev, margins)
    if k1 * k2 > 0:
        b2 = k1 / (k1 + k2)
        dev = float(np.max(np.abs(eigs - b2)))
        ev.update(b2=b2, R_minus_b2=dev)
        margins["R_minus_b2"] = (dev, tol.zero)
        if dev < tol.zero:
            return ClassificationVerdict(Theorem.TOTALLY_GEODESIC, "iii", ev, margins)
    if k2 == 0:
        IR = 1 - eigs
        nonzero = np.abs(IR) >= tol.zero
        ranks = nonzero.sum(axis=1)
        lam = IR.max(axis=1)
        ev.update(rank_I_minus_R=ranks.tolist(), lam_min=float(lam.min()), lam_max=float(lam.max()))
        if np.all(ranks == 1) and np.all((lam > tol.zero) & (lam < 1 - tol.zero)):
            return ClassificationVerdict(Theorem.TOTALLY_GEODESIC, "iv", ev, margins)
    raise InconsistencyError(f"totally geodesic immersion with R spectrum in [{eigs.min():.6g}, {eigs.max():.6g}] "
                             "fits no case")


def _rank1_fit(S: Array, R: Array) -> tuple[Array, float, float, float]:
    """(B, lambda, |S - SB B^t|, |(I - R) - lambda B B^t|) for the rank-one structure of S."""
    _, _, vt = np.linalg.svd(S)
    B = vt[0]
    nz = np.flatnonzero(np.abs(B) > 1e-8)
    if nz.size and B[nz[0]] < 0:
        B = -B
    lam = float(B @ (np.eye(R.shape[0]) - R) @ B)
    rS = float(np.linalg.norm(S - np.outer(S @ B, B)))
    rR = float(np.linalg.norm(np.eye(R.shape[0]) - R - lam * np.outer(B, B)))
    return B, lam, rS, rR


def detect_parallel_case(sv: Survey, tol: Tolerances = Tolerances(), circle_info: dict | None = None
                         ) -> ClassificationVerdict:
    na = sv.max("nabla_alpha")
    margins = {"nabla_alpha": (na, tol.parallel)}
    if na >= tol.parallel:
        return _none("second fundamental form is not parallel", {"nabla_alpha_max": na}, margins)
    if sv.k1 == 0 and sv.k2 == 0:
        return _none("both factors are flat", {"nabla_alpha_max": na}, margins)
    pts, swapped = _effective(sv)
    k1, k2 = pts[0].k1, pts[0].k2
    thm = _theorem_for(k1, k2)
    S_norms = np.array([np.linalg.norm(p.S) for p in pts])
    Phi_norms = np.array([np.linalg.norm(p.Phi) for p in pts])
    eigs = _R_eigs(pts)
    ev: dict[str, Any] = {"nabla_alpha_max": na, "S_max": float(S_norms.max()), "Phi_max": float(Phi_norms.max()),
                          "factors_swapped": swapped}
    if k1 * k2 != 0:
        dich = float(np.max(np.minimum(S_norms, Phi_norms)))
        ev["dichotomy"] = dich
        margins["dichotomy"] = (dich, tol.dichotomy)
    if S_norms.max() < tol.zero:
        margins["S"] = (float(S_norms.max()), tol.zero)
        split = _projection_split(eigs, tol.zero)
        if split is None:
            raise InconsistencyError("S vanishes but R is not an orthogonal projection")
        return ClassificationVerdict(thm, "i" if split in ("zero", "one") else "ii", ev, margins)
    margins["S"] = (float(S_norms.max()), tol.zero)
    if k1 * k2 != 0:
        if Phi_norms.max() >= tol.zero or ev["dichotomy"] >= tol.dichotomy:
            raise InconsistencyError(f"parallel immersion with both S and Phi nonzero "
                                     f"(min |S|, |Phi| reaches {ev['dichotomy']:.2e})")
        margins["Phi"] = (float(Phi_norms.max()), tol.zero)
        return ClassificationVerdict(thm, "iii", ev, margins)
    # flat second factor with S != 0
    zetas, lams, rhos, rho_res, fit_res = [], [], [], [], []
    for s, p in zip(sv.samples, pts):
        if np.linalg.norm(p.S) < tol.zero:
            continue
        B, lam, rS, rR = _rank1_fit(p.S, p.R)
        fit_res.append(max(rS, rR))
        lams.append(lam)
        sub = extract_subbundles(p, tol.kernel)
        aBB = np.einsum("abk,a,b->k", s.ed.alpha, B, B)
        zeta = sub.U.T @ aBB if sub.U.size else np.zeros(0)
        zn = float(np.linalg.norm(zeta))
        zetas.append(zn)
        for j in range(sub.U.shape[1]):
            A = s.ed.shape_operator(sub.U[:, j])
            r = float(B @ A @ B)
            rho_res.append(float(np.linalg.norm(A - r * np.outer(B, B))))
        if zn > 0:
            A = s.ed.shape_operator(sub.U @ zeta / zn)
            rhos.append(float(B @ A @ B))
    zetas_a = np.array(zetas)
    ev.update(lambda_min=float(min(lams)), lambda_max=float(max(lams)), rank_one_fit=float(max(fit_res)),
              zeta_min=float(zetas_a.min()), zeta_max=float(zetas_a.max()),
              rho_structure=float(max(rho_res)) if rho_res else 0.0)
    if rhos:
        ev["rho_min"], ev["rho_max"] = float(min(rhos)), float(max(rhos))
    margins["rank_one_fit"] = (float(max(fit_res)), tol.zero)
    if max(fit_res) >= tol.zero * 1e2 or not all(0 < l < 1 for l in lams):
        raise InconsistencyError("S is nonzero but the rank-one structure with lambda in (0, 1) fails")
    if circle_info:
        ev["circle"] = circle_info
    if np.all(zetas_a < tol.zero):
        margins["zeta"] = (float(zetas_a.max()), tol.zero)
        return ClassificationVerdict(thm, "iii", ev, margins)
    if np.all(zetas_a >= tol.zero):
        margins["zeta"] = (float(zetas_a.min()), tol.zero)
        return ClassificationVerdict(thm, "iv", ev, margins)
    raise InconsistencyError("zeta = (alpha(B, B))_U vanishes on part of the grid only")


def detect_umbilical_case(sv: Survey, tol: Tolerances = Tolerances()) -> ClassificationVerdict:
    um = sv.max("umbilic")
    m = sv.m
    margins = {"umbilic": (um, tol.umbilic)}
    ev: dict[str, Any] = {"umbilic_max": um}
    if um >= tol.umbilic:
        return _none("not umbilical", ev, margins)
    if m < 3:
        return _none("umbilical case analysis needs dimension at least 3", ev, margins)
    if sv.k1 + sv.k2 == 0:
        return _none("k1 + k2 = 0 is outside the umbilical classification", ev, margins)
    a_max = sv.max("alpha")
    ev["alpha_max"] = a_max
    if a_max < tol.zero:
        return _none("totally geodesic", ev, margins)
    subs = [extract_subbundles(s.pt, tol.kernel) for s in sv.samples]
    dims = np.array([sb.ranks["ker_S"] for sb in subs])
    ev["dim_ker_S"] = dims.tolist()
    if np.all(dims == m):
        eigs = _R_eigs([s.pt for s in sv.samples])
        ev["slice_factor"] = 1 if np.all(np.abs(eigs) < tol.zero) else 2
        return ClassificationVerdict(Theorem.UMBILICAL, "i", ev, margins)
    if np.all(dims == 0):
        eigs = _R_eigs([s.pt for s in sv.samples])
        lam = float(eigs.mean())
        spread = float(eigs.max() - eigs.min())
        ev.update(lambda_=lam, lambda_spread=spread, theta=float(math.asin(math.sqrt(min(max(lam, 0.0), 1.0)))))
        margins["lambda_spread"] = (spread, tol.zero)
        if spread >= tol.zero:
            raise InconsistencyError(f"ker S = 0 but R is not a constant multiple of I (spread {spread:.2e})")
        return ClassificationVerdict(Theorem.UMBILICAL, "ii", ev, margins)
    if np.all(dims == m - 1):
        P = lambda Bm: Bm @ Bm.T
        dR = max(float(np.linalg.norm(P(sb.ker_S) - P(sb.ker_R))) if sb.ker_R.shape[1] == m - 1 else np.inf
                 for sb in subs)
        dIR = max(float(np.linalg.norm(P(sb.ker_S) - P(sb.ker_I_minus_R))) if sb.ker_I_minus_R.shape[1] == m - 1
                  else np.inf for sb in subs)
        ev.update(kernel_vs_ker_R=dR, kernel_vs_ker_I_minus_R=dIR)
        if dR < tol.zero * 1e2:
            ev["kernel_side"] = "ker_R"
        elif dIR < tol.zero * 1e2:
            ev["kernel_side"] = "ker_I_minus_R"
        else:
            raise InconsistencyError("dim ker S = m - 1 but ker S matches neither ker R nor ker(I - R)")
        return ClassificationVerdict(Theorem.UMBILICAL, "iii", ev, margins,
                                     ("covering data is not detectable from a single chart",))
    raise InconsistencyError(f"umbilical immersion with dim ker S = {sorted(set(dims.tolist()))}, "
                             f"expected one of 0, {m - 1}, {m} throughout")


def classify(sv: Survey, tol: Tolerances = Tolerances(), circle_info: dict | None = None) -> ClassificationVerdict:
    """Totally geodesic, then parallel, then umbilical; None when no hypothesis holds."""
    attempts = {}
    for name, fn in (("totally_geodesic", lambda: detect_totally_geodesic_case(sv, tol)),
                     ("parallel", lambda: detect_parallel_case(sv, tol, circle_info)),
                     ("umbilical", lambda: detect_umbilical_case(sv, tol))):
        v = fn()
        if v.theorem is not Theorem.NONE:
            if circle_info and "circle" not in v.evidence:
                v = replace(v, evidence={**v.evidence, "circle": circle_info})
            return v
        attempts[name] = v.notes[0]
    ev = {"nabla_alpha_max": sv.max("nabla_alpha"), "umbilic_max": sv.max("umbilic"),
          "alpha_max": sv.max("alpha"), "rejected": attempts}
    return ClassificationVerdict(Theorem.NONE, "-", ev, {"nabla_alpha": (ev["nabla_alpha_max"], tol.parallel),
                                                         "umbilic": (ev["umbilic_max"], tol.umbilic)})


# --- reduction of codimension ----------------------------------------------------------------

class _RankChange(Exception):
    pass


@dataclass(frozen=True)
class DiagonalReduction:
    """Diagnostics of the route through the diagonal embedding when Phi vanishes."""

    ell: int
    n1_parallel_residual: float
    t_residual: float
    similarity_residual: float
    s_orthogonality: float
    passed: bool

    def to_dict(self) -> dict:
        return {"ell": self.ell, "n1_parallel_residual": self.n1_parallel_residual,
                "t_residual": self.t_residual, "similarity_residual": self.similarity_residual,
                "s_orthogonality": self.s_orthogonality, "passed": self.passed}


@dataclass(frozen=True)
class ReductionVerdict:
    side: str
    reducible_by: int
    witness_subbundle: Array
    witness_residual: float
    criteria_used: tuple[Criterion, ...]
    candidate_rank: int
    evidence: dict = field(default_factory=dict)
    indeterminate: bool = False
    notes: tuple[str, ...] = ()
    diagonal: Optional[DiagonalReduction] = None

    def __post_init__(self) -> None:
        if self.reducible_by > self.candidate_rank:
            raise ContractViolation("reduction exceeds the rank of the candidate subbundle")

    def to_dict(self) -> dict:
        return {"side": self.side, "reducible_by": self.reducible_by, "candidate_rank": self.candidate_rank,
                "witness_subbundle": _plain(self.witness_subbundle), "witness_residual": self.witness_residual,
                "criteria_used": [c.value for c in self.criteria_used], "evidence": _plain(self.evidence),
                "indeterminate": self.indeterminate, "notes": list(self.notes),
                "diagonal": None if self.diagonal is None else self.diagonal.to_dict()}


def _point_data(imm: ImmersionMap, y: Array, cfg: DiffConfig):
    def build():
        fp = frame_at(imm, y, cfg)
        return fp, second_fundamental_form(fp, imm, cfg), compute_tensors(fp)
    return _fields._memo(imm, ("cls-point", y.tobytes(), cfg.key()), build)


def _ambient_projector(fp: FramedPoint, basis: Array) -> Array:
    """Orthogonal projector onto span(Nf @ basis) as an ambient N x N matrix."""
    W = fp.normal_frame @ basis
    return W @ W.T * fp.ambient.signs[None, :]


def _base_subspace(imm: ImmersionMap, y: Array, cfg: DiffConfig, side: str, tol: Tolerances) -> Array:
    """Ambient basis of U cap N1-perp (left) or V cap N1-perp (right) at y."""
    fp, ed, pt = _point_data(imm, y, cfg)
    T = pt.T if side == "left" else np.eye(pt.p) - pt.T
    N1, _, _ = first_normal_space(ed.alpha, tol.kernel)
    M = np.vstack([T, N1.T]) if N1.size else T
    _, sv, vt = np.linalg.svd(M, full_matrices=True) if M.size else (None, np.zeros(0), np.eye(pt.p))
    full = np.zeros(pt.p)
    full[: sv.size] = sv
    return fp.normal_frame @ vt[full < tol.kernel].T


def _proj(imm: ImmersionMap, W: Array) -> Array:
    return W @ W.T * imm.ambient.signs[None, :]


class _SubspaceField:
    """Projector fields of the candidate subbundle and of its successive refinements.

    Level 0 is U cap N1-perp.  Level j + 1 keeps the vectors of level j whose
    normal derivative stays inside level j, which is where every parallel
    subbundle of level j must live.
    """

    def __init__(self, imm: ImmersionMap, cfg: DiffConfig, side: str, tol: Tolerances):
        self.imm, self.cfg, self.side, self.tol = imm, cfg, side, tol
        self.base_step = cfg.alpha_step(imm)
        self._cache: dict = {}

    def step(self, level: int) -> float:
        return self.base_step * 10 ** level

    def basis(self, y: Array, level: int) -> Array:
        key = (y.tobytes(), level)
        if key not in self._cache:
            if level == 0:
                self._cache[key] = _base_subspace(self.imm, y, self.cfg, self.side, self.tol)
            else:
                W = self.basis(y, level - 1)
                C = self.second_form(y, level - 1)
                if W.shape[1] == 0:
                    self._cache[key] = W
                else:
                    M = np.vstack([c @ W for c in C])
                    _, sv, vt = np.linalg.svd(M, full_matrices=True)
                    full = np.zeros(W.shape[1])
                    full[: sv.size] = sv
                    self._cache[key] = W @ vt[full < self.tol.reduction].T
        return self._cache[key]

    def projector(self, y: Array, level: int, rank: int) -> Array:
        W = self.basis(y, level)
        if W.shape[1] != rank:
            raise _RankChange
        return _proj(self.imm, W)

    def derivative(self, y: Array, level: int) -> Array:
        """d_k P_W for every chart axis k (shape m, N, N)."""
        r = self.basis(y, level).shape[1]
        return _fields.gradient(lambda z: self.projector(z, level, r), y, self.step(level), self.cfg.fd_order)

    def second_form(self, y: Array, level: int) -> list[Array]:
        """(P_N - P_W)(d_k P_W) P_W: the part of the normal derivative leaving W."""
        P_N = _fields.point_fields(self.imm, y, self.cfg, hessian=False).P_N
        P_W = _proj(self.imm, self.basis(y, level))
        return [(P_N - P_W) @ d @ P_W for d in self.derivative(y, level)]


def _normal_curvature_field(imm: ImmersionMap, cfg: DiffConfig, X: Array, Y: Array, xi: Array, h: float):
    """y -> R-perp(P_T X, P_T Y) P_N xi at y as an ambient vector."""
    def at(y):
        pf = _fields.point_fields(imm, y, cfg, hessian=False)
        dP = _fields.gradient(lambda z: _fields.point_fields(imm, z, cfg, hessian=False).P_N, y, h, cfg.fd_order)
        cx, cy = pf.Jplus @ X, pf.Jplus @ Y
        A = np.einsum("k,kab->ab", cx, dP)
        B = np.einsum("k,kab->ab", cy, dP)
        return pf.P_N @ (A @ B - B @ A) @ pf.P_N @ xi
    return at


def _curvature_route_residuals(imm: ImmersionMap, x: Array, cfg: DiffConfig, W: Array, dPW: Array,
                     fp: FramedPoint, ed: ExtrinsicData) -> tuple[float, float]:
    """Residuals of the two conditions on U cap N1-perp: nabla R-perp on W, and <nabla W, H>."""
    if W.shape[1] == 0:
        return 0.0, 0.0
    s = imm.ambient.signs
    H = fp.normal_frame @ ed.mean_curvature
    r2 = max(abs(float(np.dot(s * (d @ W[:, j]), H))) for d in dPW for j in range(W.shape[1]))
    h_in = cfg.tangent_step(imm)
    h_out = 10 * h_in
    _require_margin(imm, x, 2 * (h_in + h_out))
    P_N = _fields.point_fields(imm, x, cfg, hessian=False).P_N
    E = fp.tangent_frame
    m = E.shape[1]
    r1 = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            for j in range(W.shape[1]):
                fld = _normal_curvature_field(imm, cfg, E[:, a], E[:, b], W[:, j], h_in)
                grad = _fields.gradient(fld, x, h_out, cfg.fd_order)
                r1 = max(r1, float(np.max(np.abs(P_N @ grad.T))))
    return r1, r2


def _diagonal_route(imm: ImmersionMap, sv: Survey, cfg: DiffConfig, tol: Tolerances) -> Optional[DiagonalReduction]:
    k1, k2 = sv.k1, sv.k2
    if k1 * k2 == 0 or sv.max("Phi") >= tol.zero or k1 + k2 == 0:
        return None
    b2 = k1 / (k1 + k2)
    h = cfg.alpha_step(imm)
    ells, par, tres, sim, sorth = [], 0.0, 0.0, 0.0, 0.0

    def n1_basis(y):
        fp, ed, _ = _point_data(imm, y, cfg)
        return fp, first_normal_space(ed.alpha, tol.kernel)[0]

    for s in sv.samples:
        x = s.x
        fp, N1 = n1_basis(x)
        ell = N1.shape[1]
        ells.append(ell)
        if ell:
            tres = max(tres, float(np.linalg.norm(N1.T @ (s.pt.T - b2 * np.eye(s.pt.p)) @ N1)))
            sim = max(sim, similarity_check(fp, N1, b2))
            sorth = max(sorth, float(np.linalg.norm(s.pt.S.T @ N1)))

            def P(z, ell=ell):
                f, B = n1_basis(z)
                if B.shape[1] != ell:
                    raise _RankChange
                return _ambient_projector(f, B)
            try:
                _require_margin(imm, x, 2 * h)
                dP = _fields.gradient(P, x, h, cfg.fd_order)
            except _RankChange:
                par = math.inf
                continue
            P0 = P(x)
            P_N = _fields.point_fields(imm, x, cfg, hessian=False).P_N
            par = max(par, max(float(np.linalg.norm((P_N - P0) @ d @ P0)) for d in dP))
    if len(set(ells)) != 1:
        return DiagonalReduction(-1, par, tres, sim, sorth, False)
    ok = par < tol.reduction and tres < tol.zero and sim < tol.similarity and sorth < tol.zero
    return DiagonalReduction(ells[0], par, tres, sim, sorth, bool(ok))


def detect_codim_reduction(imm: ImmersionMap, sv: Survey, side: str = "left", cfg: DiffConfig = DiffConfig(),
                           tol: Tolerances = Tolerances(), max_levels: int | None = None) -> ReductionVerdict:
    """Reduction of codimension on one side, by a parallel witness and by the two equivalent tests."""
    if side not in ("left", "right"):
        raise ContractViolation("side must be 'left' or 'right'")
    exact = cfg.alpha_step(imm) == cfg.fd_step
    if max_levels is None:
        max_levels = 2 if exact else 1
    field_ = _SubspaceField(imm, cfg, side, tol)
    ranks, ells, wres, first_normal, route_1, route_2, levels = [], [], [], [], [], [], []
    indeterminate = False
    notes: list[str] = []
    witness = None
    for s in sv.samples:
        x = s.x
        fp, ed, _ = _point_data(imm, x, cfg)
        try:
            _require_margin(imm, x, 2 * field_.step(0))
            W0 = field_.basis(x, 0)
            ranks.append(W0.shape[1])
            if W0.shape[1] == 0:
                ells.append(0)
                wres.append(0.0)
                first_normal.append(0.0)
                route_1.append(0.0)
                route_2.append(0.0)
                levels.append(0)
                witness = W0 if witness is None else witness
                continue
            dP0 = field_.derivative(x, 0)
            P0 = _proj(imm, W0)
            N1 = first_normal_space(ed.alpha, tol.kernel)[0]
            P1 = _ambient_projector(fp, N1) if N1.size else np.zeros_like(P0)
            first_normal.append(max(float(np.linalg.norm(P1 @ d @ P0)) for d in dP0))
            r1, r2 = _curvature_route_residuals(imm, x, cfg, W0, dP0, fp, ed)
            route_1.append(r1)
            route_2.append(r2)
            ell, res, lev = 0, math.inf, 0
            for level in range(max_levels + 1):
                if not imm.box.contains(x, 2 * sum(field_.step(j) for j in range(level + 1))):
                    notes.append("refinement depth limited by the distance to the chart boundary")
                    break
                W = field_.basis(x, level)
                if W.shape[1] == 0:
                    ell, res, lev = 0, 0.0, level
                    break
                C = field_.second_form(x, level)
                res = max(float(np.linalg.norm(c)) for c in C)
                lev = level
                if res < tol.reduction:
                    ell = W.shape[1]
                    break
            else:
                notes.append(f"no parallel subbundle found within {max_levels} refinements at {x.tolist()}")
                ell = 0
            ells.append(ell)
            wres.append(res)
            levels.append(lev)
            if witness is None:
                witness = field_.basis(x, lev) if ell else np.zeros((imm.ambient.N, 0))
        except _RankChange:
            indeterminate = True
            notes.append(f"candidate rank changes near {x.tolist()}")
    if len(set(ranks)) > 1 or len(set(ells)) > 1:
        indeterminate = True
        notes.append(f"ranks vary over the grid: candidate {sorted(set(ranks))}, witness {sorted(set(ells))}")
    rank = max(ranks) if ranks else 0
    ell = min(ells) if ells else 0
    first_normal_max = max(first_normal) if first_normal else 0.0
    t1, t2 = (max(route_1) if route_1 else 0.0), (max(route_2) if route_2 else 0.0)
    first_normal_pass = first_normal_max < tol.reduction
    route_pass = t1 < tol.reduction and t2 < tol.reduction
    witness_pass = all(e == rank for e in ells) if ells else True
    criteria = [Criterion.WITNESS, Criterion.FIRST_NORMAL_INVARIANT, Criterion.NORMAL_CURVATURE_ROUTE]
    evidence = {"candidate_ranks": sorted(set(ranks)), "first_normal_residual": first_normal_max,
                "first_normal_pass": first_normal_pass, "curvature_route_normal_curvature": t1,
                "curvature_route_mean_curvature": t2, "curvature_route_pass": route_pass,
                "routes_agree": bool(first_normal_pass == route_pass and (not first_normal_pass or witness_pass)),
                "refinement_levels": sorted(set(levels)), "max_levels": max_levels}
    diag = _diagonal_route(imm, sv, cfg, tol)
    if diag is not None:
        criteria += [Criterion.DIAGONAL, Criterion.DIAGONAL_FIRST_NORMAL]
    if witness is None:
        witness = np.zeros((imm.ambient.N, 0))
    return ReductionVerdict(side, 0 if indeterminate else ell, witness,
                            float(max(wres)) if wres else 0.0, tuple(criteria), rank, evidence,
                            indeterminate, tuple(dict.fromkeys(notes)), diag)
