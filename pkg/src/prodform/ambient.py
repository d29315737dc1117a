"""Product ambient Q_{k1}^{n1} x Q_{k2}^{n2} and its flat model.

Each factor Q_k^n sits in a flat space R^N (N = n + 1 for k != 0, N = n for
k = 0) as the quadric <X, X> = 1/k; a negatively curved factor uses the
Lorentzian form with a minus sign on its first coordinate.  Stacking the two
flat spaces gives R^{N1+N2}_mu, mu the number of hyperbolic factors, and the
product embeds there through the map h.  Ambient vectors are plain numpy arrays
of length N1 + N2 whose first N1 entries form the factor-1 block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ContractViolation, DomainError, UnsupportedError

AmbientVector = NDArray[np.float64]

QUADRIC_TOL = 1e-9


@dataclass(frozen=True)
class SpaceFormSpec:
    """Curvature and dimension of one factor Q_k^n."""

    k: float
    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ContractViolation(f"space form dimension must be a positive integer, got {self.n!r}")
        if not math.isfinite(self.k):
            raise ContractViolation(f"curvature must be finite, got {self.k!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", float(self.k))

    @property
    def flat_dim(self) -> int:
        return self.n + 1 if self.k != 0 else self.n

    @property
    def index(self) -> int:
        """Metric index of the flat model: 1 for hyperbolic factors."""
        return 1 if self.k < 0 else 0

    @property
    def radius(self) -> Optional[float]:
        return 1.0 / math.sqrt(abs(self.k)) if self.k != 0 else None

    @property
    def epsilon(self) -> int:
        """Sign of the position normal's self inner product (0 when flat)."""
        return int(np.sign(self.k))

    def signs(self) -> NDArray[np.float64]:
        s = np.ones(self.flat_dim)
        if self.k < 0:
            s[0] = -1.0
        return s

    def quadric_defect(self, block: NDArray[np.float64]) -> float:
        if self.k == 0:
            return 0.0
        val = float(np.dot(self.signs() * block, block))
        return abs(val - 1.0 / self.k)

    def label(self) -> str:
        kind = "S" if self.k > 0 else ("H" if self.k < 0 else "R")
        return f"{kind}^{self.n}({self.k:g})"


@dataclass(frozen=True)
class ProductAmbient:
    """The product Q_{k1}^{n1} x Q_{k2}^{n2} together with its flat model."""

    factor1: SpaceFormSpec
    factor2: SpaceFormSpec

    @classmethod
    def of(cls, k1: float, n1: int, k2: float, n2: int) -> "ProductAmbient":
        return cls(SpaceFormSpec(k1, n1), SpaceFormSpec(k2, n2))

    @property
    def k1(self) -> float:
        return self.factor1.k

    @property
    def k2(self) -> float:
        return self.factor2.k

    @property
    def n1(self) -> int:
        return self.factor1.n

    @property
    def n2(self) -> int:
        return self.factor2.n

    @property
    def N1(self) -> int:
        return self.factor1.flat_dim

    @property
    def N2(self) -> int:
        return self.factor2.flat_dim

    @property
    def N(self) -> int:
        return self.N1 + self.N2

    @property
    def dim(self) -> int:
        return self.n1 + self.n2

    @property
    def mu(self) -> int:
        return self.factor1.index + self.factor2.index

    def phi_coefficients(self) -> tuple[float, float]:
        """(k1, k1 + k2), so that Phi = k1 I - (k1 + k2) R."""
        return self.k1, self.k1 + self.k2

    @cached_property
    def signs(self) -> NDArray[np.float64]:
        s = np.concatenate([self.factor1.signs(), self.factor2.signs()])
        s.setflags(write=False)
        return s

    @cached_property
    def gram(self) -> NDArray[np.float64]:
        g = np.diag(self.signs)
        g.setflags(write=False)
        return g

    @cached_property
    def pi1(self) -> NDArray[np.float64]:
        p = np.zeros((self.N, self.N))
        p[: self.N1, : self.N1] = np.eye(self.N1)
        p.setflags(write=False)
        return p

    @cached_property
    def pi2(self) -> NDArray[np.float64]:
        p = np.zeros((self.N, self.N))
        p[self.N1:, self.N1:] = np.eye(self.N2)
        p.setflags(write=False)
        return p

    def block1(self, v: AmbientVector) -> NDArray[np.float64]:
        return np.asarray(v)[..., : self.N1]

    def block2(self, v: AmbientVector) -> NDArray[np.float64]:
        return np.asarray(v)[..., self.N1:]

    def join(self, b1, b2) -> AmbientVector:
        return np.concatenate([np.asarray(b1, float), np.asarray(b2, float)])

    def quadric_defects(self, p: AmbientVector) -> tuple[float, float]:
        p = self.check_vector(p)
        return (self.factor1.quadric_defect(self.block1(p)),
                self.factor2.quadric_defect(self.block2(p)))

    def on_quadric(self, p: AmbientVector, tol: float = QUADRIC_TOL) -> bool:
        return max(self.quadric_defects(p)) <= tol

    def require_on_quadric(self, p: AmbientVector, tol: float = QUADRIC_TOL) -> AmbientVector:
        d1, d2 = self.quadric_defects(p)
        if max(d1, d2) > tol:
            raise DomainError(f"point is off the product quadric (defects {d1:.3e}, {d2:.3e}, tol {tol:g})")
        return np.asarray(p, float)

    def check_vector(self, v: AmbientVector) -> AmbientVector:
        arr = np.asarray(v, dtype=float)
        if arr.shape != (self.N,):
            raise ContractViolation(f"expected an ambient vector of length {self.N}, got shape {arr.shape}")
        return arr

    def random_point(self, rng: np.random.Generator) -> AmbientVector:
        """A random point of the product quadric (hyperbolic factors use the upper sheet)."""
        blocks = []
        for f in (self.factor1, self.factor2):
            if f.k > 0:
                u = rng.standard_normal(f.flat_dim)
                blocks.append(f.radius * u / np.linalg.norm(u))
            elif f.k < 0:
                u = rng.standard_normal(f.n)
                blocks.append(np.concatenate([[math.sqrt(f.radius ** 2 + u @ u)], u]))
            else:
                blocks.append(rng.standard_normal(f.flat_dim))
        return self.join(*blocks)

    def random_tangent(self, p: AmbientVector, rng: np.random.Generator) -> AmbientVector:
        """A random vector tangent to the product at p."""
        v = rng.standard_normal(self.N)
        for nu in h_normals(p, self):
            if nu is not None:
                v = v - flat_inner(v, nu, self) / flat_inner(nu, nu, self) * nu
        return v

    def label(self) -> str:
        return f"{self.factor1.label()} x {self.factor2.label()}"


def flat_inner(v: AmbientVector, w: AmbientVector, amb: ProductAmbient) -> float:
    """Signature-mu inner product of the flat model."""
    v = amb.check_vector(v)
    w = amb.check_vector(w)
    return float(np.dot(amb.signs * v, w))


def project_factor2_tangent(v: AmbientVector, p: AmbientVector, amb: ProductAmbient) -> AmbientVector:
    """Derivative of the projection onto the second factor, applied to v at p.

    For v tangent to the product this is just the factor-2 block of v padded
    with zeros in block 1.
    """
    v = amb.check_vector(v)
    amb.require_on_quadric(p)
    out = np.zeros(amb.N)
    out[amb.N1:] = v[amb.N1:]
    return out


def _position_blocks(p: AmbientVector, amb: ProductAmbient) -> tuple[AmbientVector, AmbientVector]:
    """The factor-i position vectors, each padded to a full ambient vector."""
    p1 = np.zeros(amb.N)
    p2 = np.zeros(amb.N)
    p1[: amb.N1] = p[: amb.N1]
    p2[amb.N1:] = p[amb.N1:]
    return p1, p2


def h_normals(p: AmbientVector, amb: ProductAmbient) -> tuple[Optional[AmbientVector], Optional[AmbientVector]]:
    """Unit position normals nu_i = (factor-i block of p) / r_i; None for flat factors."""
    p = amb.require_on_quadric(amb.check_vector(p))
    blocks = _position_blocks(p, amb)
    out: list[Optional[AmbientVector]] = []
    for f, b in zip((amb.factor1, amb.factor2), blocks):
        out.append(None if f.k == 0 else b / f.radius)
    return out[0], out[1]


def alpha_h(X: AmbientVector, Y: AmbientVector, p: AmbientVector, amb: ProductAmbient) -> AmbientVector:
    """Second fundamental form of h at p on tangent vectors X, Y."""
    X = amb.check_vector(X)
    Y = amb.check_vector(Y)
    p = amb.require_on_quadric(amb.check_vector(p))
    p1, p2 = _position_blocks(p, amb)
    s = amb.signs
    c1 = float(np.dot(s[: amb.N1] * X[: amb.N1], Y[: amb.N1]))
    c2 = float(np.dot(s[amb.N1:] * X[amb.N1:], Y[amb.N1:]))
    return -amb.k1 * c1 * p1 - amb.k2 * c2 * p2


def theta_vector(p: AmbientVector, amb: ProductAmbient) -> AmbientVector:
    """-k1 pi1(p) + k2 pi2(p); agrees with theta_field when both factors are curved
    and degrades to the surviving term when one factor is flat."""
    p1, p2 = _position_blocks(np.asarray(p, float), amb)
    return -amb.k1 * p1 + amb.k2 * p2


def theta_field(p: AmbientVector, amb: ProductAmbient) -> AmbientVector:
    """The normal field theta = -(eps1/r1) nu1 + (eps2/r2) nu2 of F = h o f."""
    if amb.k1 == 0 or amb.k2 == 0:
        raise UnsupportedError("theta is only defined when both factors are curved")
    nu1, nu2 = h_normals(p, amb)
    f1, f2 = amb.factor1, amb.factor2
    return -(f1.epsilon / f1.radius) * nu1 + (f2.epsilon / f2.radius) * nu2
