"""Point-local jets and ambient projector fields.

Everything here is frame free: tangent and normal bundles are represented by
their projectors in the flat model, which depend smoothly on the chart point.
Differentiating projectors (rather than per-point frames, which are not smooth)
is what lets covariant derivatives be assembled by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import ContractViolation, ImmersionDegenerate

Array = NDArray[np.float64]

_MEMO_LIMIT = 50_000


def first_derivative(fun: Callable[[Array], Array], x: Array, axis: int, h: float, order: int = 4) -> Array:
    """Central difference of an array-valued function along one chart axis."""
    e = np.zeros_like(x)
    e[axis] = h
    if order == 2:
        return (np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h)
    f_m2 = np.asarray(fun(x - 2 * e))
    f_m1 = np.asarray(fun(x - e))
    f_p1 = np.asarray(fun(x + e))
    f_p2 = np.asarray(fun(x + 2 * e))
    return (f_m2 - 8 * f_m1 + 8 * f_p1 - f_p2) / (12 * h)


def second_derivative_fd(fun: Callable[[Array], Array], x: Array, i: int, j: int, h: float,
                         order: int = 4) -> Array:
    """Central second difference; the mixed case uses the tensor-product stencil."""
    if i != j:
        return first_derivative(lambda y: first_derivative(fun, y, j, h, order), x, i, h, order)
    e = np.zeros_like(x)
    e[i] = h
    f0 = np.asarray(fun(x))
    if order == 2:
        return (np.asarray(fun(x + e)) - 2 * f0 + np.asarray(fun(x - e))) / h ** 2
    return (-np.asarray(fun(x + 2 * e)) + 16 * np.asarray(fun(x + e)) - 30 * f0
            + 16 * np.asarray(fun(x - e)) - np.asarray(fun(x - 2 * e))) / (12 * h ** 2)


def gradient(fun: Callable[[Array], Array], x: Array, h: float, order: int = 4) -> Array:
    """Stack of partial derivatives along every chart axis (axis 0 = direction)."""
    return np.stack([first_derivative(fun, x, k, h, order) for k in range(x.shape[0])])


def _memo(imm, key, build):
    memo = imm._memo
    try:
        return memo[key]
    except KeyError:
        pass
    val = build()
    if len(memo) > _MEMO_LIMIT:
        memo.clear()
    memo[key] = val
    return val


def jet(imm, x: Array, cfg, hessian: bool = True) -> tuple[Array, Array, Array | None]:
    """(F, J, H) at x, exact where available and enabled, else by finite differences.

    J has shape (N, m) and H has shape (N, m, m).
    """
    x = np.asarray(x, dtype=float)
    key = ("jet", x.tobytes(), cfg.key(), hessian)

    def build():
        F = np.asarray(imm.evaluator(x), dtype=float).reshape(-1)
        if cfg.exact_jacobian(imm):
            J = np.asarray(imm.exact_jacobian(x), dtype=float).reshape(F.shape[0], imm.dim)
        else:
            J = gradient(imm.evaluator, x, cfg.fd_step, cfg.fd_order).T.reshape(F.shape[0], imm.dim)
        H = None
        if hessian:
            if cfg.exact_hessian(imm):
                H = np.asarray(imm.exact_hessian(x), dtype=float).reshape(F.shape[0], imm.dim, imm.dim)
            else:
                m = imm.dim
                H = np.empty((F.shape[0], m, m))
                hs = cfg.hessian_step
                for i in range(m):
                    for j in range(i, m):
                        H[:, i, j] = second_derivative_fd(imm.evaluator, x, i, j, hs, cfg.fd_order)
                        H[:, j, i] = H[:, i, j]
        return F, J, H

    return _memo(imm, key, build)


@dataclass(frozen=True)
class PointFields:
    """Jets plus the ambient projectors onto f_*TM, span{nu_i} and N_fM at a chart point."""

    x: Array
    F: Array
    J: Array
    H: Array | None
    signs: Array
    g: Array
    ginv: Array
    Jplus: Array
    P_T: Array
    P_nu: Array
    P_N: Array

    @property
    def alpha_coord(self) -> Array:
        """alpha_f(d_i, d_j) as ambient vectors, shape (m, m, N)."""
        if self.H is None:
            raise ContractViolation("second derivatives were not computed at this point")
        return np.einsum("ab,bij->ija", self.P_N, self.H)

    def alpha_ambient(self, X: Array, Y: Array) -> Array:
        """alpha_f(P_T X, P_T Y) for ambient vectors X, Y."""
        return np.einsum("ija,i,j->a", self.alpha_coord, self.Jplus @ X, self.Jplus @ Y)

    def mean_curvature(self) -> Array:
        m = self.J.shape[1]
        return np.einsum("ija,ij->a", self.alpha_coord, self.ginv) / m

    def shape_operator(self, xi: Array) -> Array:
        """A_xi as an ambient operator acting on tangent vectors (N x N)."""
        a = np.einsum("ija,a->ij", self.alpha_coord, self.signs * xi)
        return self.J @ self.ginv @ a @ self.Jplus


def point_fields(imm, x: Array, cfg, hessian: bool = True) -> PointFields:
    x = np.asarray(x, dtype=float)
    key = ("fields", x.tobytes(), cfg.key(), hessian)

    def build():
        F, J, H = jet(imm, x, cfg, hessian)
        amb = imm.ambient
        s = np.asarray(amb.signs)
        g = J.T @ (s[:, None] * J)
        try:
            ginv = np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise ImmersionDegenerate(f"singular induced metric at {x.tolist()}") from exc
        Jplus = ginv @ (J.T * s[None, :])
        P_T = J @ Jplus
        P_nu = np.zeros((amb.N, amb.N))
        for k, sl in ((amb.k1, slice(0, amb.N1)), (amb.k2, slice(amb.N1, amb.N))):
            if k != 0:
                pb = np.zeros(amb.N)
                pb[sl] = F[sl]
                P_nu += k * np.outer(pb, s * pb)
        P_N = np.eye(amb.N) - P_T - P_nu
        return PointFields(x, F, J, H, s, g, ginv, Jplus, P_T, P_nu, P_N)

    return _memo(imm, key, build)
