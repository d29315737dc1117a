"""Extrinsic circles of S^2(r) x R by integrating their Frenet system.

A unit-speed curve gamma = (c, z) with constant curvature kappa and parallel
curvature vector has vertical speed z' = A cos(kappa t); the spherical part
then satisfies the linear third-order equation

    c''' + (kappa^2 + a / r^2) c' + (3 a' / (2 r^2)) c = 0,   a = 1 - z'^2,

with c(0) on the sphere, c'(0) tangent of length sqrt(1 - A^2) and
c''(0) = kappa u - (a(0) / r^2) c(0) for the unit tangent u normal to c'(0).
The solution is sampled densely and replaced by Chebyshev interpolants, so
the resulting evaluator is smooth enough for finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.integrate import solve_ivp

from .errors import ContractViolation


@dataclass(frozen=True)
class FrenetCircle:
    """Extrinsic circle of curvature kappa in S^2(radius) x R with vertical amplitude A."""

    radius: float
    kappa: float
    amplitude: float
    half_length: float = 2.0
    degree: int = 90

    def __post_init__(self) -> None:
        if not (self.radius > 0 and self.kappa > 0):
            raise ContractViolation("radius and curvature must be positive")
        if not (0 <= self.amplitude < 1):
            raise ContractViolation("vertical amplitude must lie in [0, 1)")

    def _rhs(self, t, y):
        r2 = self.radius ** 2
        A, k = self.amplitude, self.kappa
        a = 1 - (A * math.cos(k * t)) ** 2
        da = 2 * A * A * k * math.cos(k * t) * math.sin(k * t)
        c, dc, ddc = y[0:3], y[3:6], y[6:9]
        dddc = -(k * k + a / r2) * dc - (1.5 * da / r2) * c
        return np.concatenate([dc, ddc, dddc])

    @cached_property
    def _interpolants(self) -> list[Chebyshev]:
        r = self.radius
        A, k = self.amplitude, self.kappa
        c0 = np.array([r, 0.0, 0.0])
        dc0 = np.array([0.0, math.sqrt(1 - A * A), 0.0])
        u = np.array([0.0, 0.0, 1.0])
        ddc0 = k * u - ((1 - A * A) / r ** 2) * c0
        y0 = np.concatenate([c0, dc0, ddc0])
        T = self.half_length
        fwd = solve_ivp(self._rhs, (0, T), y0, method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
        bwd = solve_ivp(self._rhs, (0, -T), y0, method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)

        def sample(ts):
            ts = np.atleast_1d(ts)
            out = np.empty((9, ts.size))
            pos = ts >= 0
            if np.any(pos):
                out[:, pos] = fwd.sol(ts[pos])
            if np.any(~pos):
                out[:, ~pos] = bwd.sol(ts[~pos])
            return out

        return [Chebyshev.interpolate(lambda t, i=i: sample(t)[i], self.degree, domain=[-T, T]) for i in range(3)]

    def sphere_part(self, t: float) -> np.ndarray:
        c = np.array([p(t) for p in self._interpolants])
        return self.radius * c / np.linalg.norm(c)

    def height(self, t: float) -> float:
        if self.amplitude == 0:
            return 0.0
        return self.amplitude / self.kappa * math.sin(self.kappa * t)

    def __call__(self, t: float) -> np.ndarray:
        """gamma(t) in R^3 x R."""
        return np.concatenate([self.sphere_part(t), [self.height(t)]])


def curve_residual(curve, t: float, radius: float, h: float = 3e-3) -> dict:
    """Brute-force checks of unit speed and of the normal parallelism of the curvature vector.

    `curve` maps t to a point of S^2(radius) x R inside R^3 x R.
    """
    def d1(fn, s):
        return (fn(s - 2 * h) - 8 * fn(s - h) + 8 * fn(s + h) - fn(s + 2 * h)) / (12 * h)

    def tangent_projector(p):
        c = p[:3]
        P = np.eye(4)
        P[:3, :3] -= np.outer(c, c) / radius ** 2
        return P

    def velocity(s):
        return d1(curve, s)

    def curvature_vector(s):
        p = curve(s)
        return tangent_projector(p) @ d1(velocity, s)

    p = curve(t)
    T = velocity(t)
    K = curvature_vector(t)
    DK = tangent_projector(p) @ d1(curvature_vector, t)
    normal_part = DK - np.dot(DK, T) / np.dot(T, T) * T
    return {"speed_defect": abs(float(np.linalg.norm(T)) - 1.0),
            "curvature": float(np.linalg.norm(K)),
            "normal_derivative": float(np.linalg.norm(normal_part))}
