import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from prodform.ambient import (ProductAmbient, SpaceFormSpec, alpha_h, flat_inner, h_normals,
                              project_factor2_tangent, theta_field, theta_vector)
from prodform.errors import ContractViolation, DomainError, UnsupportedError

curvatures = st.sampled_from([-4.0, -1.0, -0.25, 0.0, 0.5, 1.0, 4.0])
dims = st.integers(1, 4)


def test_spherical_product_uses_euclidean_dot():
    amb = ProductAmbient.of(1, 2, 1, 3)
    rng = np.random.default_rng(0)
    v, w = rng.normal(size=(2, amb.N))
    assert amb.N == 7
    assert flat_inner(v, w, amb) == pytest.approx(float(v @ w))


def test_hyperbolic_time_coordinate_is_negative():
    amb = ProductAmbient.of(-1, 2, 1, 2)
    e0 = np.zeros(amb.N)
    e0[0] = 1
    assert flat_inner(e0, e0, amb) == -1.0
    assert amb.mu == 1


def test_signs_match_sign_by_sign_sum():
    # independent oracle: each hyperbolic factor puts -1 on its first flat coordinate
    amb = ProductAmbient.of(-1, 3, -4, 2)
    rng = np.random.default_rng(5)
    v, w = rng.normal(size=(2, amb.N))
    table = [1.0] * amb.N
    table[0] = -1.0
    table[4] = -1.0
    assert flat_inner(v, w, amb) == pytest.approx(sum(t * a * b for t, a, b in zip(table, v, w)))
    assert amb.mu == 2


def test_flat_factor_has_no_extra_coordinate():
    assert SpaceFormSpec(0.0, 3).flat_dim == 3
    assert SpaceFormSpec(2.0, 3).flat_dim == 4


@pytest.mark.parametrize("n", [0, -1, 1.5, True])
def test_bad_dimensions_rejected(n):
    with pytest.raises(ContractViolation):
        SpaceFormSpec(1.0, n)


def test_wrong_length_vector_rejected():
    amb = ProductAmbient.of(1, 2, 1, 2)
    with pytest.raises(ContractViolation):
        flat_inner(np.ones(5), np.ones(6), amb)


def test_off_quadric_point_rejected():
    amb = ProductAmbient.of(1, 2, 1, 2)
    with pytest.raises(DomainError):
        h_normals(np.ones(amb.N), amb)


@given(curvatures, dims, curvatures, dims, st.integers(0, 2 ** 31))
def test_random_points_lie_on_quadric(k1, n1, k2, n2, seed):
    amb = ProductAmbient.of(k1, n1, k2, n2)
    p = amb.random_point(np.random.default_rng(seed))
    assert max(amb.quadric_defects(p)) < 1e-9 * max(1.0, float(np.abs(p).max()) ** 2)


def test_factor2_projection_blocks():
    amb = ProductAmbient.of(1, 2, 1, 2)
    p = amb.random_point(np.random.default_rng(1))
    v1 = np.r_[1.0, 2.0, 3.0, 0, 0, 0]
    v2 = np.r_[0, 0, 0, 1.0, -1.0, 2.0]
    assert np.all(project_factor2_tangent(v1, p, amb) == 0)
    assert np.allclose(project_factor2_tangent(v2, p, amb), v2)


def test_position_normals_of_unit_spheres():
    amb = ProductAmbient.of(1, 2, 1, 2)
    p = np.r_[1.0, 0, 0, 1.0, 0, 0]
    nu1, nu2 = h_normals(p, amb)
    assert np.allclose(nu1, [1, 0, 0, 0, 0, 0])
    assert np.allclose(nu2, [0, 0, 0, 1, 0, 0])


def test_hyperbolic_position_normal_is_timelike():
    amb = ProductAmbient.of(-1, 2, 1, 1)
    p = amb.random_point(np.random.default_rng(3))
    nu1, _ = h_normals(p, amb)
    assert flat_inner(nu1, nu1, amb) == pytest.approx(-1.0)


def test_flat_factor_has_no_position_normal():
    amb = ProductAmbient.of(1, 2, 0, 2)
    p = amb.random_point(np.random.default_rng(3))
    assert h_normals(p, amb)[1] is None


def test_alpha_h_cross_terms_vanish():
    amb = ProductAmbient.of(1, 2, 1, 2)
    rng = np.random.default_rng(2)
    p = amb.random_point(rng)
    X = amb.random_tangent(p, rng)
    Y = amb.random_tangent(p, rng)
    X[amb.N1:] = 0
    Y[: amb.N1] = 0
    assert np.all(alpha_h(X, Y, p, amb) == 0)


def test_alpha_h_unit_vector_in_block1():
    amb = ProductAmbient.of(1, 2, 1, 2)
    p = np.r_[1.0, 0, 0, 0, 1.0, 0]
    X = np.r_[0, 1.0, 0, 0, 0, 0]
    assert np.allclose(alpha_h(X, X, p, amb), -np.r_[p[:3], 0, 0, 0])


@pytest.mark.parametrize("k1,k2", [(1.0, 1.0), (-1.0, 2.0), (4.0, 0.0)])
def test_alpha_h_matches_geodesic_acceleration(k1, k2):
    # a product geodesic c(t) in the quadric has c'' = alpha_h(c', c')
    amb = ProductAmbient.of(k1, 2, k2, 2)
    rng = np.random.default_rng(11)
    p = amb.random_point(rng)
    v = amb.random_tangent(p, rng)

    def geodesic(t):
        out = np.empty(amb.N)
        for f, sl in ((amb.factor1, slice(0, amb.N1)), (amb.factor2, slice(amb.N1, amb.N))):
            q, w = p[sl], v[sl]
            s = f.signs()
            speed = math.sqrt(abs(float(np.dot(s * w, w))))
            if f.k == 0 or speed == 0:
                out[sl] = q + t * w
            elif f.k > 0:
                a = math.sqrt(f.k) * speed
                out[sl] = q * math.cos(a * t) + w / speed / math.sqrt(f.k) * math.sin(a * t)
            else:
                a = math.sqrt(-f.k) * speed
                out[sl] = q * math.cosh(a * t) + w / speed / math.sqrt(-f.k) * math.sinh(a * t)
        return out

    h = 1e-3
    acc = (-geodesic(2 * h) + 16 * geodesic(h) - 30 * geodesic(0) + 16 * geodesic(-h) - geodesic(-2 * h)) / (12 * h * h)
    assert np.max(np.abs(acc - alpha_h(v, v, p, amb))) < 1e-6


@pytest.mark.parametrize("k1,k2,expected", [(1.0, 1.0, 2.0), (1.0, -1.0, 0.0), (4.0, 0.5, 4.5)])
def test_theta_norm_is_curvature_sum(k1, k2, expected):
    amb = ProductAmbient.of(k1, 2, k2, 3)
    p = amb.random_point(np.random.default_rng(7))
    th = theta_field(p, amb)
    assert flat_inner(th, th, amb) == pytest.approx(expected, abs=1e-12)
    assert np.allclose(th, theta_vector(p, amb))


def test_theta_orthogonal_to_position():
    amb = ProductAmbient.of(1.0, 2, -2.0, 2)
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = amb.random_point(rng)
        assert abs(flat_inner(theta_field(p, amb), p, amb)) < 1e-9


def test_theta_needs_two_curved_factors():
    amb = ProductAmbient.of(1.0, 2, 0.0, 2)
    with pytest.raises(UnsupportedError):
        theta_field(amb.random_point(np.random.default_rng(0)), amb)
