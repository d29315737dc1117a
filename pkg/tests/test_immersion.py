import math

import numpy as np
import pytest
import sympy as sp

from helpers import instance
from prodform.ambient import ProductAmbient
from prodform.errors import ContractViolation, DomainError, ImmersionDegenerate
from prodform.gallery import (diagonal_coefficients, make_diagonal, make_slice, round_sphere,
                              space_form_chart)
from prodform.immersion import (ChartBox, DiffConfig, ImmersionMap, frame_at, intrinsic_curvature,
                                second_derivative)


def _fd_jacobian(imm, x, h=1e-6):
    cols = []
    for i in range(imm.dim):
        e = np.zeros(imm.dim)
        e[i] = h
        cols.append((imm(x + e) - imm(x - e)) / (2 * h))
    return np.array(cols).T


def test_chart_box_grid_is_capped():
    box = ChartBox.cube(5, 1.0)
    assert len(box.grid()) <= 625
    assert len(ChartBox.cube(2, 1.0).grid()) == 25
    assert ChartBox.cube(3, 1.0).grid(1).tolist() == [[0.0, 0.0, 0.0]]


def test_chart_box_rejects_inverted_bounds():
    with pytest.raises(ContractViolation):
        ChartBox((0.0, 1.0), (1.0, 0.5))


def test_step_ladder():
    imm = instance("great_circle_slice").immersion
    cfg = DiffConfig(1e-5)
    assert cfg.tangent_step(imm) == cfg.alpha_step(imm) == 1e-5
    num = imm.numeric_only()
    assert cfg.tangent_step(num) == pytest.approx(1e-3)
    assert cfg.alpha_step(num) == pytest.approx(1e-2)
    assert cfg.hessian_step == pytest.approx(1e-3)


@pytest.mark.parametrize("step", [0.0, -1e-5, float("nan")])
def test_bad_fd_step(step):
    with pytest.raises(ContractViolation):
        DiffConfig(step)


def test_diagonal_frame_sizes_and_metric():
    inst = make_diagonal(1.0, 1.0, space_form_chart(0.5, 2))
    fp = frame_at(inst.immersion, [0.1, -0.2])
    assert fp.normal_frame.shape[1] == 2
    # round metric of curvature 1/2 in the angle chart: radius^2 diag(1, cos^2 x1)
    x1 = 0.1
    assert np.allclose(fp.metric, 2.0 * np.diag([1.0, math.cos(x1) ** 2]), atol=1e-12)
    k, a, b = diagonal_coefficients(1.0, 1.0)
    assert (k, a * a, b * b) == pytest.approx((0.5, 0.5, 0.5))


def test_slice_tangent_frame_in_first_block():
    inst = make_slice(round_sphere(1.0, 3, 2, 0.6), [1.0, 0.0], 1.0)
    fp = frame_at(inst.immersion, [0.2, 0.1])
    assert np.max(np.abs(fp.tangent_frame[inst.ambient.N1:])) == 0.0


def test_frame_metric_matches_direct_gram():
    imm = instance("generic_graph").immersion
    G = imm.ambient.gram
    for x in imm.box.grid(3):
        J = _fd_jacobian(imm, x)
        assert np.max(np.abs(frame_at(imm, x).metric - J.T @ G @ J)) < 1e-9


@pytest.mark.parametrize("name", ["generic_graph", "twisted_curve", "diagonal_small_sphere"])
def test_frames_are_orthonormal(name):
    imm = instance(name).immersion
    for x in imm.box.grid(2):
        assert frame_at(imm, x).orthonormality_defect() < 1e-12


def test_line_in_flat_factor_has_zero_acceleration():
    amb = ProductAmbient.of(1.0, 1, 0.0, 2)
    t = sp.Symbol("t", real=True)
    imm = ImmersionMap.from_sympy(amb, [t], [1, 0, 2 * t, -t + 1], ChartBox.cube(1, 1.0))
    assert np.all(second_derivative(imm, [0.3], 0, 0) == 0)
    assert np.max(np.abs(second_derivative(imm.numeric_only(), [0.3], 0, 0))) < 1e-8


def test_great_circle_acceleration_is_minus_position():
    imm = instance("great_circle_slice").immersion
    x = np.array([0.3])
    acc = second_derivative(imm.numeric_only(), x, 0, 0)
    p = imm(x)
    assert np.max(np.abs(acc[:3] + p[:3])) < 1e-6
    assert np.max(np.abs(acc[3:])) < 1e-9


@pytest.mark.parametrize("name", ["circle_x_circle", "diagonal_small_sphere", "weighted_sum_umbilical_3",
                                  "covered_umbilical", "generic_graph", "clifford_torus_slice"])
def test_numeric_hessian_matches_exact(name):
    imm = instance(name).immersion
    num = imm.numeric_only()
    for x in imm.box.grid(2):
        for i in range(imm.dim):
            for j in range(imm.dim):
                d = second_derivative(imm, x, i, j) - second_derivative(num, x, i, j)
                assert np.max(np.abs(d)) < 1e-7


def test_flat_chart_has_zero_curvature():
    imm = instance("plane_slice").immersion
    cs = intrinsic_curvature(imm, [0.1, 0.2])
    assert np.max(np.abs(cs.tensor)) < 1e-5


def test_unit_sphere_sectional_curvature():
    inst = make_slice(space_form_chart(1.0, 2), [1.0, 0.0], 1.0)
    x = [0.2, 0.1]
    fp = frame_at(inst.immersion, x)
    assert intrinsic_curvature(inst.immersion, x).sectional(fp.metric) == pytest.approx(1.0, abs=1e-4)


def test_diagonal_sectional_curvature_is_half():
    imm = instance("diagonal").immersion
    x = [0.1, 0.2]
    fp = frame_at(imm, x)
    assert intrinsic_curvature(imm, x).sectional(fp.metric) == pytest.approx(0.5, abs=1e-4)


def test_validate_catches_off_quadric_map():
    amb = ProductAmbient.of(1.0, 1, 1.0, 1)
    t = sp.Symbol("t", real=True)
    imm = ImmersionMap.from_sympy(amb, [t], [sp.cos(t), 1.1 * sp.sin(t), 1, 0], ChartBox.cube(1, 0.5))
    with pytest.raises(DomainError):
        imm.validate()


def test_validate_catches_rank_loss():
    amb = ProductAmbient.of(0.0, 2, 0.0, 1)
    u, v = sp.symbols("u v", real=True)
    imm = ImmersionMap.from_sympy(amb, [u, v], [u + v, u + v, 0], ChartBox.cube(2, 0.5))
    with pytest.raises(ImmersionDegenerate):
        imm.validate()


def test_affine_rechart_preserves_metric_invariants():
    imm = instance("circle_x_circle").immersion
    A = np.array([[0.5, 0.1], [0.0, 0.5]])
    re = imm.with_affine_chart(A, np.zeros(2), ChartBox.cube(2, 0.5))
    y = np.array([0.1, -0.2])
    g0 = frame_at(imm, A @ y).metric
    g1 = frame_at(re, y).metric
    assert np.allclose(g1, A.T @ g0 @ A, atol=1e-12)


@pytest.mark.parametrize("name", ["generic_graph", "covered_umbilical", "twisted_curve"])
def test_fd_jacobian_is_fourth_order(name):
    # in the truncation regime each halving of the step divides the error by about 16
    from prodform._fields import first_derivative
    imm = instance(name).immersion
    x = imm.box.center
    J = imm.exact_jacobian(x)
    errs = []
    for h in (8e-2, 4e-2, 2e-2):
        fd = np.stack([first_derivative(imm.evaluator, x, i, h) for i in range(imm.dim)], axis=-1)
        errs.append(float(np.max(np.abs(fd - J.reshape(fd.shape)))))
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_fd_jacobian_at_default_step_is_at_round_off():
    from prodform._fields import first_derivative
    imm = instance("generic_graph").immersion
    x = imm.box.center
    J = imm.exact_jacobian(x)
    for h in (1e-5, 5e-6):
        fd = np.stack([first_derivative(imm.evaluator, x, i, h) for i in range(imm.dim)], axis=-1)
        assert np.max(np.abs(fd - J.reshape(fd.shape))) < 1e-9
