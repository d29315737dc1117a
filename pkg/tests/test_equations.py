import numpy as np
import pytest

from helpers import instance
from prodform import gallery
from prodform.equations import (ambient_curvature_terms, equation_report, equation_terms, gauss_residual,
                                ricci_residual, umbilical_equation_residuals, wedge)
from prodform.tensors import tensors_at


def test_wedge_is_skew():
    X, Y = np.array([1.0, 2.0, 0.0]), np.array([0.0, 1.0, -1.0])
    W = wedge(X, Y)
    assert np.allclose(W, -W.T)
    Z = np.array([0.5, 0.0, 1.0])
    assert np.allclose(W @ Z, (Y @ Z) * X - (X @ Z) * Y)


@pytest.mark.parametrize("name", gallery.gallery_names())
def test_fundamental_equations_on_gallery(name):
    imm = instance(name).immersion
    rep = equation_report(imm, imm.box.grid(2))
    assert rep.gauss_residual < 1e-3
    assert rep.codazzi_residual < 1e-4
    assert rep.codazzi_shape_residual < 1e-4
    assert rep.ricci_residual < 1e-4


def test_report_points_at_worst_sample():
    imm = instance("generic_graph").immersion
    pts = imm.box.grid(2)
    rep = equation_report(imm, pts, threads=1)
    worst = rep.worst["gauss"]["point"]
    assert gauss_residual(imm, worst) == pytest.approx(rep.gauss_residual)
    assert len(rep.worst["ricci"]["indices"]) == 3
    assert set(rep.to_dict()["stats"]) == {"gauss", "codazzi", "codazzi_shape", "ricci"}


def test_slice_ambient_term_is_space_form_curvature():
    pt = tensors_at(instance("great_sphere_slice").immersion, [0.1, 0.1])
    d = np.eye(pt.m)
    expected = np.einsum("bc,ad->abcd", d, d) - np.einsum("ac,bd->abcd", d, d)
    assert np.allclose(ambient_curvature_terms(pt), pt.k1 * expected, atol=1e-14)


@pytest.mark.parametrize("name", ["weighted_sum_umbilical_3", "covered_umbilical"])
def test_umbilical_specialisations(name):
    imm = instance(name).immersion
    for x in imm.box.grid(2):
        res = umbilical_equation_residuals(imm, x)
        assert res["gauss"] < 1e-6
        assert res["codazzi"] < 1e-5
        assert res["codazzi_shape"] < 1e-5
        assert res["ricci"] < 1e-4


def test_parallel_instance_has_vanishing_codazzi_source():
    # nabla alpha = 0 forces <Phi X, Z> SY = <Phi Y, Z> SX
    imm = instance("weighted_sum").immersion
    for x in imm.box.grid(2):
        t = equation_terms(imm, x)
        assert np.max(np.abs(t.codazzi_rhs)) < 1e-4
        assert np.max(np.abs(t.codazzi_lhs)) < 1e-4


def test_product_normal_curvature_is_shape_commutator():
    imm = instance("circle_x_circle").immersion
    for x in imm.box.grid(2):
        assert ricci_residual(imm, x) < 1e-4


def test_slice_normal_bundle_is_flat():
    imm = instance("small_sphere_slice").immersion
    t = equation_terms(imm, [0.1, 0.2])
    assert np.max(np.abs(t.ricci_lhs)) < 1e-4
