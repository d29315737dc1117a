import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from helpers import instance
from prodform import gallery
from prodform.errors import UnsupportedError
from prodform.extrinsic import extrinsic_at
from prodform.gallery import (composition_data, inclusion_normal_map, make_composition, pullback,
                              standard_inclusion)
from prodform.immersion import ChartBox, DiffConfig, frame_at
from prodform.tensors import (ProductTensors, algebraic_identity_residuals, braid_check, compute_tensors,
                              composition_residuals, differential_identity_residuals, differential_terms,
                              extract_subbundles, inclusion_residuals, similarity_check, tensors_at,
                              theta_shape_residual, umbilical_identity_residuals, vertical_decomposition)


def test_slice_tensors():
    inst = instance("great_sphere_slice")
    pt = tensors_at(inst.immersion, [0.1, 0.2])
    assert np.max(np.abs(pt.R)) < 1e-15
    assert np.max(np.abs(pt.S)) < 1e-15
    w = np.linalg.eigvalsh(pt.T)
    # normals: the factor-2 tangent space (n2 = 3) plus two normals inside S^4
    assert w == pytest.approx([0, 0, 1, 1, 1], abs=1e-12)


def test_product_tensors_split():
    pt = tensors_at(instance("sphere_x_circle").immersion, [0.1, 0.2, 0.3])
    assert np.max(np.abs(pt.S)) < 1e-14
    assert np.linalg.eigvalsh(pt.R) == pytest.approx([0, 0, 1], abs=1e-12)


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4, math.pi / 3])
def test_weighted_sum_R_is_scalar(theta):
    pt = tensors_at(instance("weighted_sum", theta=theta).immersion, [0.1, -0.2])
    assert np.max(np.abs(pt.R - math.sin(theta) ** 2 * np.eye(2))) < 1e-12


@pytest.mark.parametrize("name", gallery.gallery_names())
def test_algebraic_identities_on_gallery(name):
    imm = instance(name).immersion
    for x in imm.box.grid(2):
        assert max(algebraic_identity_residuals(tensors_at(imm, x))) < 1e-8


def test_S_zero_reduces_first_identity_to_projection():
    pt = tensors_at(instance("circle_x_circle").immersion, [0.0, 0.3])
    r1 = algebraic_identity_residuals(pt)[0]
    assert r1 == pytest.approx(np.linalg.norm(pt.R @ (np.eye(2) - pt.R)), abs=1e-15)
    assert r1 < 1e-14


@given(st.floats(-1, 1), st.integers(0, 10_000))
def test_corrupted_S_is_detected_at_matching_magnitude(scale, seed):
    pt = tensors_at(instance("weighted_sum").immersion, [0.1, 0.1])
    rng = np.random.default_rng(seed)
    E = rng.normal(size=pt.S.shape)
    E *= 1e-3 / np.linalg.norm(E)
    bad = ProductTensors(pt.L, pt.K, pt.R, pt.S + E, pt.T, pt.Phi, pt.k1, pt.k2)
    worst = max(algebraic_identity_residuals(bad))
    assert 1e-4 < worst < 1e-2


@pytest.mark.parametrize("name", ["circle_x_circle", "weighted_sum", "generic_graph", "covered_umbilical",
                                  "diagonal_small_sphere_5_5", "full_circle_x_line"])
def test_differential_identities(name):
    imm = instance(name).immersion
    for x in imm.box.grid(2):
        assert max(differential_identity_residuals(imm, x)) < 1e-4


def test_parallel_R_when_S_vanishes():
    terms = differential_terms(instance("circle_x_circle").immersion, [0.2, 0.1])
    assert np.linalg.norm(terms.dR) < 1e-4


@pytest.mark.parametrize("name", ["weighted_sum_umbilical_3", "covered_umbilical", "small_sphere_slice"])
def test_umbilical_forms_agree(name):
    imm = instance(name).immersion
    for x in imm.box.grid(2):
        assert max(umbilical_identity_residuals(differential_terms(imm, x))) < 1e-6


def test_umbilical_forms_differ_off_umbilics():
    terms = differential_terms(instance("circle_x_circle").immersion, [0.2, 0.1])
    assert max(umbilical_identity_residuals(terms)) > 1e-2


def test_slice_subbundles():
    inst = instance("great_sphere_slice")
    fp = frame_at(inst.immersion, [0.1, 0.2])
    sub = extract_subbundles(compute_tensors(fp))
    assert sub.ranks["U"] == 2 and sub.ranks["V"] == 3
    N1 = inst.ambient.N1
    assert np.max(np.abs((fp.normal_frame @ sub.U)[N1:])) < 1e-12
    assert np.max(np.abs((fp.normal_frame @ sub.V)[:N1])) < 1e-12
    assert sub.normal_splitting_defect() < 1e-12


def test_rank_one_S_splits_normal_space():
    imm = instance("covered_umbilical").immersion
    for x in imm.box.grid(2):
        fp = frame_at(imm, x)
        sub = extract_subbundles(compute_tensors(fp))
        assert sub.ranks["ker_S"] == 2
        assert sub.ranks["U"] + sub.ranks["V"] == fp.codim - 1
        assert sub.splitting_defect() < 1e-9
        assert sub.ranks == sub.loose_ranks


def test_swapped_tensors():
    pt = tensors_at(instance("weighted_sum_umbilical_3").immersion, [0.1, 0.0, 0.1])
    sw = pt.swapped()
    assert np.allclose(sw.R + pt.R, np.eye(3))
    assert np.allclose(sw.swapped().R, pt.R)
    assert (sw.k1, sw.k2) == (pt.k2, pt.k1)
    assert max(algebraic_identity_residuals(sw)) < 1e-12


def test_diagonal_pushes_inner_normals_to_eigenvalue_b2():
    g = instance("diagonal").immersion
    t = sp.Symbol("t", real=True)
    chart = [sp.Rational(3, 10) * t, sp.Rational(1, 5) * sp.sin(t)]
    F = pullback(g, [t], chart, ChartBox.cube(1, 0.8))
    cd = composition_data(g, F, lambda x: np.array([0.3 * x[0], 0.2 * math.sin(x[0])]), [0.1])
    b2 = instance("diagonal").expected.extra["b2"]
    assert np.max(np.abs(cd.G.T @ cd.F.T @ cd.G - b2 * np.eye(cd.G.shape[1]))) < 1e-10
    assert max(composition_residuals(cd).values()) < 1e-8
    fp = frame_at(F, [0.1])
    _, _, vt = np.linalg.svd(cd.G.T)
    assert similarity_check(fp, cd.G, b2) < 1e-10


@pytest.mark.parametrize("outer", ["generic_graph", "weighted_sum_umbilical_3"])
def test_six_composition_relations_for_curves(outer):
    g = instance(outer).immersion
    m = g.dim
    t = sp.Symbol("t", real=True)
    coeffs = [sp.Rational(1, 5) * (i + 1) for i in range(m)]
    chart = [c * sp.sin(t + i) for i, c in enumerate(coeffs)]
    F = pullback(g, [t], chart, ChartBox.cube(1, 0.8))
    fbar = sp.lambdify([t], chart)
    for x in (-0.3, 0.0, 0.4):
        cd = composition_data(g, F, lambda y: np.array(fbar(y[0]), float), [x])
        assert max(composition_residuals(cd).values()) < 1e-8


def test_inclusion_keeps_tensors():
    inner = instance("great_circle_slice")
    outer = instance("great_circle_slice_4_3")
    M = np.zeros((outer.ambient.N, inner.ambient.N))
    M[:3, :3] = np.eye(3)
    M[5:8, 3:] = np.eye(3)
    for x in ([0.0], [0.3]):
        J = inclusion_normal_map(inner.immersion, outer.immersion, M, x)
        res = inclusion_residuals(tensors_at(inner.immersion, x), tensors_at(outer.immersion, x), J)
        assert max(res.values()) < 1e-12


def test_identity_inclusion_is_bit_identical():
    inner = instance("circle_x_circle")
    same = make_composition(inner, (np.eye(3), np.eye(3)))
    x = [0.1, 0.2]
    a, b = tensors_at(inner.immersion, x), tensors_at(same.immersion, x)
    for k in ("R", "S", "T"):
        assert np.array_equal(getattr(a, k), getattr(b, k))
    assert standard_inclusion(1.0, 2, 2).tolist() == np.eye(3).tolist()


def test_vertical_decomposition_of_circle_in_S2_x_R():
    imm = instance("full_circle").immersion
    for x in imm.box.grid(4):
        fp = frame_at(imm, x)
        assert max(vertical_decomposition(fp, compute_tensors(fp)).values()) < 1e-12
    with pytest.raises(UnsupportedError):
        fp = frame_at(instance("circle_x_circle").immersion, [0.0, 0.0])
        vertical_decomposition(fp, compute_tensors(fp))


@pytest.mark.parametrize("name,vanishes", [("circle_x_circle", True), ("weighted_sum", True),
                                           ("weighted_sum_umbilical_3", True),
                                           ("generic_graph", False), ("covered_umbilical", False)])
def test_braid_vanishing_pair(name, vanishes):
    # R constant along M exactly when alpha pairs trivially with S
    imm = instance(name).immersion
    nR, pairing = braid_check(differential_terms(imm, imm.box.center))
    if vanishes:
        assert nR < 1e-5 and pairing < 1e-5
    else:
        assert nR > 1e-3 and pairing > 1e-3


@pytest.mark.parametrize("name", ["weighted_sum", "diagonal_small_sphere", "covered_umbilical"])
def test_theta_pairs_with_alpha_as_Phi(name):
    imm = instance(name).immersion
    for x in imm.box.grid(2):
        fp, ed = extrinsic_at(imm, x)
        assert theta_shape_residual(fp, compute_tensors(fp), ed) < 1e-9


def test_step_halving_does_not_change_exact_tensors():
    imm = instance("covered_umbilical").immersion
    x = imm.box.center
    a = tensors_at(imm, x, DiffConfig(1e-5))
    b = tensors_at(imm, x, DiffConfig(5e-6))
    assert np.max(np.abs(a.R - b.R)) < 1e-13
