import numpy as np
import pytest

from helpers import instance, surveyed
from prodform import gallery
from prodform.classifier import Criterion, Tolerances, detect_codim_reduction
from prodform.errors import ContractViolation

REDUCIBLE = [n for n in gallery.gallery_names() if gallery.build(n).expected.reduction is not None]


def _both(name):
    inst, sv = surveyed(name)
    return inst, [detect_codim_reduction(inst.immersion, sv, s) for s in ("left", "right")]


@pytest.mark.parametrize("name", REDUCIBLE)
def test_expected_reductions(name):
    inst, (left, right) = _both(name)
    assert (left.reducible_by, right.reducible_by) == inst.expected.reduction
    for r in (left, right):
        assert not r.indeterminate
        assert r.evidence["routes_agree"]
        assert r.witness_subbundle.shape == (inst.ambient.N, r.reducible_by)


@pytest.mark.parametrize("name", REDUCIBLE)
def test_witness_is_orthonormal_and_normal(name):
    inst, sides = _both(name)
    x = surveyed(name)[1].samples[0].x
    from prodform.immersion import frame_at
    fp = frame_at(inst.immersion, x)
    for r in sides:
        W = r.witness_subbundle
        if W.shape[1] == 0:
            continue
        G = W.T @ (inst.ambient.signs[:, None] * W)
        assert np.allclose(G, np.eye(W.shape[1]), atol=1e-8)
        assert np.max(np.abs(fp.tangent_frame.T @ (inst.ambient.signs[:, None] * W))) < 1e-8


def test_diagonal_route_runs_on_diagonals():
    inst, (left, _) = _both("diagonal_small_sphere_5_5")
    assert Criterion.DIAGONAL in left.criteria_used
    assert Criterion.DIAGONAL_FIRST_NORMAL in left.criteria_used
    assert left.diagonal.passed
    assert left.diagonal.ell == inst.expected.extra["ell"]


def test_twisted_curve_does_not_reduce():
    _, sides = _both("twisted_curve")
    for r in sides:
        assert r.reducible_by == 0
        assert r.candidate_rank == 1
        assert r.evidence["first_normal_residual"] > 1e-2
        assert r.evidence["curvature_route_mean_curvature"] > 1e-2
        assert r.evidence["routes_agree"]
        assert Criterion.DIAGONAL not in r.criteria_used


@pytest.mark.parametrize("name", ["generic_graph", "sphere_x_ellipse"])
def test_no_candidate_means_no_reduction(name):
    _, sides = _both(name)
    assert [r.candidate_rank for r in sides] == [0, 0]
    assert [r.reducible_by for r in sides] == [0, 0]


def test_side_is_validated():
    inst, sv = surveyed("great_circle_slice")
    with pytest.raises(ContractViolation):
        detect_codim_reduction(inst.immersion, sv, "middle")


def test_verdict_serialises():
    _, (left, _) = _both("great_sphere_slice")
    d = left.to_dict()
    assert d["reducible_by"] == 2
    assert d["criteria_used"] == ["Thm_4_2", "Cor_4_3", "Thm_4_4"]
    assert np.array(d["witness_subbundle"]).shape == (instance("great_sphere_slice").ambient.N, 2)


def test_strict_reduction_tolerance_keeps_exact_cases():
    inst, sv = surveyed("small_sphere_slice")
    r = detect_codim_reduction(inst.immersion, sv, "right", tol=Tolerances(reduction=1e-10))
    assert r.reducible_by == 1
