import math
from dataclasses import replace

import numpy as np
import pytest

from helpers import instance, surveyed
from prodform import gallery
from prodform.classifier import (ClassificationVerdict, Criterion, Theorem, Tolerances, classify,
                                 detect_parallel_case, detect_totally_geodesic_case, survey)
from prodform.errors import ContractViolation
from prodform.gallery import circle_fullness
from prodform.immersion import DiffConfig
from prodform.tensors import algebraic_identity_residuals, tensors_at


def _verdict(name):
    inst, sv = surveyed(name)
    info = circle_fullness(inst) if inst.circle is not None else None
    return inst, sv, classify(sv, circle_info=info)


@pytest.mark.parametrize("name", gallery.gallery_names())
def test_gallery_verdicts(name):
    inst, _, v = _verdict(name)
    want = inst.expected
    assert v.theorem.value == want.theorem
    if v.theorem is not Theorem.NONE:
        assert v.case_id == want.case


@pytest.mark.parametrize("name", [n for n in gallery.gallery_names()
                                  if gallery.build(n).expected.parallel is not None])
def test_parallel_flag_matches_survey(name):
    inst, sv = surveyed(name)
    assert (sv.max("nabla_alpha") < Tolerances().parallel) == inst.expected.parallel


@pytest.mark.parametrize("name", [n for n in gallery.gallery_names()
                                  if gallery.build(n).expected.umbilic is not None])
def test_umbilic_flag_matches_survey(name):
    inst, sv = surveyed(name)
    assert (sv.max("umbilic") < Tolerances().umbilic) == inst.expected.umbilic


def test_enum_identifiers():
    assert [t.value for t in Theorem] == ["Parallel_1_1", "ParallelFlat_1_2", "TotGeod_1_3", "Umbilical_1_4",
                                          "None"]
    assert [c.value for c in Criterion] == ["Thm_4_2", "Cor_4_3", "Thm_4_4", "Thm_6_6", "Cor_6_7"]


def test_tolerances_validation():
    tol = Tolerances()
    assert tol.updated(parallel=1e-3).parallel == 1e-3
    with pytest.raises(ContractViolation):
        tol.updated(bogus=1.0)
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ContractViolation):
            Tolerances(umbilic=bad)
    assert set(tol.to_dict()) == set(Tolerances.names())


def test_verdict_rejects_foreign_case():
    with pytest.raises(ContractViolation):
        ClassificationVerdict(Theorem.UMBILICAL, "iv")
    with pytest.raises(ContractViolation):
        ClassificationVerdict(Theorem.NONE, "i")
    assert ClassificationVerdict(Theorem.NONE, "-").label == "None"
    assert ClassificationVerdict(Theorem.PARALLEL, "ii").label == "Parallel_1_1 (ii)"


def test_verdict_serialises_margins():
    _, _, v = _verdict("generic_graph")
    d = v.to_dict()
    assert d["theorem"] == "None"
    assert d["margins"]["nabla_alpha"]["value"] > d["margins"]["nabla_alpha"]["threshold"]
    assert set(d["evidence"]["rejected"]) == {"totally_geodesic", "parallel", "umbilical"}


def test_generic_graph_is_far_from_every_hypothesis():
    _, sv, v = _verdict("generic_graph")
    assert v.theorem is Theorem.NONE
    assert sv.max("nabla_alpha") > 1e-2
    assert sv.max("umbilic") > 1e-3


def test_totally_geodesic_is_checked_first():
    # a diagonal is also parallel and umbilical; the most specific verdict wins
    _, sv, v = _verdict("diagonal")
    assert v.theorem is Theorem.TOTALLY_GEODESIC
    assert detect_parallel_case(sv).theorem is not Theorem.NONE


def test_loosened_parallel_tolerance_changes_nothing_for_a_product():
    _, sv = surveyed("circle_x_circle")
    assert classify(sv, Tolerances(parallel=1e-2)).label == "Parallel_1_1 (ii)"


def test_tiny_parallel_tolerance_rejects_numerical_products():
    # the extrinsic-circle family is only known numerically
    _, sv = surveyed("full_circle")
    assert detect_parallel_case(sv, Tolerances(parallel=1e-14)).theorem is Theorem.NONE


def test_full_circle_without_fullness_information():
    inst, sv = surveyed("full_circle")
    v = classify(sv, circle_info=circle_fullness(inst))
    assert v.evidence["circle"]["full"] is True


@pytest.mark.parametrize("name", ["circle_x_circle", "weighted_sum", "generic_graph"])
def test_corrupted_S_is_detected(name):
    inst = instance(name)
    x = inst.immersion.box.center
    pt = tensors_at(inst.immersion, x)
    assert max(algebraic_identity_residuals(pt)) < 1e-8
    rng = np.random.default_rng(0)
    E = rng.standard_normal(pt.S.shape)
    bad = replace(pt, S=pt.S + 1e-3 * E / np.linalg.norm(E))
    assert max(algebraic_identity_residuals(bad)) > 1e-5


def test_survey_is_thread_independent():
    inst = instance("weighted_sum")
    pts = inst.immersion.box.grid(3)
    a = survey(inst.immersion, pts, DiffConfig(), threads=1)
    b = survey(inst.immersion, pts, DiffConfig(), threads=4)
    for name in ("nabla_alpha", "umbilic", "alpha"):
        assert np.array_equal(a.values(name), b.values(name))
    assert detect_totally_geodesic_case(a).label == detect_totally_geodesic_case(b).label
