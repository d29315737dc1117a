import textwrap

import pytest

from prodform.errors import ParseError, ValidationError
from prodform.scenario import CHECKS, GallerySource, InlineSource, load_scenario, parse_scenario


def _parse(text):
    return parse_scenario(textwrap.dedent(text), "t.toml")


def test_minimal_gallery_scenario():
    sc = _parse("""
        [source]
        gallery = "circle_x_circle"
    """)
    assert sc.name == "t"
    assert sc.checks == CHECKS
    assert sc.source == GallerySource("circle_x_circle", {})
    assert sc.ambient is None and sc.seed is None


def test_full_scenario_round_trip_to_dict():
    sc = _parse("""
        name = "x"
        seed = 11
        checks = ["classify", "tensors"]
        [ambient]
        k1 = 1.0
        n1 = 2
        k2 = 1
        n2 = 2
        [source]
        gallery = "DiagonalGeodesic"
        params = { k1 = 1.0, k2 = 1.0, n = 2 }
        [grid]
        points_per_axis = 3
        inset = 0.2
        [tolerances]
        parallel = 1e-3
        [fd]
        step = 2e-5
        [expect]
        theorem = "TotGeod_1_3"
        case = "iii"
        reduction = [0, 0]
    """)
    assert sc.ordered_checks() == ("tensors", "classify")
    assert sc.ambient == (1.0, 2, 1.0, 2)
    assert sc.product().label()
    assert sc.tolerances.parallel == 1e-3
    assert sc.fd.fd_step == 2e-5
    assert sc.expect["reduction"] == [0, 0]
    d = sc.to_dict()
    assert d["checks"] == ["tensors", "classify"]
    assert d["ambient"] == {"k1": 1.0, "n1": 2, "k2": 1.0, "n2": 2}
    assert d["grid"] == {"points_per_axis": 3, "inset": 0.2}


def test_inline_scenario():
    sc = _parse("""
        [ambient]
        k1 = 1.0
        n1 = 2
        k2 = 1.0
        n2 = 2
        [source]
        dim = 2
        components = ["0.6*cos(x1)", "0.6*sin(x1)", "0.8", "0.8*cos(x2)", "0.8*sin(x2)", "0.6"]
        [grid]
        lower = [-1.0, -1.0]
        upper = [1.0, 1.0]
    """)
    assert isinstance(sc.source, InlineSource) and sc.source.dim == 2
    assert sc.grid.box.dim == 2


@pytest.mark.parametrize("body,field,line", [
    ('[source]\ngallery = "a"\nbogus = 1\n', "source.bogus", 3),
    ('checks = ["tensors", "nope"]\n[source]\ngallery = "a"\n', "checks", 1),
    ('[ambient]\nk1 = 1.0\nn1 = 0\nk2 = 1.0\nn2 = 2\n[source]\ngallery = "a"\n', "ambient.n1", 3),
    ('[ambient]\nk1 = 1.0\nn1 = 2\nk2 = 1.0\n[source]\ngallery = "a"\n', "ambient", 1),
    ('[source]\ngallery = "a"\n[grid]\npoints_per_axis = 0\n', "grid.points_per_axis", 4),
    ('[source]\ngallery = "a"\n[tolerances]\nparallel = -1.0\n', "tolerances.parallel", 4),
    ('[source]\ngallery = "a"\n[expect]\nreduction = [1]\n', "expect.reduction", 4),
    ('[source]\ngallery = "a"\n[grid]\nlower = [0.0]\n', "grid", 3),
    ('name = "x"\n', "source", None),
])
def test_validation_errors_name_field_and_line(body, field, line):
    with pytest.raises(ValidationError) as info:
        parse_scenario(body, "t.toml")
    assert info.value.field == field
    assert info.value.line == line
    assert f"field {field!r}" in str(info.value)


def test_inline_needs_matching_component_count():
    body = ('[ambient]\nk1 = 1.0\nn1 = 2\nk2 = 1.0\nn2 = 2\n'
            '[source]\ndim = 1\ncomponents = ["1", "0", "0"]\n[grid]\nlower = [0.0]\nupper = [1.0]\n')
    with pytest.raises(ValidationError, match="6 coordinates"):
        parse_scenario(body)


def test_inline_expression_error_has_line_and_column():
    body = ('[ambient]\nk1 = 1.0\nn1 = 1\nk2 = 0.0\nn2 = 1\n'
            '[source]\ndim = 1\ncomponents = [\n  "cos(x1)",\n  "sin(x1",\n  "x1",\n]\n'
            '[grid]\nlower = [0.0]\nupper = [1.0]\n')
    with pytest.raises(ParseError) as info:
        parse_scenario(body)
    assert info.value.line == 10
    assert info.value.column == 7
    assert info.value.field == "source.components[1]"


def test_toml_syntax_error_has_position():
    with pytest.raises(ParseError) as info:
        parse_scenario('name = "x"\n[source\n', "broken.toml")
    assert info.value.line == 2
    assert "broken.toml" in str(info.value)


def test_missing_file():
    with pytest.raises(ValidationError, match="cannot read"):
        load_scenario("/nonexistent/scenario.toml")


def test_shipped_examples_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "scenarios"
    files = sorted(root.rglob("*.toml"))
    assert len(files) >= 20
    for f in files:
        if f.name == "bad_ambient.toml":
            with pytest.raises(ValidationError):
                load_scenario(f)
        else:
            load_scenario(f)
