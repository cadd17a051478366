import pytest
from hypothesis import given, strategies as st

from virecon.config import ExperimentConfig, load_config, load_config_file
from virecon.errors import ParseError


def test_defaults():
    c = load_config("problem=heat_smooth")
    assert c == ExperimentConfig(problem="heat_smooth")
    assert (c.k, c.n, c.levels, c.tau_rule, c.sigma_mode) == (1, 4, 3, "h2", "lumped")
    assert c.verification is False and c.refinement == "uniform"


def test_comments_and_whitespace():
    c = load_config("# header\n\n  problem = manufactured_obstacle  # trailing\nk = 2\n")
    assert c.problem == "manufactured_obstacle" and c.k == 2


def test_theta_out_of_range_reports_line():
    with pytest.raises(ParseError) as info:
        load_config("problem=pyramid_adaptive\nrefinement=adaptive\ntheta=1.5")
    assert info.value.line == 3
    assert "theta" in str(info.value)


def test_missing_problem():
    with pytest.raises(ParseError, match="missing problem"):
        load_config("")


@pytest.mark.parametrize("text, line", [
    ("problem=heat_smooth\nfoo=1", 2),
    ("problem=heat_smooth\nk=1\nk=2", 3),
    ("problem=heat_smooth\njust text", 2),
    ("problem=unknown", 1),
    ("problem=heat_smooth\nk=3", 2),
    ("problem=heat_smooth\nn=abc", 2),
    ("problem=heat_smooth\nT=nan", 2),
    ("problem=heat_smooth\ntau=-1", 2),
    ("problem=heat_smooth\nverification=maybe", 2),
])
def test_bad_lines(text, line):
    with pytest.raises(ParseError) as info:
        load_config(text)
    assert info.value.line == line


def test_fixed_tau_needs_value():
    with pytest.raises(ParseError):
        load_config("problem=heat_smooth\ntau_rule=fixed")
    assert load_config("problem=heat_smooth\ntau_rule=fixed\ntau=0.01").tau == 0.01


@pytest.mark.parametrize("raw, value", [("true", True), ("Yes", True), ("1", True),
                                        ("off", False), ("0", False), ("FALSE", False)])
def test_booleans(raw, value):
    assert load_config(f"problem=heat_smooth\nverification={raw}").verification is value


def test_load_from_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("problem=heat_smooth\nlevels=2\n")
    assert load_config_file(p).levels == 2


@given(st.floats(0.0, 1.0, exclude_min=True))
def test_theta_accepted_in_range(theta):
    assert load_config(f"problem=heat_smooth\ntheta={theta!r}").theta == theta
