import pytest

from core.errors import DomainError, UsageError
from services.cpoly import INF
from services.diffspec import parse_complex, parse_diff_spec, parse_point, parse_real


@pytest.mark.parametrize(
    "text, value",
    [
        ("2", 2 + 0j),
        ("-1.5", -1.5 + 0j),
        ("3i", 3j),
        ("i", 1j),
        ("-i", -1j),
        ("0.5-2i", 0.5 - 2j),
        ("2+i", 2 + 1j),
        (" 1e-3 + 4i ", 0.001 + 4j),
        ("1.5j", 1.5j),
    ],
)
def test_parse_complex(text, value):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["", "abc", "1+2k", "nan", "inf", "1+nani"])
def test_parse_complex_rejects(text):
    with pytest.raises(UsageError):
        parse_complex(text)


def test_parse_point_and_real():
    assert parse_point("inf") is INF
    assert parse_point("Infinity") is INF
    assert parse_point("1-i") == 1 - 1j
    assert parse_real("0.25") == 0.25
    with pytest.raises(UsageError):
        parse_real("0.25+i")


def test_q1_spec(q1):
    parsed = parse_diff_spec("q1")
    assert parsed.kind == "q1"
    assert parsed.omega.f == q1.f
    assert parse_diff_spec(" Q1 ").kind == "q1"


def test_omega_spec():
    parsed = parse_diff_spec("omega:1,2")
    assert parsed.details == {"a": 1.0, "b": 2.0}
    assert sorted(e.order for e in parsed.omega.entries) == [-1, -1, -1, -1]


def test_hyper_spec():
    parsed = parse_diff_spec("hyper:0.25;2+i,-3")
    spec = parsed.details["hyper"]
    assert spec.extra_branch == [2 + 1j, -3 + 0j]
    assert spec.genus == 2
    assert parsed.omega is spec.base_diff


def test_elliptic_spec():
    parsed = parse_diff_spec("elliptic:0,1,-1,inf;2")
    assert parsed.details["points"][3] is INF
    assert parsed.details["c_prime"] == 2
    assert sorted(e.order for e in parsed.omega.entries) == [-1, -1, -1, -1]


def test_rat_spec_uses_ascending_coefficients():
    parsed = parse_diff_spec("rat:[1]/[0,0,1]")
    orders = {("inf" if e.point is INF else round(abs(e.point), 9)): e.order for e in parsed.omega.entries}
    assert orders == {0.0: -2, "inf": -2}
    shifted = parse_diff_spec("rat:[1]/[-1,1]")
    assert any(e.point == pytest.approx(1.0) and e.order == -1 for e in shifted.omega.entries if e.point is not INF)


def test_cover_spec():
    parsed = parse_diff_spec("cover:0.25")
    sol = parsed.details["cover"]
    assert sol.residual < 1e-10
    at_inf = [e for e in parsed.omega.entries if e.point is INF]
    assert at_inf and at_inf[0].order == -2


@pytest.mark.parametrize(
    "text",
    [
        "q1:3",
        "omega:1",
        "hyper:",
        "elliptic:0,1,2;1",
        "elliptic:0,1,2,3",
        "rat:[1]/[0]",
        "rat:[0]/[1]",
        "rat:1/2",
        "rat:[1]/[a]",
        "rat:[]/[1]",
        "strebel:1",
    ],
)
def test_bad_specs(text):
    with pytest.raises(UsageError):
        parse_diff_spec(text)


def test_out_of_range_parameters_are_domain_errors():
    with pytest.raises(DomainError):
        parse_diff_spec("omega:0,1")
    with pytest.raises(DomainError):
        parse_diff_spec("cover:0.75")
