import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import gamma

from core.errors import DomainError
from services import constructions as cons
from services.cpoly import INF, Poly, rat_eval
from services.mobius import H, build_phi, inverse
from services.qdiff import mobius_pullback, same_point
from services.strebel import critical_graph


def test_solve_ab_satisfies_the_family_relation():
    for r in (-0.8, -0.1, 0.0, 0.25, 3.0):
        a, b = cons.solve_ab(r)
        assert a == 1.0 and b > 0
        assert 0.25 * (b / a - a / b) == pytest.approx(r, abs=1e-12)


def test_omega_ab_rejects_degenerate_parameters():
    with pytest.raises(DomainError):
        cons.omega_ab(0.0, 1.0)


def test_closed_form_matches_mobius_pullback():
    rng = np.random.default_rng(7)
    for a, b in ((1.0, 1.0), cons.solve_ab(0.3), (0.7, 1.9)):
        pulled = mobius_pullback(inverse(build_phi(a, b)), cons.omega_ab(a, b))
        closed = cons.hyperelliptic_closed_form(a, b)
        for z in rng.uniform(-2, 2, 10) + 1j * rng.uniform(-2, 2, 10):
            expected = closed.num(z) / closed.den(z)
            assert rat_eval(pulled.f, z) == pytest.approx(expected, rel=1e-9)


def test_hyperelliptic_branch_data():
    spec = cons.build_hyperelliptic(0.25)
    assert spec.genus == 1
    assert spec.beta1 == complex(0.5, 0.25)
    assert all(e.order == -1 for e in spec.base_diff.entries)
    for p in spec.branch_points:
        assert any(same_point(e.point, p, 1e-7) for e in spec.base_diff.entries)
    assert [c.pulled_order for c in spec.certificate] == [0, 0, 0, 0]
    assert spec.pulled_degree == 0


def test_hyperelliptic_genus_from_extra_points():
    assert cons.build_hyperelliptic(0.25, [2 + 1j]).genus is None
    spec = cons.build_hyperelliptic(0.25, [2 + 1j, -3 + 0j])
    assert spec.genus == 2
    assert spec.pulled_degree == 4 * spec.genus - 4
    assert [c.pulled_order for c in spec.certificate[4:]] == [2, 2]


def test_hyperelliptic_collision():
    with pytest.raises(DomainError, match="collide"):
        cons.build_hyperelliptic(0.25, [complex(0.5, 0.25)])
    with pytest.raises(DomainError):
        cons.build_hyperelliptic(0.25, [INF])


def test_elliptic_square_lattice():
    lattice = cons.elliptic_periods([0j, 1 + 0j, -1 + 0j, INF])
    assert lattice.tau == pytest.approx(1j, abs=1e-8)
    report = cons.elliptic_strebel_test([0j, 1 + 0j, -1 + 0j, INF], 1.0, 20)
    assert report.strebel
    assert report.rational_witness == (1, 0)
    assert report.to_json()["verdict"] == "Strebel"


def test_square_lattice_period_closed_form():
    # int_0^1 dx / sqrt(x (1 - x^2)) = B(1/4, 1/2) / 2
    half = gamma(0.25) * gamma(0.5) / gamma(0.75) / 2
    lattice = cons.elliptic_periods([0j, 1 + 0j, -1 + 0j, INF])
    assert abs(lattice.omega1) == pytest.approx(2 * half, rel=1e-9)
    assert abs(lattice.omega2) == pytest.approx(2 * half, rel=1e-9)


def test_elliptic_irrational_slope_has_no_witness():
    report = cons.elliptic_strebel_test([0j, 1 + 0j, -1 + 0j, INF], complex(math.cos(2), math.sin(2)), 50)
    assert report.rational_witness is None
    assert report.to_json()["verdict"] == "NoWitnessWithinBound"


def test_elliptic_tau_ignores_order_and_scale():
    base = cons.elliptic_periods([0j, 1 + 0j, -1 + 0j, INF])
    shuffled = cons.elliptic_periods([INF, -1 + 0j, 1 + 0j, 0j])
    scaled = cons.elliptic_periods([0j, 2 + 0j, -2 + 0j, INF])
    assert shuffled.tau == pytest.approx(base.tau, abs=1e-12)
    assert scaled.tau == pytest.approx(base.tau, abs=1e-8)


def test_elliptic_input_errors():
    with pytest.raises(DomainError):
        cons.elliptic_periods([0j, 1 + 0j, INF])
    with pytest.raises(DomainError):
        cons.elliptic_periods([0j, 0j, 1 + 0j, INF])
    with pytest.raises(DomainError):
        cons.elliptic_strebel_test([0j, 1 + 0j, -1 + 0j, INF], 0j)
    with pytest.raises(DomainError):
        cons.elliptic_strebel_test([0j, 1 + 0j, -1 + 0j, INF], 1.0, 0)


def test_lattice_witness():
    assert cons.lattice_witness(1j, math.pi / 4, 5) == (1, 1)
    assert cons.lattice_witness(1j, 0.0, 5) == (1, 0)
    assert cons.lattice_witness(1j, math.atan2(2, 3), 5) == (3, 2)
    assert cons.lattice_witness(1j, math.atan2(2, 3), 2) is None


def test_cover_targets():
    c, a1, a2, a3 = cons.cover_targets(0.25)
    assert c == complex(0.5, 0.25 * math.sqrt(3))
    assert a1 == pytest.approx(H(c))
    assert a2 == c
    assert H(a3) == pytest.approx(c)
    for r in (0.0, 0.5, -0.2, 0.7):
        with pytest.raises(DomainError):
            cons.cover_targets(r)


def test_quartic_has_the_prescribed_critical_points():
    b = (0.3 + 0.1j, -0.5j, 1.2 + 0j)
    p = cons.quartic(b)
    assert p.degree == 4 and p.lead == 1
    expected = Poly.from_roots(list(b)).scale(4.0)
    assert np.allclose(p.derivative().array, expected.array)


@pytest.fixture(scope="module")
def cover():
    return cons.cover_solver(0.25)


def test_cover_solver_hits_the_targets(cover):
    assert cover.residual < 1e-10
    p = cons.cover_map(cover).num
    for b, a in zip(cover.b, cover.targets):
        assert abs(p(b) - a) < 1e-9
        assert abs(p.derivative()(b)) < 1e-9
    for d2 in cover.second_derivatives:
        assert abs(d2) > 1e-6
    sep = min(abs(cover.b[i] - cover.b[j]) for i in range(3) for j in range(i + 1, 3))
    assert sep > 1e-3


def test_cover_solver_is_reproducible(cover):
    again = cons.cover_solver(0.25)
    assert again.b == cover.b


def test_infinity_certificate():
    cert = cons.infinity_certificate()
    assert all(v == -1 for v in cert.reduced_at_ones)
    for row in cert.jacobian:
        assert [float(v) for v in row] == pytest.approx([-4 / 3, -4 / 3, 1.0])
    assert cert.rank == 1
    assert cert.empty_at_infinity
    assert cert.to_json()["reduced_at_ones"] == ["-1", "-1", "-1"]


@pytest.mark.slow
def test_cover_periods_split_into_l_and_one_minus_l(cover):
    report = cons.verify_cover_periods(cover)
    assert report.verdict == "Strebel"
    assert report.all_classified
    assert 0 < report.L < 0.5
    labels = {label for _, label in report.periods}
    assert labels <= {"L", "1-L", "1"}
    at_inf = [per for p, per, _ in report.perimeters if p is INF]
    assert at_inf == [pytest.approx(8.0, abs=1e-6)]
    assert not report.order_law_problems


def test_cover_periods_reject_unconverged_solution(cover):
    with pytest.raises(DomainError):
        cons.verify_cover_periods(replace(cover, residual=1.0))


@pytest.mark.parametrize("n", range(1, 11))
def test_preimage_graph_euler_characteristic(n):
    for on_critical in (False, True):
        g = cons.build_preimage_graph(n, on_critical)
        assert g.euler_from_cells == g.euler_from_counts == -len(g.intersections)
        assert g.to_json()["euler"] == g.euler_from_cells


def test_preimage_graph_shapes():
    assert cons.build_preimage_graph(1, False).loops == 2
    assert not cons.build_preimage_graph(1, False).intersections[0].transverse
    assert len(cons.build_preimage_graph(2, False).intersections) == 2
    g = cons.build_preimage_graph(4, True)
    assert g.loops == 5 and len(g.intersections) == 4
    assert cons.build_preimage_graph(5, False).loops == 5


def test_preimage_graph_needs_a_branch_point():
    with pytest.raises(DomainError):
        cons.build_preimage_graph(0, True)


def test_from_branch_points_drops_infinity():
    omega = cons.from_branch_points([0j, 1 + 0j, -1 + 0j, INF])
    assert omega.f.den.degree == 3
    assert sorted(e.order for e in omega.entries) == [-1, -1, -1, -1]


def test_cover_solver_needs_admissible_r():
    with pytest.raises(DomainError):
        cons.cover_solver(0.9)


@pytest.mark.slow
def test_hyperelliptic_base_is_strebel(cfg):
    rng = np.random.default_rng(23)
    for r in rng.uniform(-0.9, 0.9, 3):
        spec = cons.build_hyperelliptic(float(r))
        g = critical_graph(spec.base_diff, cfg)
        assert g.verdict.is_strebel, (r, g.verdict.to_json())
        assert len(g.edges) == 2
