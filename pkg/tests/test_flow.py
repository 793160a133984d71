import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import UPPER_ZERO
from core.errors import DomainError
from services import constructions as cons
from services.cpoly import rat_eval
from services.flow import (
    TerminationKind,
    TraceConfig,
    critical_directions,
    flat_length,
    flat_length_curve,
    horizontal_direction,
    integrate_unit,
    leaf_integral,
    seed_critical,
    trace,
    trace_critical,
)
from services.mobius import H
from services.qdiff import leading_coefficient
from services.strebel import ell, hausdorff


def test_config_validation():
    with pytest.raises(DomainError):
        TraceConfig(step=0.0)
    with pytest.raises(DomainError):
        TraceConfig(sing_radius=1e-5, close_tol=1e-5)
    with pytest.raises(DomainError):
        TraceConfig(chart_switch_radius=0.5)


def test_config_overrides_skip_none():
    cfg = TraceConfig.from_settings(step=2e-3, length_budget=None)
    assert cfg.step == 2e-3
    assert cfg.length_budget == TraceConfig.from_settings().length_budget


def test_integrate_unit_against_scipy():
    value = integrate_unit(lambda t: np.exp(t) * np.cos(3 * t))
    expected, _ = quad(lambda t: math.exp(t) * math.cos(3 * t), 0, 1)
    assert value == pytest.approx(expected, rel=1e-12)


def test_flat_length_of_half_segment_matches_quad(q1):
    def density(y):
        return math.sqrt(abs(rat_eval(q1.f, complex(0.5, y))))

    expected, _ = quad(density, 0.0, UPPER_ZERO.imag)
    assert expected == pytest.approx(0.5, abs=1e-9)
    assert flat_length(q1, [complex(0.5, 0.0), UPPER_ZERO]) == pytest.approx(expected, abs=1e-9)


def test_critical_directions_are_horizontal(q1):
    k, c = leading_coefficient(q1, UPPER_ZERO)
    dirs = critical_directions(q1, UPPER_ZERO)
    assert len(dirs) == 3
    for d in dirs:
        value = c * d ** 3
        assert value.real > 0
        assert abs(value.imag) < 1e-12 * abs(value)


def test_critical_directions_rejected_at_regular_point(q1):
    with pytest.raises(DomainError):
        critical_directions(q1, 0.3 + 0.1j)
    with pytest.raises(DomainError):
        critical_directions(q1, 0j)


def test_horizontal_direction(q1):
    z = 0.3 + 0.4j
    v = horizontal_direction(q1, z)
    value = rat_eval(q1.f, z) * v * v
    assert abs(v) == pytest.approx(1.0)
    assert value.real > 0 and abs(value.imag) < 1e-12 * abs(value)
    with pytest.raises(DomainError):
        horizontal_direction(q1, 0j)


def test_leaf_around_pole_closes_with_perimeter_length(q1, cfg):
    z = 0.1 + 0j
    t = trace(q1, z, horizontal_direction(q1, z), cfg)
    assert t.termination.kind == TerminationKind.CLOSED
    assert t.flat_length == pytest.approx(2.0, abs=1e-5)
    assert t.termination.is_compact


def test_leaf_through_infinity_switches_chart(q1, cfg):
    z = 5.0 + 0.5j
    t = trace(q1, z, horizontal_direction(q1, z), cfg)
    assert t.termination.kind == TerminationKind.CLOSED
    assert {c for c, _ in t.points} == {"z", "w"}
    assert t.flat_length == pytest.approx(2.0, abs=1e-5)


def test_budget_exhaustion(q1):
    cfg = TraceConfig(length_budget=0.5)
    z = 0.1 + 0j
    t = trace(q1, z, horizontal_direction(q1, z), cfg)
    assert t.termination.kind == TerminationKind.BUDGET_EXCEEDED
    assert t.flat_length == pytest.approx(0.5)
    assert not t.termination.is_compact


def test_trace_preconditions(q1, cfg):
    with pytest.raises(DomainError):
        trace(q1, UPPER_ZERO, 1.0, cfg)
    with pytest.raises(DomainError):
        trace(q1, 0.1 + 0j, 0j, cfg)
    z = 0.1 + 0j
    with pytest.raises(DomainError):
        trace(q1, z, 1j * horizontal_direction(q1, z), cfg)


def test_seed_sits_on_critical_leaf(q1, cfg):
    k, c = leading_coefficient(q1, UPPER_ZERO)
    d = critical_directions(q1, UPPER_ZERO)[0]
    seed = seed_critical(q1, UPPER_ZERO, d, cfg)
    assert seed.head_offset == pytest.approx(2 * cfg.sing_radius, rel=1e-8)
    # (2/3) sqrt|c| r^(3/2) = 2 * sing_radius
    radius = (1.5 * 2 * cfg.sing_radius / math.sqrt(abs(c))) ** (2.0 / 3.0)
    assert abs(seed.point - UPPER_ZERO) == pytest.approx(radius, rel=0.05)
    assert abs(cmath.phase(seed.direction / d)) < 0.05


def test_seed_next_to_a_simple_pole(cfg):
    omega = cons.omega_ab(1.0, 1.0)
    k, c = leading_coefficient(omega, 1 + 0j)
    assert k == -1 and c == pytest.approx(0.25)
    (d,) = critical_directions(omega, 1 + 0j)
    assert d == pytest.approx(1.0)
    seed = seed_critical(omega, 1 + 0j, d, cfg)
    assert seed.head_offset == pytest.approx(2 * cfg.sing_radius, rel=1e-8)
    # 2 sqrt|c| r^(1/2) = 2 * sing_radius
    assert abs(seed.point - 1.0) == pytest.approx((cfg.sing_radius / math.sqrt(abs(c))) ** 2, rel=1e-2)


def test_leaf_up_the_imaginary_axis_ends_at_a_simple_pole(cfg):
    omega = cons.omega_ab(1.0, 1.0)
    t = trace(omega, 0.5j, 1j, cfg)
    assert t.termination.kind == TerminationKind.HIT_SINGULAR
    assert abs(t.termination.point - 1j) < 1e-12
    assert max(abs(z.real) for z in t.affine_points()) < 1e-6
    assert 0 < t.tail_gap < 2 * cfg.sing_radius


def test_leaf_along_the_real_axis_passes_infinity(cfg):
    omega = cons.omega_ab(1.0, 1.0)
    t = trace(omega, 2 + 0j, 1 + 0j, cfg)
    assert t.termination.kind == TerminationKind.HIT_SINGULAR
    assert abs(t.termination.point + 1.0) < 1e-12
    assert "w" in {c for c, _ in t.points}
    assert max(abs(z.imag) for z in t.affine_points()) < 1e-6


def test_traced_steps_stay_horizontal(q1, cfg):
    z = 0.1 + 0j
    t = trace(q1, z, horizontal_direction(q1, z), cfg)
    pairs = [(a, b) for (ca, a), (cb, b) in zip(t.points, t.points[1:]) if ca == cb == "z" and a != b]
    assert len(pairs) > 100
    for a, b in pairs:
        step = b - a
        f = rat_eval(q1.f, 0.5 * (a + b))
        assert (f * step * step).real > 0
        flat = cmath.sqrt(f) * step
        assert abs(flat.imag) < 1e-3 * cfg.step


def test_retracing_from_the_middle_finds_the_same_leaf(q1, cfg):
    z = 0.1 + 0j
    first = trace(q1, z, horizontal_direction(q1, z), cfg)
    middle = first.points[len(first.points) // 2][1]
    v = horizontal_direction(q1, middle)
    for direction in (v, -v):
        again = trace(q1, middle, direction, cfg)
        assert again.termination.kind == TerminationKind.CLOSED
        assert hausdorff(first.sphere_points(), again.sphere_points()) < 10 * cfg.step


def test_flat_length_of_the_unit_circle_arc(q1):
    # e^(i phi) for phi from -pi/3 round through -1 to pi/3
    def gamma(s):
        return np.exp(1j * (5 * math.pi / 3 - 4 * math.pi / 3 * s))

    def dgamma(s):
        return -4j * math.pi / 3 * gamma(s)

    assert flat_length_curve(q1, gamma, dgamma) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        flat_length_curve(q1, lambda s: s + 0j, lambda s: np.ones_like(s) + 0j)


def test_vertical_length_matches_the_rotated_arc(q1):
    # h maps Re z = 1/2 onto the unit circle arc, so the flat lengths agree
    for y in (0.1, 0.4, -0.3):
        c = complex(0.5, y)
        w = H(c)
        end = cmath.phase(H(UPPER_ZERO))
        start = cmath.phase(w) % (2 * math.pi)

        def gamma(s, start=start, end=end):
            return np.exp(1j * (start + (end - start) * s))

        def dgamma(s, start=start, end=end):
            return 1j * (end - start) * gamma(s)

        assert abs(abs(w) - 1.0) < 1e-12
        assert ell(q1, c) == pytest.approx(flat_length_curve(q1, gamma, dgamma), abs=1e-8)


def test_leaf_integral_of_a_closed_leaf_is_real(q1, cfg):
    z = 0.1 + 0j
    t = trace(q1, z, horizontal_direction(q1, z), cfg)
    total = leaf_integral(q1, t)
    assert total.real == pytest.approx(2.0, abs=1e-8)
    assert abs(total.real - t.flat_length) < 1e-5
    assert abs(total.imag) < 1e-8


@pytest.mark.slow
def test_critical_leaf_of_q1_has_unit_length(q1, cfg):
    lengths = []
    for d in critical_directions(q1, UPPER_ZERO):
        t = trace_critical(q1, UPPER_ZERO, d, cfg)
        assert t.termination.kind == TerminationKind.HIT_SINGULAR
        lengths.append(t.total_length)
    assert lengths == pytest.approx([1.0, 1.0, 1.0], abs=1e-8)


@pytest.mark.slow
def test_reversed_trajectory_swaps_ends(q1, cfg):
    d = critical_directions(q1, UPPER_ZERO)[0]
    t = trace_critical(q1, UPPER_ZERO, d, cfg)
    back = t.reversed()
    assert back.origin == t.termination.point
    assert back.termination.point == UPPER_ZERO
    assert back.total_length == pytest.approx(t.total_length)
    assert back.head_offset == t.tail_gap
    assert back.sphere_points()[0] == t.sphere_points()[-1]
