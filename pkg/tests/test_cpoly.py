import numpy as np
import pytest

from core.errors import DomainError, IndeterminateError, RootFindingError
from services import cpoly
from services.cpoly import (
    INF,
    ONE,
    Z,
    ZERO,
    Poly,
    RationalFn,
    compose_rational,
    normalize,
    point_key,
    rat_derivative,
    rat_eval,
    root_clusters,
    roots,
)


def test_degree_and_trimming():
    assert ZERO.degree == -1
    assert ZERO.is_zero
    assert Poly.of([1, 2, 0, 0]).degree == 1
    assert Poly.of([3]).degree == 0
    assert Poly.of([1, 2, 1e-20]).degree == 1


def test_arithmetic():
    p = (Z - ONE) * (Z + ONE)
    assert p.coeffs == (-1 + 0j, 0j, 1 + 0j)
    assert (Z ** 3).degree == 3
    assert p.derivative().coeffs == (0j, 2 + 0j)
    assert p.compose(Z + ONE)(2.0) == pytest.approx(8.0)


def test_non_finite_coefficients_rejected():
    with pytest.raises(DomainError):
        Poly.of([1.0, float("nan")])


def test_simple_roots():
    found = roots(Poly.from_roots([2.0, -1.0, 1j]))
    assert [m for _, m in found] == [1, 1, 1]
    got = sorted((z for z, _ in found), key=lambda z: (z.real, z.imag))
    for z, expected in zip(got, [-1.0, 1j, 2.0]):
        assert abs(z - expected) < 1e-12


def test_double_root_is_one_cluster():
    clusters = root_clusters(Poly.from_roots([1.0, 1.0, -2.0]))
    assert [c.multiplicity for c in clusters] == [1, 2]
    assert abs(clusters[0].point + 2.0) < 1e-10
    assert abs(clusters[1].point - 1.0) < 1e-6


def test_roots_at_origin_are_exact():
    clusters = root_clusters(Poly.of([0, 0, -1, 1]))
    assert clusters[0].point == 0j
    assert clusters[0].multiplicity == 2


def test_constant_polynomial_has_no_roots():
    with pytest.raises(DomainError):
        root_clusters(Poly.of([4.0]))
    with pytest.raises(DomainError):
        root_clusters(ZERO)


def test_normalize_cancels_common_factor():
    f = RationalFn(Poly.from_roots([1.0, 2.0]), Poly.from_roots([1.0, -3.0], lead=2.0))
    g = normalize(f)
    assert g.num.degree == 1
    assert g.den.degree == 1
    assert g.den.lead == pytest.approx(1.0)
    z = 0.5 + 0.25j
    assert g(z) == pytest.approx((z - 2.0) / (2.0 * (z + 3.0)))


def test_rat_eval_poles_and_infinity():
    f = RationalFn(ONE, Poly.from_roots([0.0, 1.0]))
    assert rat_eval(f, 0j) is INF
    assert rat_eval(f, INF) == 0j
    assert rat_eval(RationalFn(Z * Z, Z + ONE), INF) is INF
    assert rat_eval(RationalFn(Z.scale(3.0), Z + ONE), INF) == pytest.approx(3.0)


def test_rat_eval_zero_over_zero():
    f = RationalFn(Z - ONE, Z - ONE)
    with pytest.raises(IndeterminateError):
        rat_eval(f, 1.0 + 0j)


def test_compose_rational_matches_direct_evaluation():
    f = RationalFn(Z + ONE.scale(2.0), Z * Z + ONE)
    psi = RationalFn(Z + ONE, Z - ONE.scale(2.0))
    num, den, e = compose_rational(f, psi)
    z = 0.3 + 0.1j
    w = psi(z)
    q = psi.den(z)
    assert e == 1
    assert num(z) * q ** e / den(z) == pytest.approx(f(w))


def test_point_key_puts_infinity_last():
    pts = [INF, 1 + 0j, -1 + 2j, -1 - 2j]
    ordered = sorted(pts, key=point_key)
    assert ordered == [-1 - 2j, -1 + 2j, 1 + 0j, INF]


def test_values_vectorized():
    p = Poly.of([1, 0, 1])
    z = np.array([0, 1j, 2])
    assert np.allclose(p.values(z), [1, 0, 5])


def _random_rational(rng, dn, dd):
    num = Poly.from_roots(list(rng.uniform(-2, 2, dn) + 1j * rng.uniform(-2, 2, dn)), lead=1.5 - 0.5j)
    den = Poly.from_roots(list(rng.uniform(-2, 2, dd) + 1j * rng.uniform(-2, 2, dd)))
    return RationalFn(num, den)


def test_rat_derivative_obeys_the_product_rule():
    rng = np.random.default_rng(3)
    f, g = _random_rational(rng, 2, 1), _random_rational(rng, 1, 2)
    fg = RationalFn(f.num * g.num, f.den * g.den)
    df, dg, dfg = rat_derivative(f), rat_derivative(g), rat_derivative(fg)
    for z in rng.uniform(-3, 3, 20) + 1j * rng.uniform(-3, 3, 20):
        expected = df(z) * g(z) + f(z) * dg(z)
        assert dfg(z) == pytest.approx(expected, rel=1e-9)


def test_rat_derivative_of_constants_and_mobius():
    assert rat_derivative(RationalFn.constant(3.0)).is_zero
    f = RationalFn(Z + ONE, Z - ONE)
    # d/dz (z+1)/(z-1) = -2/(z-1)^2
    assert rat_derivative(f)(3.0) == pytest.approx(-0.5)


def test_normalize_is_idempotent():
    f = RationalFn(Poly.from_roots([1.0, 2.0, 1j]), Poly.from_roots([1.0, -3.0, 1j], lead=4.0))
    once = normalize(f)
    twice = normalize(once)
    assert once.num.degree == twice.num.degree == 1
    assert once.den.degree == twice.den.degree == 1
    assert np.allclose(once.num.array, twice.num.array, rtol=0, atol=1e-12)
    assert np.allclose(once.den.array, twice.den.array, rtol=0, atol=1e-12)


def test_random_roots_are_recovered():
    rng = np.random.default_rng(17)
    for degree in range(1, 9):
        for _ in range(5):
            while True:
                true = rng.uniform(-2, 2, degree) + 1j * rng.uniform(-2, 2, degree)
                gaps = [abs(a - b) for i, a in enumerate(true) for b in true[i + 1:]]
                if not gaps or min(gaps) > 0.25:
                    break
            found = roots(Poly.from_roots(list(true), lead=complex(rng.uniform(0.5, 2.0))))
            assert [m for _, m in found] == [1] * degree
            for z in true:
                assert min(abs(z - w) for w, _ in found) < 1e-8


def test_multiple_roots_are_polished():
    clusters = root_clusters(Poly.from_roots([0.5, 0.5, 0.5, -1.0]))
    assert [c.multiplicity for c in clusters] == [1, 3]
    assert abs(clusters[1].point - 0.5) < 1e-12
    clusters = root_clusters(Poly.from_roots([1.0, 1.0, -2.0]))
    assert abs(clusters[1].point - 1.0) < 1e-12


def test_inaccurate_roots_raise(monkeypatch):
    exact = cpoly._aberth
    monkeypatch.setattr(cpoly, "_aberth", lambda monic, max_iter=600: exact(monic, max_iter) + 1e-6)
    with pytest.raises(RootFindingError, match="backward error"):
        roots(Poly.from_roots([1.0, 2.0, 3.0]))
