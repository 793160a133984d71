"""
Quadratic differentials f(z) dz^2 on the Riemann sphere.

The coefficient is a normalized rational function in the affine chart z; the
chart at infinity is w = 1/z with coefficient f(1/w) / w^4.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from core.errors import DomainError
from services.cpoly import (
    INF,
    Poly,
    RationalFn,
    RootCluster,
    SpherePoint,
    compose_rational,
    normalize,
    point_key,
    rat_eval,
    root_clusters,
)
from services.mobius import MobiusMap

log = logging.getLogger(__name__)

POINT_TOL = 1e-7


@dataclass(frozen=True)
class DivisorEntry:
    point: SpherePoint
    order: int

    def __post_init__(self):
        if self.order == 0:
            raise DomainError("divisor entries have nonzero order")


@dataclass(frozen=True)
class PoleData:
    point: SpherePoint
    leading_coeff: complex

    @property
    def root(self) -> complex:
        return cmath.sqrt(-self.leading_coeff)

    @property
    def perimeter(self) -> float:
        """2 pi sqrt(-c_-2), principal branch (real and positive for Strebel-type poles)."""
        return 2.0 * math.pi * self.root.real

    @property
    def perimeter_imag(self) -> float:
        return 2.0 * math.pi * self.root.imag

    @property
    def is_real(self) -> bool:
        return abs(self.perimeter_imag) <= 1e-9 * max(1.0, abs(self.perimeter))


@dataclass(frozen=True)
class QuadDiff:
    f: RationalFn
    label: Optional[str] = None

    def __post_init__(self):
        if self.f.is_zero:
            raise DomainError("a quadratic differential needs a nonzero coefficient")

    @classmethod
    def make(cls, f: RationalFn, label: Optional[str] = None) -> "QuadDiff":
        return cls(normalize(f), label)

    @cached_property
    def zero_clusters(self) -> List[RootCluster]:
        return root_clusters(self.f.num) if self.f.num.degree >= 1 else []

    @cached_property
    def pole_clusters(self) -> List[RootCluster]:
        return root_clusters(self.f.den) if self.f.den.degree >= 1 else []

    @cached_property
    def order_at_infinity(self) -> int:
        return -4 - self.f.num.degree + self.f.den.degree

    @cached_property
    def w_chart(self) -> RationalFn:
        return chart_transform(self.f)

    @cached_property
    def entries(self) -> List[DivisorEntry]:
        return divisor(self)

    def coefficient(self, z: SpherePoint):
        return rat_eval(self.f, z)


# ─────────────────────────────────────────
# Charts and divisors
# ─────────────────────────────────────────

def _reverse(p: Poly) -> Poly:
    return Poly.of(reversed(p.coeffs))


def chart_transform(f: RationalFn) -> RationalFn:
    """Coefficient in the chart w = 1/z: f(1/w) / w^4."""
    dn, dd = f.num.degree, f.den.degree
    num, den = _reverse(f.num), _reverse(f.den)
    shift = dd - dn - 4
    if shift >= 0:
        num = num * Poly.monomial(shift)
    else:
        den = den * Poly.monomial(-shift)
    lead = den.lead
    return RationalFn(num.scale(1.0 / lead), den.scale(1.0 / lead))


def divisor(omega: QuadDiff) -> List[DivisorEntry]:
    out = [DivisorEntry(c.point, c.multiplicity) for c in omega.zero_clusters]
    out += [DivisorEntry(c.point, -c.multiplicity) for c in omega.pole_clusters]
    if omega.order_at_infinity != 0:
        out.append(DivisorEntry(INF, omega.order_at_infinity))
    out.sort(key=lambda e: point_key(e.point))
    total = sum(e.order for e in out)
    if total != -4:
        raise DomainError(f"divisor degree {total} != -4")
    return out


def same_point(p: SpherePoint, q: SpherePoint, tol: float = POINT_TOL) -> bool:
    if p is INF or q is INF:
        return p is q
    return abs(p - q) <= tol * max(1.0, abs(p))


def _cluster_at(clusters: List[RootCluster], p: complex, tol: float) -> Optional[RootCluster]:
    for c in clusters:
        if abs(c.point - p) <= max(tol * max(1.0, abs(p)), c.radius):
            return c
    return None


def _deflated_value(poly: Poly, clusters: List[RootCluster], skip: Optional[RootCluster], p: complex) -> complex:
    value = poly.lead
    for c in clusters:
        if c is skip:
            continue
        value *= (p - c.point) ** c.multiplicity
    return value


def leading_coefficient(omega: QuadDiff, p: SpherePoint, tol: float = 1e-6) -> Tuple[int, complex]:
    """(k, c) with f ~ c (z - p)^k at p; at infinity the w-chart is used."""
    if p is INF:
        return _leading_in(omega.w_chart, 0j, tol)
    zc = _cluster_at(omega.zero_clusters, p, tol)
    pc = _cluster_at(omega.pole_clusters, p, tol)
    if zc is None and pc is None:
        value = rat_eval(omega.f, p)
        return 0, value
    k = 0
    num_val = omega.f.num(p) if zc is None else _deflated_value(omega.f.num, omega.zero_clusters, zc, zc.point)
    den_val = omega.f.den(p) if pc is None else _deflated_value(omega.f.den, omega.pole_clusters, pc, pc.point)
    if zc is not None:
        k += zc.multiplicity
    if pc is not None:
        k -= pc.multiplicity
    return k, num_val / den_val


def _leading_in(f: RationalFn, p: complex, tol: float) -> Tuple[int, complex]:
    nz = root_clusters(f.num) if f.num.degree >= 1 else []
    dz = root_clusters(f.den) if f.den.degree >= 1 else []
    zc = _cluster_at(nz, p, tol)
    pc = _cluster_at(dz, p, tol)
    num_val = f.num(p) if zc is None else _deflated_value(f.num, nz, zc, zc.point)
    den_val = f.den(p) if pc is None else _deflated_value(f.den, dz, pc, pc.point)
    k = (zc.multiplicity if zc else 0) - (pc.multiplicity if pc else 0)
    return k, num_val / den_val


def pole_perimeter(omega: QuadDiff, p: SpherePoint) -> PoleData:
    k, c = leading_coefficient(omega, p)
    if k != -2:
        raise DomainError(f"{p!r} is not a double pole (order {k})")
    if p is not INF:
        pc = _cluster_at(omega.pole_clusters, p, 1e-6)
        p = pc.point
    return PoleData(p, c)


def double_poles(omega: QuadDiff) -> List[PoleData]:
    return [pole_perimeter(omega, e.point) for e in omega.entries if e.order == -2]


# ─────────────────────────────────────────
# Pullbacks
# ─────────────────────────────────────────

def rational_pullback(psi: RationalFn, omega: QuadDiff) -> QuadDiff:
    """psi* omega = f(psi(z)) psi'(z)^2 dz^2, composed symbolically then normalized."""
    psi = normalize(psi)
    P, Q = psi.num, psi.den
    if max(P.degree, Q.degree) < 1:
        raise DomainError("pullback along a constant map")
    f = omega.f
    num, den, _ = compose_rational(f, psi)
    wronskian = P.derivative() * Q - P * Q.derivative()
    num = num * wronskian * wronskian
    shift = f.den.degree - f.num.degree - 4
    if shift >= 0:
        num = num * Q ** shift
    else:
        den = den * Q ** (-shift)
    label = f"pullback({omega.label})" if omega.label else None
    result = QuadDiff.make(RationalFn(num, den), label)
    log.debug("pullback: num degree %d, den degree %d", result.f.num.degree, result.f.den.degree)
    return result


def mobius_pullback(M: MobiusMap, omega: QuadDiff) -> QuadDiff:
    return rational_pullback(M.to_rational(), omega)


def _fiber(psi: RationalFn, q: SpherePoint, at_infinity: Tuple[SpherePoint, int]) -> List[Tuple[SpherePoint, int]]:
    P, Q = psi.num, psi.den
    poly = Q if q is INF else P - Q.scale(q)
    out: List[Tuple[SpherePoint, int]] = []
    if poly.degree >= 1:
        out += [(c.point, c.multiplicity) for c in root_clusters(poly)]
    q_inf, e_inf = at_infinity
    if same_point(q_inf, q):
        out.append((INF, e_inf))
    return out


def _infinity_image(psi: RationalFn) -> Tuple[SpherePoint, int]:
    P, Q = psi.num, psi.den
    d = max(P.degree, Q.degree)
    if P.degree > Q.degree:
        return INF, P.degree - Q.degree
    if P.degree < Q.degree:
        return 0j, Q.degree - max(P.degree, 0)
    value = P.lead / Q.lead
    return value, d - max((P - Q.scale(value)).degree, 0)


def order_law(e: int, k: int) -> int:
    """Order of the pullback at a point of ramification index e over a point of order k."""
    return e * (k + 2) - 2


def pullback_orders(psi: RationalFn, omega: QuadDiff) -> List[DivisorEntry]:
    """Divisor of psi*omega predicted by ord_p = e_p (ord_psi(p) + 2) - 2."""
    psi = normalize(psi)
    P, Q = psi.num, psi.den
    if max(P.degree, Q.degree) < 1:
        raise DomainError("pullback along a constant map")
    at_inf = _infinity_image(psi)
    support = [(e.point, e.order) for e in omega.entries]

    predicted: Dict[Tuple, DivisorEntry] = {}

    def record(p: SpherePoint, order: int):
        if order != 0:
            predicted[point_key(p)] = DivisorEntry(p, order)

    for q, k in support:
        for p, e in _fiber(psi, q, at_inf):
            record(p, order_law(e, k))

    wronskian = P.derivative() * Q - P * Q.derivative()
    ramified: List[Tuple[SpherePoint, int]] = []
    if wronskian.degree >= 1:
        ramified += [(c.point, c.multiplicity + 1) for c in root_clusters(wronskian)]
    if at_inf[1] > 1:
        ramified.append((INF, at_inf[1]))
    for p, e in ramified:
        image = rat_eval(psi, p)
        if any(same_point(image, q, 1e-6) for q, _ in support):
            continue
        record(p, order_law(e, 0))

    return sorted(predicted.values(), key=lambda e: point_key(e.point))


def order_law_mismatches(predicted: List[DivisorEntry], actual: List[DivisorEntry], tol: float = 1e-6) -> List[str]:
    """Differences between two divisors, matched pointwise within tol."""
    problems = []
    unmatched = list(actual)
    for entry in predicted:
        hit = next((a for a in unmatched if same_point(a.point, entry.point, tol)), None)
        if hit is None:
            problems.append(f"missing {entry.point!r} (order {entry.order})")
            continue
        unmatched.remove(hit)
        if hit.order != entry.order:
            problems.append(f"order at {entry.point!r}: predicted {entry.order}, found {hit.order}")
    problems += [f"unexpected {a.point!r} (order {a.order})" for a in unmatched]
    return problems

