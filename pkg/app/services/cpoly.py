"""
Complex polynomials and rational functions in double precision.

Polynomials store coefficients in ascending degree. Roots come from an
Aberth-Ehrlich simultaneous iteration; approximations whose inclusion discs
overlap are merged into one root of summed multiplicity.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from core.config import settings
from core.errors import DomainError, IndeterminateError, RootFindingError

log = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)
TRIM_TOL = 1e-13          # relative size below which a top coefficient is dropped
EVAL_TOL = 1e3 * EPS      # relative size at which num/den count as vanishing
BACKWARD_TOL = 1e-10
CLUSTER_CAP = 1e-3        # largest inclusion radius allowed to merge roots


class Infinity:
    """The point at infinity of the Riemann sphere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (Infinity, ())


INF = Infinity()

SpherePoint = Union[complex, Infinity]


def is_inf(p) -> bool:
    return p is INF


def as_complex(value) -> complex:
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"non-finite complex value {value!r}")
    return z


def point_key(p: SpherePoint) -> Tuple[int, float, float]:
    """Canonical sort key: finite points by (re, im), infinity last."""
    if p is INF:
        return (1, 0.0, 0.0)
    return (0, round(p.real, 9), round(p.imag, 9))


def point_to_json(p: SpherePoint):
    if p is INF:
        return "inf"
    return [p.real, p.imag]


# ─────────────────────────────────────────
# Polynomials
# ─────────────────────────────────────────

def _trim(coeffs: np.ndarray) -> np.ndarray:
    if coeffs.size == 0:
        return coeffs
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        return coeffs[:0]
    keep = len(coeffs)
    while keep > 0 and abs(coeffs[keep - 1]) <= TRIM_TOL * scale:
        keep -= 1
    return coeffs[:keep]


@dataclass(frozen=True)
class Poly:
    coeffs: Tuple[complex, ...]

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=complex).ravel()
        if not np.all(np.isfinite(arr)):
            raise DomainError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in _trim(arr)))

    @classmethod
    def of(cls, coeffs: Iterable) -> "Poly":
        return cls(tuple(complex(c) for c in coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: complex = 1.0) -> "Poly":
        if len(roots) == 0:
            return cls((complex(lead),))
        return cls.of(lead * P.polyfromroots(np.asarray(roots, dtype=complex)))

    @classmethod
    def monomial(cls, k: int, c: complex = 1.0) -> "Poly":
        return cls.of([0.0] * k + [c])

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)

    @cached_property
    def _descending(self) -> Tuple[complex, ...]:
        return tuple(reversed(self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    @property
    def lead(self) -> complex:
        return self.coeffs[-1] if self.coeffs else 0j

    def __call__(self, z: complex) -> complex:
        acc = 0j
        for c in self._descending:
            acc = acc * z + c
        return acc

    def values(self, z: np.ndarray) -> np.ndarray:
        if self.is_zero:
            return np.zeros_like(np.asarray(z, dtype=complex))
        return P.polyval(z, self.array)

    def abs_scale(self, r: float) -> float:
        """sum |a_k| r^k, the rounding scale of an evaluation at |z| = r."""
        acc = 0.0
        for c in self._descending:
            acc = acc * r + abs(c)
        return acc

    def norm(self) -> float:
        return float(np.max(np.abs(self.array))) if self.coeffs else 0.0

    def __add__(self, other: "Poly") -> "Poly":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return Poly.of(P.polyadd(self.array, other.array))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Poly") -> "Poly":
        if self.is_zero or other.is_zero:
            return ZERO
        return Poly.of(P.polymul(self.array, other.array))

    def __pow__(self, k: int) -> "Poly":
        out = ONE
        for _ in range(k):
            out = out * self
        return out

    def scale(self, c: complex) -> "Poly":
        return Poly.of(self.array * c)

    def derivative(self) -> "Poly":
        if self.degree < 1:
            return ZERO
        return Poly.of(P.polyder(self.array))

    def compose(self, q: "Poly") -> "Poly":
        acc = ZERO
        for c in self._descending:
            acc = acc * q + Poly((c,))
        return acc

    def deflate(self, roots: Sequence[complex]) -> "Poly":
        """Divide out the linear factors (z - r); the remainder is dropped."""
        if len(roots) == 0:
            return self
        arr = self.array
        zero_count = sum(1 for r in roots if r == 0)
        if zero_count:
            arr = arr[zero_count:]
        others = [r for r in roots if r != 0]
        if others:
            arr, _ = P.polydiv(arr, P.polyfromroots(np.asarray(others, dtype=complex)))
        return Poly.of(arr)

    def to_json(self) -> List[List[float]]:
        return [[c.real, c.imag] for c in self.coeffs]


ZERO = Poly(())
ONE = Poly((1.0,))
Z = Poly((0.0, 1.0))


def compose_homogeneous(p: Poly, num: Poly, den: Poly, degree: int) -> Poly:
    """sum a_k num^k den^(degree-k): the numerator of p(num/den) * den^degree."""
    if p.degree > degree:
        raise DomainError("homogenizing degree below polynomial degree")
    out = ZERO
    num_pow = ONE
    den_pows = [ONE]
    for _ in range(degree):
        den_pows.append(den_pows[-1] * den)
    for k, a in enumerate(p.coeffs):
        if a != 0:
            out = out + (num_pow * den_pows[degree - k]).scale(a)
        num_pow = num_pow * num
    return out


# ─────────────────────────────────────────
# Root finding
# ─────────────────────────────────────────

@dataclass(frozen=True)
class RootCluster:
    point: complex
    multiplicity: int
    radius: float


def _aberth(monic: np.ndarray, max_iter: int = 600) -> np.ndarray:
    n = len(monic) - 1
    if n == 1:
        return np.array([-monic[0]], dtype=complex)
    bound = 2.0 * max(abs(monic[k]) ** (1.0 / (n - k)) for k in range(n))
    bound = max(bound, 1e-12)
    angles = 2.0 * np.pi * np.arange(n) / n + 0.4
    z = bound * np.exp(1j * angles) * (1.0 + 0.01 * np.cos(3.0 * np.arange(n)))
    der = P.polyder(monic)
    absc = np.abs(monic)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        pz = P.polyval(z, monic)
        dz = P.polyval(z, der)
        scale = P.polyval(np.abs(z), absc)
        done = np.abs(pz) <= 8.0 * n * EPS * scale
        if np.all(done):
            break
        dz = np.where(dz == 0, EPS * (1.0 + np.abs(z)), dz)
        ratio = pz / dz
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        corr = ratio / (1.0 - ratio * inv.sum(axis=1))
        corr[done] = 0.0
        z = z - corr
        if not np.all(np.isfinite(z)):
            raise RootFindingError("Aberth iteration diverged")
    else:
        log.debug("Aberth iteration hit %d iterations, %d/%d converged", max_iter, done.sum(), n)
    return z


def _clusters(monic: np.ndarray, z: np.ndarray, rho: float) -> List[RootCluster]:
    n = len(z)
    pz = np.abs(P.polyval(z, monic))
    scale = P.polyval(np.abs(z), np.abs(monic))
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    prod = np.abs(np.prod(diff, axis=1))
    with np.errstate(divide="ignore"):
        radius = n * (pz + 4.0 * n * EPS * scale) / prod
    mags = np.maximum(1.0, np.abs(z))
    radius = np.minimum(radius, CLUSTER_CAP * mags)

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            d = abs(z[i] - z[j])
            if d <= radius[i] + radius[j] or d <= rho * max(mags[i], mags[j]):
                parent[find(i)] = find(j)

    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        pts = z[members]
        out.append(RootCluster(complex(np.mean(pts)), len(members), float(np.max(radius[members]))))
    return out


def root_clusters(p: Poly) -> List[RootCluster]:
    if p.is_zero:
        raise DomainError("zero polynomial has no finite root set")
    if p.degree < 1:
        raise DomainError("constant polynomial")
    coeffs = p.array
    zeros = 0
    while coeffs[zeros] == 0:
        zeros += 1
    rest = coeffs[zeros:]
    clusters = []
    if zeros:
        clusters.append(RootCluster(0j, zeros, 0.0))
    if len(rest) > 1:
        monic = rest / rest[-1]
        approx = _aberth(monic)
        clusters.extend(_polish(monic, c) for c in _clusters(monic, approx, settings.ROOT_CLUSTER_TOL))
    clusters.sort(key=lambda c: point_key(c.point))
    _check_backward_error(p, clusters)
    return clusters


def _polish(monic: np.ndarray, cluster: RootCluster, max_iter: int = 8) -> RootCluster:
    """Newton on the (m-1)-th derivative, where a root of multiplicity m is simple."""
    m = cluster.multiplicity
    if m == 1:
        return cluster
    d = P.polyder(monic, m - 1)
    dd = P.polyder(d)
    z = cluster.point
    for _ in range(max_iter):
        slope = P.polyval(z, dd)
        if slope == 0:
            break
        step = P.polyval(z, d) / slope
        z -= step
        if abs(step) <= 4.0 * EPS * max(1.0, abs(z)):
            break
    if not abs(z - cluster.point) <= max(cluster.radius, CLUSTER_CAP * max(1.0, abs(cluster.point))):
        log.debug("polishing a %d-fold root moved it too far, kept the cluster mean", m)
        return cluster
    return RootCluster(complex(z), m, cluster.radius)


def _check_backward_error(p: Poly, clusters: List[RootCluster]) -> None:
    expanded = []
    for c in clusters:
        expanded.extend([c.point] * c.multiplicity)
    rebuilt = Poly.from_roots(expanded, p.lead)
    err = (rebuilt - p).norm() / p.norm()
    if err > BACKWARD_TOL:
        raise RootFindingError(f"root backward error {err:.3e} exceeds {BACKWARD_TOL:.0e} for degree {p.degree}")


def roots(p: Poly) -> List[Tuple[complex, int]]:
    """All roots of p with multiplicity, sorted by (re, im)."""
    return [(c.point, c.multiplicity) for c in root_clusters(p)]


# ─────────────────────────────────────────
# Rational functions
# ─────────────────────────────────────────

@dataclass(frozen=True)
class RationalFn:
    num: Poly
    den: Poly = ONE

    def __post_init__(self):
        if self.den.is_zero:
            raise DomainError("denominator is the zero polynomial")

    @classmethod
    def make(cls, num: Poly, den: Poly = ONE) -> "RationalFn":
        return normalize(cls(num, den))

    @classmethod
    def constant(cls, c: complex) -> "RationalFn":
        return cls(Poly((complex(c),)), ONE)

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def degree(self) -> int:
        return max(self.num.degree, self.den.degree)

    def __call__(self, z: SpherePoint):
        return rat_eval(self, z)

    def values(self, z: np.ndarray) -> np.ndarray:
        return self.num.values(z) / self.den.values(z)

    def __mul__(self, other: "RationalFn") -> "RationalFn":
        return RationalFn.make(self.num * other.num, self.den * other.den)

    def __add__(self, other: "RationalFn") -> "RationalFn":
        return RationalFn.make(self.num * other.den + other.num * self.den, self.den * other.den)

    def scale(self, c: complex) -> "RationalFn":
        return RationalFn(self.num.scale(c), self.den)

    def to_json(self) -> dict:
        return {"num": self.num.to_json(), "den": self.den.to_json()}


def normalize(f: RationalFn) -> RationalFn:
    """Cancel shared roots by deflation and make the denominator monic."""
    num, den = f.num, f.den
    if num.is_zero:
        return RationalFn(ZERO, ONE)
    if num.degree >= 1 and den.degree >= 1:
        num_clusters = root_clusters(num)
        den_clusters = root_clusters(den)
        rho = settings.ROOT_CLUSTER_TOL
        cut_num: List[complex] = []
        cut_den: List[complex] = []
        remaining = {i: c.multiplicity for i, c in enumerate(num_clusters)}
        for d in den_clusters:
            left = d.multiplicity
            for i, c in enumerate(num_clusters):
                if left == 0:
                    break
                if remaining[i] == 0:
                    continue
                gap = abs(c.point - d.point)
                if gap <= max(rho * max(1.0, abs(d.point)), c.radius + d.radius):
                    k = min(left, remaining[i])
                    cut_num.extend([c.point] * k)
                    cut_den.extend([d.point] * k)
                    remaining[i] -= k
                    left -= k
        if cut_num:
            log.debug("cancelled %d common root(s)", len(cut_num))
            num = num.deflate(cut_num)
            den = den.deflate(cut_den)
    lead = den.lead
    if lead != 1.0:
        num = num.scale(1.0 / lead)
        den = den.scale(1.0 / lead)
    return RationalFn(num, den)


def rat_eval(f: RationalFn, z: SpherePoint):
    """f(z), or INF at a pole; raises IndeterminateError on 0/0."""
    if z is INF:
        dn, dd = f.num.degree, f.den.degree
        if f.num.is_zero or dn < dd:
            return 0j
        if dn > dd:
            return INF
        return f.num.lead / f.den.lead
    n = f.num(z)
    d = f.den(z)
    r = abs(z)
    den_small = abs(d) <= EVAL_TOL * f.den.abs_scale(r)
    if den_small:
        if f.num.is_zero or abs(n) <= EVAL_TOL * f.num.abs_scale(r):
            raise IndeterminateError(f"0/0 at z={z!r}")
        return INF
    return n / d


def rat_derivative(f: RationalFn) -> RationalFn:
    if f.num.is_zero or (f.num.degree < 1 and f.den.degree < 1):
        return RationalFn(ZERO, ONE)
    num = f.num.derivative() * f.den - f.num * f.den.derivative()
    return RationalFn.make(num, f.den * f.den)


def compose_rational(f: RationalFn, psi: RationalFn) -> Tuple[Poly, Poly, int]:
    """Homogeneous pieces of f(psi): returns (N~, D~, e) with
    f(P/Q) = N~ * Q**e / D~ for e >= 0 (or N~ / (D~ * Q**-e) for e < 0)."""
    dn, dd = f.num.degree, f.den.degree
    num = compose_homogeneous(f.num, psi.num, psi.den, dn)
    den = compose_homogeneous(f.den, psi.num, psi.den, dd)
    return num, den, dd - dn
