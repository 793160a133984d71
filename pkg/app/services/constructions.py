"""
Explicit constructions of Strebel differentials.

- a one-parameter family of four-simple-pole differentials moved by a Mobius
  map so its poles sit at 0, 1, infinity and 1/2 + ri (hyperelliptic branch data);
- the slope criterion for c' (dz/sqrt(P))^2 on an elliptic curve;
- a quartic cover p ramified over three points of the critical graph of q1,
  whose pullback of q1 has periods split into L and 1 - L;
- the combinatorics of leaf preimages under a double cover.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from core.config import settings
from core.errors import DomainError, NumericalError, SolverError
from services.cpoly import (
    INF,
    ONE,
    Poly,
    RationalFn,
    SpherePoint,
    as_complex,
    point_key,
    point_to_json,
    rat_derivative,
    rat_eval,
)
from services.flow import TraceConfig, integrate_unit
from services.mobius import H, MobiusMap, build_phi, inverse
from services.qdiff import (
    DivisorEntry,
    QuadDiff,
    double_poles,
    mobius_pullback,
    order_law,
    order_law_mismatches,
    pullback_orders,
    rational_pullback,
    same_point,
)
from services.strebel import classify_periods, critical_graph, ell, periods, ring_domains

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
BRANCH_TOL = 1e-9
WITNESS_ANGLE_TOL = 1e-9
COVER_RESIDUAL = 1e-10
MIN_SEPARATION = 1e-6
MAX_MAGNITUDE = 1e6


# ─────────────────────────────────────────
# Named differentials
# ─────────────────────────────────────────

def q1() -> QuadDiff:
    """-(1/pi^2) (z^2 - z + 1) / (z^2 (1 - z)^2) dz^2: double poles at 0, 1, infinity."""
    num = Poly.of([1.0, -1.0, 1.0]).scale(-1.0 / math.pi ** 2)
    den = Poly.of([0.0, 0.0, 1.0, -2.0, 1.0])
    return QuadDiff.make(RationalFn(num, den), "q1")


def omega_ab(a: float, b: float) -> QuadDiff:
    """dz^2 / ((z^2 - a^2)(z^2 + b^2))."""
    if a == 0 or b == 0:
        raise DomainError("omega_ab needs a != 0 and b != 0")
    den = Poly.of([-a * a, 0.0, 1.0]) * Poly.of([b * b, 0.0, 1.0])
    return QuadDiff.make(RationalFn(ONE, den), f"omega:{a:g},{b:g}")


def from_branch_points(points: Sequence[SpherePoint], scale: complex = 1.0, label: Optional[str] = None) -> QuadDiff:
    """scale * dz^2 / prod (z - a_i); a branch point at infinity drops its factor."""
    finite = [complex(p) for p in points if p is not INF]
    den = Poly.from_roots(finite) if finite else ONE
    return QuadDiff.make(RationalFn(Poly((complex(scale),)), den), label)


# ─────────────────────────────────────────
# Hyperelliptic family
# ─────────────────────────────────────────

def solve_ab(r: float) -> Tuple[float, float]:
    """a = 1 and the positive b with (1/4)(b/a - a/b) = r."""
    r = float(r)
    root = math.sqrt(4.0 * r * r + 1.0)
    b = 2.0 * r + root if r >= 0 else 1.0 / (root - 2.0 * r)
    return 1.0, b


def hyperelliptic_closed_form(a: float, b: float) -> RationalFn:
    """4a^2(a^2+b^2)^2 / ((N^2 - a^2 D^2)(N^2 + b^2 D^2)), N = 2abi z - a(a+bi), D = 2a z - (a+bi)."""
    s = complex(a, b)
    N = Poly.of([-a * s, 2j * a * b])
    D = Poly.of([-s, 2.0 * a])
    num = Poly((4.0 * a * a * (a * a + b * b) ** 2,))
    den = (N * N - (D * D).scale(a * a)) * (N * N + (D * D).scale(b * b))
    return RationalFn(num, den)


@dataclass(frozen=True)
class BranchOrder:
    point: SpherePoint
    base_order: int
    ramification: int
    pulled_order: int


@dataclass
class HyperellipticSpec:
    r: float
    extra_branch: List[SpherePoint]
    a: float
    b: float
    base_diff: QuadDiff
    phi: MobiusMap
    certificate: List[BranchOrder] = field(default_factory=list)

    @property
    def beta1(self) -> complex:
        return complex(0.5, self.r)

    @property
    def branch_points(self) -> List[SpherePoint]:
        return [0j, 1 + 0j, INF, self.beta1] + list(self.extra_branch)

    @property
    def genus(self) -> Optional[int]:
        n = len(self.branch_points)
        return (n - 2) // 2 if n % 2 == 0 else None

    @property
    def pulled_degree(self) -> int:
        """Degree of the pulled-back divisor on the double cover."""
        return 2 * (-4) + sum(2 * (c.ramification - 1) for c in self.certificate)

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "a": self.a,
            "b": self.b,
            "beta1": point_to_json(self.beta1),
            "extra_branch": [point_to_json(p) for p in self.extra_branch],
            "genus": self.genus,
            "base_diff": self.base_diff.f.to_json(),
            "phi": self.phi.to_json(),
            "certificate": [
                {
                    "point": point_to_json(c.point),
                    "base_order": c.base_order,
                    "ramification": c.ramification,
                    "pulled_order": c.pulled_order,
                }
                for c in self.certificate
            ],
            "pulled_degree": self.pulled_degree,
        }


def _distinct(points: Sequence[SpherePoint], tol: float = BRANCH_TOL) -> bool:
    for i, p in enumerate(points):
        for q in points[i + 1:]:
            if same_point(p, q, tol):
                return False
    return True


def build_hyperelliptic(r: float, extra: Sequence[SpherePoint] = ()) -> HyperellipticSpec:
    a, b = solve_ab(r)
    beta1 = complex(0.5, r)
    fixed = [0j, 1 + 0j, INF, beta1]
    extra = [p if p is INF else as_complex(p) for p in extra]
    if not _distinct(fixed + extra):
        raise DomainError("branch points collide")

    phi = build_phi(a, b)
    base = mobius_pullback(inverse(phi), omega_ab(a, b))
    base = QuadDiff(base.f, f"hyper:{r:g}")
    expected = [DivisorEntry(p, -1) for p in fixed]
    problems = order_law_mismatches(sorted(expected, key=lambda e: point_key(e.point)), base.entries)
    if problems:
        raise NumericalError("family differential has unexpected divisor: " + "; ".join(problems))

    certificate = [BranchOrder(p, -1, 2, order_law(2, -1)) for p in fixed]
    certificate += [BranchOrder(p, 0, 2, order_law(2, 0)) for p in extra]
    spec = HyperellipticSpec(float(r), extra, a, b, base, phi, certificate)
    log.info("hyperelliptic branch data: r=%g, %d extra point(s), genus %s", r, len(extra), spec.genus)
    return spec


# ─────────────────────────────────────────
# Elliptic slope criterion
# ─────────────────────────────────────────

@dataclass(frozen=True)
class EllipticPeriods:
    branch_points: Tuple[SpherePoint, ...]
    omega1: complex
    omega2: complex

    @property
    def tau(self) -> complex:
        return self.omega2 / self.omega1


@dataclass
class EllipticSlopeReport:
    branch_points: List[SpherePoint]
    tau: complex
    c_prime: complex
    direction: float
    rational_witness: Optional[Tuple[int, int]]
    q_bound: int
    omega1: complex
    omega2: complex

    @property
    def strebel(self) -> bool:
        return self.rational_witness is not None

    def to_json(self) -> dict:
        return {
            "branch_points": [point_to_json(p) for p in self.branch_points],
            "tau": [self.tau.real, self.tau.imag],
            "c_prime": [self.c_prime.real, self.c_prime.imag],
            "direction": self.direction,
            "rational_witness": list(self.rational_witness) if self.rational_witness else None,
            "q_bound": self.q_bound,
            "periods": [[self.omega1.real, self.omega1.imag], [self.omega2.real, self.omega2.imag]],
            "verdict": "Strebel" if self.strebel else "NoWitnessWithinBound",
        }


def _half_period(finite: Sequence[complex], start: complex, end: complex) -> complex:
    """Integral of dz / sqrt(prod (z - a)) along [start, end], branch carried continuously."""
    roots = np.asarray(finite, dtype=complex)
    d = end - start

    def integrand(s):
        g = s * s * (3.0 - 2.0 * s)
        dg = 6.0 * s * (1.0 - s)
        z = start + d * g
        root = np.sqrt(np.prod(z[:, None] - roots[None, :], axis=1))
        for k in range(1, len(root)):
            if abs(root[k] - root[k - 1]) > abs(root[k] + root[k - 1]):
                root[k] = -root[k]
        return d * dg / root

    return complex(integrate_unit(integrand, rel_tol=1e-12, cap=8192))


def elliptic_periods(points: Sequence[SpherePoint]) -> EllipticPeriods:
    """Lattice periods of dz / sqrt(prod (z - a_i)) from consecutive pairs of the sorted branch points."""
    pts = [p if p is INF else as_complex(p) for p in points]
    if len(pts) != 4 or not _distinct(pts):
        raise DomainError("the elliptic test needs 4 distinct branch points")
    pts.sort(key=point_key)
    finite = [p for p in pts if p is not INF]
    e1, e2, e3 = finite[0], finite[1], finite[2]
    omega1 = 2.0 * _half_period(finite, e1, e2)
    omega2 = 2.0 * _half_period(finite, e2, e3)
    tau = omega2 / omega1
    if abs(tau.imag) < 1e-12:
        raise NumericalError("computed periods are not independent")
    if tau.imag < 0:
        omega2 = -omega2
    return EllipticPeriods(tuple(pts), omega1, omega2)


def _wrap(angle: float) -> float:
    """Angle reduced to (-pi/2, pi/2]."""
    out = math.fmod(angle, math.pi)
    if out <= -math.pi / 2:
        out += math.pi
    elif out > math.pi / 2:
        out -= math.pi
    return out


def lattice_witness(tau: complex, direction: float, q_bound: int,
                    tol: float = WITNESS_ANGLE_TOL) -> Optional[Tuple[int, int]]:
    """Coprime (m, n), smallest max(|m|, |n|) first, with m + n tau parallel to e^(i direction)."""
    span = np.arange(-q_bound, q_bound + 1)
    m, n = np.meshgrid(span, span, indexing="ij")
    m, n = m.ravel(), n.ravel()
    keep = ((m > 0) | ((m == 0) & (n > 0))) & (np.gcd(m, n) == 1)
    m, n = m[keep], n[keep]
    angles = np.angle(m + n * tau) - direction
    gap = np.abs(np.mod(angles + math.pi / 2, math.pi) - math.pi / 2)
    hits = np.nonzero(gap <= tol)[0]
    if hits.size == 0:
        return None
    order = sorted(hits, key=lambda i: (max(abs(m[i]), abs(n[i])), m[i], n[i]))
    best = order[0]
    return int(m[best]), int(n[best])


def elliptic_strebel_test(points: Sequence[SpherePoint], c_prime: complex,
                          q_bound: Optional[int] = None) -> EllipticSlopeReport:
    c_prime = as_complex(c_prime)
    if c_prime == 0:
        raise DomainError("c' must be nonzero")
    q_bound = settings.ELLIPTIC_Q_BOUND if q_bound is None else int(q_bound)
    if q_bound < 1:
        raise DomainError("Q must be at least 1")
    lattice = elliptic_periods(points)
    theta = -math.atan2(c_prime.imag, c_prime.real) / 2.0
    direction = _wrap(theta - math.atan2(lattice.omega1.imag, lattice.omega1.real))
    witness = lattice_witness(lattice.tau, direction, q_bound)
    log.info("elliptic test: tau=%s direction=%.12g witness=%s", lattice.tau, direction, witness)
    return EllipticSlopeReport(
        list(lattice.branch_points), lattice.tau, c_prime, direction, witness, q_bound,
        lattice.omega1, lattice.omega2,
    )


# ─────────────────────────────────────────
# Quartic cover
# ─────────────────────────────────────────

def cover_targets(r: float) -> Tuple[complex, complex, complex, complex]:
    """(c, a1, a2, a3) with c = 1/2 + i r sqrt(3), a1 = h(c), a2 = c, a3 = h^-1(c)."""
    r = float(r)
    if not 0 < r < 0.5:
        raise DomainError("cover construction needs 0 < r < 1/2")
    c = complex(0.5, r * SQRT3)
    return c, H(c), c, inverse(H)(c)


def quartic(b: Sequence[complex]) -> Poly:
    """z^4 - (4/3) s1 z^3 + 2 s2 z^2 - 4 s3 z + s3, so p' = 4 (z - b1)(z - b2)(z - b3)."""
    b1, b2, b3 = b
    s1 = b1 + b2 + b3
    s2 = b1 * b2 + b2 * b3 + b3 * b1
    s3 = b1 * b2 * b3
    return Poly.of([s3, -4.0 * s3, 2.0 * s2, -4.0 / 3.0 * s1, 1.0])


def _system(b: np.ndarray, targets: np.ndarray) -> np.ndarray:
    p = quartic(b)
    return np.array([p(b[i]) for i in range(3)]) - targets


def _jacobian(b: np.ndarray) -> np.ndarray:
    s1 = b.sum()
    J = np.empty((3, 3), dtype=complex)
    for j in range(3):
        others = np.delete(b, j)
        pj = others[0] * others[1]
        for i in range(3):
            z = b[i]
            J[i, j] = -4.0 / 3.0 * z ** 3 + 2.0 * (s1 - b[j]) * z ** 2 - 4.0 * pj * z + pj
    return J


def _newton(b: np.ndarray, targets: np.ndarray, max_iter: int) -> Tuple[np.ndarray, float]:
    res = float(np.max(np.abs(_system(b, targets))))
    for _ in range(max_iter):
        if res < 1e-14:
            break
        try:
            step = np.linalg.solve(_jacobian(b), -_system(b, targets))
        except np.linalg.LinAlgError:
            break
        damping = 1.0
        while damping > 1e-8:
            trial = b + damping * step
            trial_res = float(np.max(np.abs(_system(trial, targets))))
            if trial_res < res:
                b, res = trial, trial_res
                break
            damping *= 0.5
        else:
            break
    return b, res


@dataclass(frozen=True)
class CoverSolution:
    b1: complex
    b2: complex
    b3: complex
    c0: complex
    c1: complex
    c2: complex
    c3: complex
    c: complex
    residual: float
    targets: Tuple[complex, complex, complex] = (0j, 0j, 0j)

    @property
    def b(self) -> Tuple[complex, complex, complex]:
        return (self.b1, self.b2, self.b3)

    @property
    def second_derivatives(self) -> List[complex]:
        """p''(b_i); nonzero means simple ramification at b_i."""
        d2 = rat_derivative(rat_derivative(cover_map(self)))
        return [rat_eval(d2, x) for x in self.b]

    def to_json(self) -> dict:
        pair = lambda z: [z.real, z.imag]
        return {
            "b": [pair(x) for x in self.b],
            "coefficients": [pair(x) for x in (self.c0, self.c1, self.c2, self.c3)],
            "c": pair(self.c),
            "targets": [pair(x) for x in self.targets],
            "residual": self.residual,
            "second_derivatives": [pair(x) for x in self.second_derivatives],
        }


def _acceptable(b: np.ndarray) -> bool:
    if np.max(np.abs(b)) > MAX_MAGNITUDE:
        return False
    return min(abs(b[i] - b[j]) for i in range(3) for j in range(i + 1, 3)) >= MIN_SEPARATION


def cover_solver(r: float) -> CoverSolution:
    """Finite (b1, b2, b3) with p(b_i) = a_i, by damped Newton from seeded random starts."""
    c, a1, a2, a3 = cover_targets(r)
    targets = np.array([a1, a2, a3], dtype=complex)
    rng = np.random.default_rng(settings.STREBEL_SEED)
    centre = targets.mean()
    radius = settings.NEWTON_RADIUS

    found: List[Tuple[float, np.ndarray]] = []
    best_residual = math.inf
    for start in range(settings.NEWTON_STARTS):
        rad = radius * np.sqrt(rng.random(3))
        ang = 2.0 * math.pi * rng.random(3)
        b0 = centre + rad * np.exp(1j * ang)
        b, res = _newton(b0, targets, settings.NEWTON_MAX_ITER)
        best_residual = min(best_residual, res)
        if res < COVER_RESIDUAL and _acceptable(b):
            found.append((res, b))
        elif res < COVER_RESIDUAL:
            log.debug("start %d converged to a degenerate point, skipped", start)
    if not found:
        log.warning("cover solver: no start converged (best residual %.3e)", best_residual)
        raise SolverError(f"no Newton start converged for r={r}", best_residual)

    res, b = min(found, key=lambda item: (item[0], item[1][0].real, item[1][0].imag))
    p = quartic(b)
    c0, c1, c2, c3 = p.coeffs[:4]
    log.info("cover solver: %d/%d starts converged, residual %.3e", len(found), settings.NEWTON_STARTS, res)
    return CoverSolution(complex(b[0]), complex(b[1]), complex(b[2]), c0, c1, c2, c3, c, res,
                         (complex(a1), complex(a2), complex(a3)))


def cover_map(sol: CoverSolution) -> RationalFn:
    return RationalFn(Poly.of([sol.c0, sol.c1, sol.c2, sol.c3, 1.0]))


@dataclass
class InfinityCertificate:
    reduced_at_ones: List[sp.Rational]
    jacobian: List[List[sp.Rational]]
    rank: int
    empty_at_infinity: bool

    def to_json(self) -> dict:
        return {
            "reduced_at_ones": [str(v) for v in self.reduced_at_ones],
            "jacobian": [[str(v) for v in row] for row in self.jacobian],
            "rank": self.rank,
            "empty_at_infinity": self.empty_at_infinity,
        }


def _homogenized_system():
    b1, b2, b3, b4 = sp.symbols("b1 b2 b3 b4")
    a = sp.symbols("a1 a2 a3")
    s1 = b1 + b2 + b3
    s2 = b1 * b2 + b2 * b3 + b3 * b1
    s3 = b1 * b2 * b3
    eqs = [
        sp.expand(z ** 4 - sp.Rational(4, 3) * s1 * z ** 3 + 2 * s2 * z ** 2 - 4 * s3 * z + s3 * b4 - ai * b4 ** 4)
        for z, ai in zip((b1, b2, b3), a)
    ]
    return (b1, b2, b3, b4), eqs


def infinity_certificate() -> InfinityCertificate:
    """Symbolic facts about the homogenized cover system on the hyperplane b4 = 0."""
    (b1, b2, b3, b4), eqs = _homogenized_system()
    at_infinity = [sp.expand(e.subs(b4, 0)) for e in eqs]
    reduced = [sp.cancel(e / z ** 2) for e, z in zip(at_infinity, (b1, b2, b3))]
    ones = {b1: 1, b2: 1, b3: 1}
    reduced_at_ones = [sp.nsimplify(e.subs(ones)) for e in reduced]

    chart = [e.subs(b3, 1) for e in eqs]
    point = {b1: 1, b2: 1, b4: 0}
    jac = sp.Matrix([[sp.diff(e, v).subs(point) for v in (b1, b2, b4)] for e in chart])

    empty = True
    for fixed, free in (({b3: 1}, (b1, b2)), ({b3: 0, b2: 1}, (b1,)), ({b3: 0, b2: 0, b1: 1}, ())):
        polys = [sp.expand(e.subs(fixed)) for e in at_infinity]
        if free:
            basis = sp.groebner(polys, *free, order="lex")
            empty = empty and list(basis.exprs) == [1]
        else:
            empty = empty and any(p != 0 for p in polys)
    log.debug("b4 = 0 certificate: reduced(1,1,1)=%s rank=%d empty=%s", reduced_at_ones, jac.rank(), empty)
    return InfinityCertificate(reduced_at_ones, [list(jac.row(i)) for i in range(3)], jac.rank(), empty)


@dataclass
class CoverPeriodReport:
    L: float
    periods: List[Tuple[float, Optional[str]]]
    perimeters: List[Tuple[SpherePoint, float, int]]
    verdict: str
    order_law_problems: List[str]
    ring_mismatch: float

    @property
    def all_classified(self) -> bool:
        return all(label is not None for _, label in self.periods)

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "periods": [{"value": v, "class": label} for v, label in self.periods],
            "perimeters": [
                {"point": point_to_json(p), "perimeter": per, "multiple": m} for p, per, m in self.perimeters
            ],
            "verdict": self.verdict,
            "order_law_problems": self.order_law_problems,
            "ring_mismatch": self.ring_mismatch,
        }


def verify_cover_periods(sol: CoverSolution, cfg: Optional[TraceConfig] = None,
                         tol: float = 1e-6) -> CoverPeriodReport:
    if sol.residual >= COVER_RESIDUAL:
        raise DomainError(f"cover residual {sol.residual:.3e} is too large")
    cfg = cfg or TraceConfig.from_settings()
    base = q1()
    psi = cover_map(sol)
    pulled = rational_pullback(psi, base)
    pulled = QuadDiff(pulled.f, "p*q1")
    problems = order_law_mismatches(pullback_orders(psi, base), pulled.entries)
    if problems:
        log.warning("pullback divisor disagrees with the order law: %s", "; ".join(problems))

    g = critical_graph(pulled, cfg)
    if not g.verdict.is_strebel:
        raise NumericalError(f"pulled-back differential is not verdict-Strebel ({g.verdict.kind.value})")
    table = periods(g, pulled)
    L = ell(base, sol.c)
    labels = classify_periods(table.values, {"L": L, "1-L": 1.0 - L, "1": 1.0}, tol)

    unit = double_poles(base)[0].perimeter
    perims = [(pd.point, pd.perimeter, int(round(pd.perimeter / unit))) for pd in double_poles(pulled)]
    mismatch = max((d.mismatch or 0.0) for d in ring_domains(g, pulled)) if g.edges else 0.0
    return CoverPeriodReport(L, list(zip(table.values, labels)), perims, g.verdict.kind.value, problems, mismatch)


# ─────────────────────────────────────────
# Leaf preimages under a double cover
# ─────────────────────────────────────────

@dataclass(frozen=True)
class Intersection:
    loops: Tuple[int, int]
    transverse: bool


@dataclass
class PreimageGraph:
    n: int
    on_critical: bool
    loops: int
    intersections: List[Intersection]

    def vertices(self) -> List[int]:
        return list(range(len(self.intersections)))

    def edges(self) -> List[Tuple[int, int, int]]:
        """(loop, from vertex, to vertex): each loop is cut into arcs at its intersection points."""
        out = []
        for loop in range(self.loops):
            on_loop = [v for v, x in enumerate(self.intersections) if loop in x.loops]
            for k, v in enumerate(on_loop):
                out.append((loop, v, on_loop[(k + 1) % len(on_loop)]))
        return out

    @property
    def euler_from_cells(self) -> int:
        return len(self.vertices()) - len(self.edges())

    @property
    def euler_from_counts(self) -> int:
        return -len(self.intersections)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "on_critical": self.on_critical,
            "loops": self.loops,
            "intersections": [{"loops": list(x.loops), "transverse": x.transverse} for x in self.intersections],
            "vertices": len(self.vertices()),
            "edges": len(self.edges()),
            "euler": self.euler_from_cells,
        }


def build_preimage_graph(n: int, on_critical: bool) -> PreimageGraph:
    """Loops and intersections of the preimage of a chain of leaves through n branch points."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if on_critical:
        return PreimageGraph(n, True, n + 1, [Intersection((i - 1, i), True) for i in range(1, n + 1)])
    if n == 1:
        return PreimageGraph(n, False, 2, [Intersection((0, 1), False)])
    if n == 2:
        return PreimageGraph(n, False, 2, [Intersection((0, 1), True), Intersection((0, 1), True)])
    return PreimageGraph(n, False, n, [Intersection(tuple(sorted((i, (i + 1) % n))), True) for i in range(n)])
