"""
Horizontal trajectories of a quadratic differential.

A leaf is integrated in its flat arclength s: du/ds = 1/sqrt(F(u)) with the
square-root branch carried continuously from the previous step. Points are
tagged with the chart they live in ("z" affine, "w" = 1/z at infinity).
"""

import cmath
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.config import settings
from core.errors import DomainError, QuadratureError
from services.cpoly import INF, RationalFn, RootCluster, SpherePoint, as_complex, point_to_json, root_clusters
from services.qdiff import QuadDiff, leading_coefficient

log = logging.getLogger(__name__)

MAX_TURN = math.pi / 3          # largest direction change accepted in one step
CLOSE_ANGLE = 1e-3
QUAD_TOL = 1e-9
QUAD_MAX_NODES = 4096
SEGMENT_NODES = 16              # Gauss nodes per polyline segment in leaf_integral
LOCAL_TOL = 1e-6


# ─────────────────────────────────────────
# Types
# ─────────────────────────────────────────

@dataclass(frozen=True)
class TraceConfig:
    step: float = 1e-3
    sing_radius: float = 1e-4
    close_tol: float = 1e-5
    length_budget: float = 100.0
    chart_switch_radius: float = 4.0

    def __post_init__(self):
        for name in ("step", "sing_radius", "close_tol", "length_budget", "chart_switch_radius"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive, got {value!r}")
        if self.close_tol >= self.sing_radius:
            raise DomainError("close_tol must be smaller than sing_radius")
        if self.chart_switch_radius <= 1.0:
            raise DomainError("chart_switch_radius must exceed 1")

    @classmethod
    def from_settings(cls, **overrides) -> "TraceConfig":
        base = cls(
            step=settings.TRACE_STEP,
            sing_radius=settings.TRACE_SING_RADIUS,
            close_tol=settings.TRACE_CLOSE_TOL,
            length_budget=settings.TRACE_LENGTH_BUDGET,
            chart_switch_radius=settings.TRACE_CHART_SWITCH_RADIUS,
        )
        given = {k: v for k, v in overrides.items() if v is not None}
        return replace(base, **given) if given else base

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "sing_radius": self.sing_radius,
            "close_tol": self.close_tol,
            "length_budget": self.length_budget,
            "chart_switch_radius": self.chart_switch_radius,
        }


class TerminationKind(str, Enum):
    HIT_SINGULAR = "HitSingular"
    CLOSED = "Closed"
    BUDGET_EXCEEDED = "BudgetExceeded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    point: Optional[SpherePoint] = None
    detail: str = ""

    @property
    def is_compact(self) -> bool:
        return self.kind in (TerminationKind.HIT_SINGULAR, TerminationKind.CLOSED)

    def to_json(self) -> dict:
        out = {"kind": self.kind.value}
        if self.point is not None:
            out["point"] = point_to_json(self.point)
        if self.detail:
            out["detail"] = self.detail
        return out


ChartPoint = Tuple[str, complex]


def to_sphere(chart: str, u: complex) -> SpherePoint:
    if chart == "z":
        return u
    return INF if u == 0 else 1.0 / u


@dataclass
class Trajectory:
    points: List[ChartPoint]
    flat_length: float
    termination: Termination
    start_direction: complex
    head_offset: float = 0.0
    tail_gap: float = 0.0
    origin: Optional[SpherePoint] = None
    tail_value: complex = 0j
    edge_length: Optional[float] = None

    @property
    def total_length(self) -> float:
        """Flat length from the origin vertex (if any) to the end, gaps included.

        Vertex-to-vertex leaves report |integral of sqrt(f)| over the traced
        path, which does not depend on the step errors of the polyline.
        """
        if self.edge_length is not None:
            return self.edge_length
        return self.head_offset + self.flat_length + self.tail_gap

    def sphere_points(self) -> List[SpherePoint]:
        return [to_sphere(c, u) for c, u in self.points]

    def affine_points(self) -> np.ndarray:
        """Points in the z chart; points at infinity are dropped."""
        pts = [p for p in self.sphere_points() if p is not INF]
        return np.array(pts, dtype=complex)

    def reversed(self) -> "Trajectory":
        """The same leaf walked from its end; only meaningful for vertex-to-vertex leaves."""
        termination = self.termination
        if self.origin is not None:
            termination = Termination(TerminationKind.HIT_SINGULAR, self.origin)
        direction = -self.start_direction
        if len(self.points) >= 2 and self.points[-1][0] == self.points[-2][0]:
            step = self.points[-2][1] - self.points[-1][1]
            if step != 0:
                direction = step / abs(step)
        return Trajectory(
            points=list(reversed(self.points)),
            flat_length=self.flat_length,
            termination=termination,
            start_direction=direction,
            head_offset=self.tail_gap,
            tail_gap=self.head_offset,
            origin=self.termination.point,
            tail_value=complex(self.head_offset),
            edge_length=self.edge_length,
        )

    def to_json(self) -> dict:
        return {
            "points": [[c, [u.real, u.imag]] for c, u in self.points],
            "flat_length": self.flat_length,
            "edge_length": self.edge_length,
            "head_offset": self.head_offset,
            "tail_gap": self.tail_gap,
            "termination": self.termination.to_json(),
            "start_direction": [self.start_direction.real, self.start_direction.imag],
            "origin": None if self.origin is None else point_to_json(self.origin),
        }


# ─────────────────────────────────────────
# Charts
# ─────────────────────────────────────────

@dataclass(frozen=True)
class _Singular:
    u: complex
    sphere: SpherePoint
    order: int
    coeff: complex

    @property
    def capturable(self) -> bool:
        return self.order >= -1 and self.order != 0

    def flat_distance(self, u: complex) -> float:
        """Local-model flat distance (2/(k+2)) |c|^(1/2) |u - p|^((k+2)/2)."""
        k = self.order
        return (2.0 / (k + 2)) * math.sqrt(abs(self.coeff)) * abs(u - self.u) ** ((k + 2) / 2.0)


class _Chart:
    def __init__(self, name: str, f: RationalFn, singular: List[_Singular],
                 zeros: Sequence[RootCluster] = (), poles: Sequence[RootCluster] = ()):
        self.name = name
        self.f = f
        self._num = tuple(reversed(f.num.coeffs))
        self._den = tuple(reversed(f.den.coeffs))
        self.singular = singular
        self.capturable = [s for s in singular if s.capturable]
        self.zeros = list(zeros)
        self.poles = list(poles)
        self._local: Dict[_Singular, Tuple[complex, Callable[[np.ndarray], np.ndarray]]] = {}

    def local_model(self, s: _Singular) -> Tuple[complex, Callable[[np.ndarray], np.ndarray]]:
        """Centre p and g with F(u) = (u - p)^k g(u), g in product form over the other roots.

        The product never subtracts nearly equal numbers, so g stays accurate
        right up to p where the expanded coefficients cancel.
        """
        if s in self._local:
            return self._local[s]
        centre = s.u
        factors: List[Tuple[complex, int]] = []
        for clusters, sign in ((self.zeros, 1), (self.poles, -1)):
            for c in clusters:
                if abs(c.point - s.u) <= max(LOCAL_TOL * max(1.0, abs(s.u)), c.radius):
                    centre = c.point
                else:
                    factors.append((c.point, sign * c.multiplicity))
        lead = self.f.num.lead / self.f.den.lead

        def g(u):
            u = np.asarray(u, dtype=complex)
            out = np.full(u.shape, lead, dtype=complex)
            for point, m in factors:
                out = out * (u - point) ** m
            return out

        self._local[s] = (centre, g)
        return centre, g

    def singular_at(self, u: complex) -> _Singular:
        if not self.singular:
            raise DomainError(f"no singular point in the {self.name} chart")
        return min(self.singular, key=lambda s: abs(s.u - u))

    def value(self, u: complex) -> complex:
        num = 0j
        for c in self._num:
            num = num * u + c
        den = 0j
        for c in self._den:
            den = den * u + c
        if den == 0:
            return complex("inf")
        return num / den

    def values(self, u: np.ndarray) -> np.ndarray:
        return self.f.values(u)

    def nearest(self, u: complex) -> Tuple[float, Optional[_Singular]]:
        best, which = math.inf, None
        for s in self.capturable:
            rho = s.flat_distance(u)
            if rho < best:
                best, which = rho, s
        return best, which


@lru_cache(maxsize=32)
def _charts(omega: QuadDiff) -> Dict[str, _Chart]:
    z_sing: List[_Singular] = []
    w_sing: List[_Singular] = []
    for entry in omega.entries:
        k, c = leading_coefficient(omega, entry.point)
        if entry.point is INF:
            w_sing.append(_Singular(0j, INF, k, c))
            continue
        p = entry.point
        z_sing.append(_Singular(p, p, k, c))
        if p != 0:
            w0 = 1.0 / p
            # z - p = -(w - w0) / (w w0)
            w_sing.append(_Singular(w0, p, k, c * (-1) ** k * w0 ** (-(2 * k + 4))))
    wf = omega.w_chart
    w_zeros = root_clusters(wf.num) if wf.num.degree >= 1 else []
    w_poles = root_clusters(wf.den) if wf.den.degree >= 1 else []
    return {
        "z": _Chart("z", omega.f, z_sing, omega.zero_clusters, omega.pole_clusters),
        "w": _Chart("w", wf, w_sing, w_zeros, w_poles),
    }


def chart_of(point: SpherePoint) -> Tuple[str, complex]:
    """Chart and coordinate used to start at a point (finite points use z)."""
    if point is INF:
        return "w", 0j
    return "z", complex(point)


# ─────────────────────────────────────────
# Integration
# ─────────────────────────────────────────

class _Breakdown(Exception):
    pass


def _field(chart: _Chart, u: complex, ref: complex) -> complex:
    F = chart.value(u)
    if F == 0 or not (math.isfinite(F.real) and math.isfinite(F.imag)):
        raise _Breakdown(f"coefficient {F!r} at {u!r}")
    v = 1.0 / cmath.sqrt(F)
    if (v * ref.conjugate()).real < 0:
        v = -v
    return v


def _turn(a: complex, b: complex) -> float:
    return abs(cmath.phase(b * a.conjugate()))


def _rk4(chart: _Chart, u: complex, ref: complex, h: float) -> Tuple[complex, complex]:
    k1 = _field(chart, u, ref)
    k2 = _field(chart, u + 0.5 * h * k1, k1)
    k3 = _field(chart, u + 0.5 * h * k2, k2)
    k4 = _field(chart, u + h * k3, k3)
    for k in (k1, k2, k3, k4):
        if _turn(ref, k) > MAX_TURN:
            raise _Breakdown("branch continuity lost")
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), k1


def _segment_projection(a: complex, b: complex, p: complex) -> Tuple[float, float]:
    d = b - a
    if d == 0:
        return 0.0, abs(p - a)
    t = ((p - a) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return t, abs(a + t * d - p)


def horizontal_direction(omega: QuadDiff, z: complex) -> complex:
    """A unit vector v with f(z) v^2 > 0."""
    value = omega.coefficient(as_complex(z))
    if value is INF or value == 0:
        raise DomainError(f"{z!r} is a singular point")
    v = 1.0 / cmath.sqrt(value)
    return v / abs(v)


def trace(omega: QuadDiff, z0: complex, direction: complex, cfg: Optional[TraceConfig] = None,
          chart: str = "z") -> Trajectory:
    """Trace the horizontal leaf through z0 leaving along direction."""
    cfg = cfg or TraceConfig.from_settings()
    charts = _charts(omega)
    if chart not in charts:
        raise DomainError(f"unknown chart {chart!r}")
    current = charts[chart]
    u = as_complex(z0)
    direction = as_complex(direction)
    if direction == 0:
        raise DomainError("direction must be nonzero")
    ref = direction / abs(direction)
    initial = ref

    F0 = current.value(u)
    if not (math.isfinite(F0.real) and math.isfinite(F0.imag)) or F0 == 0:
        raise DomainError(f"start point {u!r} is a singular point")
    rho, near = current.nearest(u)
    if rho <= cfg.sing_radius:
        raise DomainError(f"start point within capture radius of {near.sphere!r}")
    if (F0 * ref * ref).real <= 0:
        raise DomainError("direction is not horizontal at the start point")

    start_unit = _field(current, u, ref)
    start_unit /= abs(start_unit)
    # the start point seen from each chart: (coordinate, flat scale, unit heading)
    anchors = {chart: (u, math.sqrt(abs(F0)), start_unit)}
    if u != 0:
        other = "w" if chart == "z" else "z"
        heading = -start_unit / (u * u)
        anchors[other] = (1.0 / u, math.sqrt(abs(charts[other].value(1.0 / u))), heading / abs(heading))
    points: List[ChartPoint] = [(chart, u)]
    traveled = 0.0
    R = cfg.chart_switch_radius

    def finish(kind, point=None, detail="", length=None, tail=0j):
        termination = Termination(kind, point, detail)
        log.debug("trace from %r: %s after %.6g", z0, kind.value, traveled if length is None else length)
        return Trajectory(points, traveled if length is None else length, termination, initial,
                          tail_gap=abs(tail), tail_value=tail)

    while True:
        if traveled >= cfg.length_budget:
            return finish(TerminationKind.BUDGET_EXCEEDED, to_sphere(current.name, u))
        rho, near = current.nearest(u)
        if rho <= cfg.sing_radius:
            tail = _tail_integral(current, near, u, _leaf_root(current.value(u), ref))
            return finish(TerminationKind.HIT_SINGULAR, near.sphere, tail=tail)
        h = min(cfg.step, cfg.length_budget - traveled, 0.5 * rho)
        try:
            u_new, k1 = _rk4(current, u, ref, h)
        except _Breakdown as exc:
            return finish(TerminationKind.NUMERICAL_FAILURE, to_sphere(current.name, u), str(exc))
        if not (math.isfinite(u_new.real) and math.isfinite(u_new.imag)):
            return finish(TerminationKind.NUMERICAL_FAILURE, to_sphere(current.name, u), "non-finite step")

        anchor = anchors.get(current.name)
        if anchor is not None and traveled > 10 * cfg.step:
            a_u, a_scale, a_unit = anchor
            t, gap = _segment_projection(u, u_new, a_u)
            if gap * a_scale < cfg.close_tol and _turn(a_unit, k1 / abs(k1)) < CLOSE_ANGLE:
                points.append((current.name, a_u))
                return finish(TerminationKind.CLOSED, length=traveled + t * h)

        u, ref = u_new, k1
        traveled += h
        points.append((current.name, u))

        if abs(u) > R:
            # dw = -dz / z^2 in both directions
            ref = -ref / (u * u)
            ref /= abs(ref)
            u = 1.0 / u
            current = charts["w" if current.name == "z" else "z"]
            points.append((current.name, u))


@lru_cache(maxsize=16)
def _gauss_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def integrate_unit(integrand: Callable[[np.ndarray], np.ndarray], rel_tol: float = QUAD_TOL,
                   start: int = 16, cap: int = QUAD_MAX_NODES):
    """Integral over [0, 1] by Gauss-Legendre, doubling nodes until it settles."""
    prev = None
    n = start
    while n <= cap:
        x, w = _gauss_nodes(n)
        values = integrand(x)
        if not np.all(np.isfinite(values)):
            raise QuadratureError("integrand is not finite on the path")
        value = np.dot(w, values)
        if prev is not None and abs(value - prev) <= rel_tol * abs(value):
            return value
        prev = value
        n *= 2
    raise QuadratureError(f"quadrature did not settle with {cap} nodes")


def _smoothstep(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)


def _leaf_root(F: complex, heading: complex) -> complex:
    """sqrt(F) on the branch that makes sqrt(F) * heading point forward."""
    root = cmath.sqrt(F)
    if (root * heading).real < 0:
        root = -root
    return root


def _radial_factor(g: Callable[[np.ndarray], np.ndarray], p: complex, d: complex, k: int,
                   ref: complex, rel_tol: float) -> complex:
    """2 * int_0^1 t^(k+1) sqrt(g(p + d t^2) / ref) dt.

    With tau = t^2 this is int_0^1 tau^(k/2) sqrt(g / ref) dtau, the radial
    integral of sqrt(F) from p with the singular power taken out.
    """
    def integrand(t):
        return t ** (k + 1) * np.sqrt(g(p + d * t * t) / ref)

    return 2.0 * complex(integrate_unit(integrand, rel_tol=rel_tol))


def _tail_integral(chart: _Chart, s: _Singular, u: complex, root: complex) -> complex:
    """Integral of sqrt(F) du from u straight into the singular point s, sqrt(F(u)) = root."""
    p, g = chart.local_model(s)
    d = u - p
    if d == 0:
        return 0j
    gu = complex(g(np.array([u]))[0])
    return -root * d * _radial_factor(g, p, d, s.order, gu, QUAD_TOL)


def _check_poles(omega: QuadDiff, pts: Sequence[complex], radius: float) -> None:
    for pole in omega.pole_clusters:
        for a, b in zip(pts, pts[1:]):
            _, gap = _segment_projection(a, b, pole.point)
            if gap <= radius:
                raise DomainError(f"path passes within {radius:g} of the pole {pole.point!r}")


def flat_length(omega: QuadDiff, path: Sequence[complex], sing_radius: Optional[float] = None) -> float:
    """Flat length of a polyline in the z chart: sum of |f|^(1/2) |dz| over its segments."""
    pts = [as_complex(p) for p in path]
    if len(pts) < 2:
        return 0.0
    radius = settings.TRACE_SING_RADIUS if sing_radius is None else sing_radius
    _check_poles(omega, pts, radius)
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        d = b - a
        if d == 0:
            continue

        def integrand(s, a=a, d=d):
            g, dg = _smoothstep(s)
            return np.sqrt(np.abs(omega.f.values(a + d * g))) * abs(d) * dg

        total += float(integrate_unit(integrand).real)
    return total


def flat_length_curve(omega: QuadDiff, gamma: Callable[[np.ndarray], np.ndarray],
                      dgamma: Callable[[np.ndarray], np.ndarray],
                      sing_radius: Optional[float] = None) -> float:
    """Flat length of a parametrized curve gamma: [0, 1] -> C (vectorized callables)."""
    radius = settings.TRACE_SING_RADIUS if sing_radius is None else sing_radius
    sample = gamma(np.linspace(0.0, 1.0, 513))
    for pole in omega.pole_clusters:
        if np.min(np.abs(sample - pole.point)) <= radius:
            raise DomainError(f"curve passes within {radius:g} of the pole {pole.point!r}")

    def integrand(s):
        g, dg = _smoothstep(s)
        return np.sqrt(np.abs(omega.f.values(gamma(g)))) * np.abs(dgamma(g)) * dg

    return float(integrate_unit(integrand).real)


# ─────────────────────────────────────────
# Critical trajectories
# ─────────────────────────────────────────

def critical_directions(omega: QuadDiff, p: SpherePoint) -> List[complex]:
    """The k+2 directions theta_j = (2 pi j - arg c) / (k+2) at a zero or simple pole.

    Directions are expressed in the chart that contains p (w = 1/z for infinity).
    """
    k, c = leading_coefficient(omega, p)
    if k == 0:
        raise DomainError(f"{p!r} is a regular point")
    if k < -1:
        raise DomainError(f"{p!r} is a pole of order {-k}; no radial critical directions")
    arg = cmath.phase(c)
    return [cmath.exp(1j * (2 * math.pi * j - arg) / (k + 2)) for j in range(k + 2)]


@dataclass(frozen=True)
class Seed:
    vertex: SpherePoint
    chart: str
    point: complex
    direction: complex
    head_offset: float


def seed_critical(omega: QuadDiff, vertex: SpherePoint, direction: complex,
                  cfg: Optional[TraceConfig] = None, max_iter: int = 30) -> Seed:
    """Start point of the critical leaf leaving vertex along direction.

    The seed sits at flat distance 2*sing_radius; its angle is corrected until
    the integral of sqrt(f) from the vertex to the seed is real.
    """
    cfg = cfg or TraceConfig.from_settings()
    chart_name, p = chart_of(vertex)
    chart = _charts(omega)[chart_name]
    k, c = leading_coefficient(omega, vertex)
    if k == 0 or k < -1:
        raise DomainError(f"{vertex!r} does not emit critical trajectories")
    p, g = chart.local_model(chart.singular_at(p))
    c = complex(g(np.array([p]))[0])
    target = 2.0 * cfg.sing_radius
    expo = 2.0 / (k + 2)
    r = ((k + 2) * target / (2.0 * math.sqrt(abs(c)))) ** expo
    theta = cmath.phase(direction)

    def integral(r, theta):
        # F(p + rho e) = rho^k e^k g(p + rho e)
        e = cmath.exp(1j * theta)
        scale = cmath.sqrt(c * cmath.exp(1j * (k + 2) * theta)) * r ** ((k + 2) / 2.0)
        return scale * _radial_factor(g, p, r * e, k, c, 1e-12)

    value = integral(r, theta)
    for _ in range(max_iter):
        if value.real <= 0:
            raise DomainError(f"direction {direction!r} is not critical at {vertex!r}")
        theta -= value.imag / (0.5 * (k + 2) * value.real)
        r *= (target / abs(value)) ** expo
        value = integral(r, theta)
        if abs(value.imag) <= 1e-13 * target and abs(abs(value) - target) <= 1e-10 * target:
            break
    else:
        log.warning("seed refinement at %r did not settle (residual %.3e)", vertex, abs(value.imag))
    e = cmath.exp(1j * theta)
    return Seed(vertex, chart_name, p + r * e, e, value.real)


def trace_critical(omega: QuadDiff, vertex: SpherePoint, direction: complex,
                   cfg: Optional[TraceConfig] = None) -> Trajectory:
    cfg = cfg or TraceConfig.from_settings()
    seed = seed_critical(omega, vertex, direction, cfg)
    traj = trace(omega, seed.point, seed.direction, cfg, chart=seed.chart)
    traj.head_offset = seed.head_offset
    traj.origin = vertex
    if traj.termination.kind == TerminationKind.HIT_SINGULAR:
        total = seed.head_offset + leaf_integral(omega, traj) + traj.tail_value
        traj.edge_length = abs(total)
        log.debug("edge from %r: length %.12g, imaginary residue %.2e", vertex, abs(total), total.imag)
    return traj


def leaf_integral(omega: QuadDiff, traj: Trajectory) -> complex:
    """Integral of sqrt(f) dz along the traced polyline, oriented with the leaf.

    The value only depends on the endpoints and the homotopy class of the
    path, so the polyline's distance from the true leaf does not enter it.
    """
    charts = _charts(omega)
    x, w = _gauss_nodes(SEGMENT_NODES)
    total = 0j
    for name, chart in charts.items():
        pairs = [(a, b) for (ca, a), (cb, b) in zip(traj.points, traj.points[1:])
                 if ca == cb == name and a != b]
        if not pairs:
            continue
        start = np.array([a for a, _ in pairs], dtype=complex)
        step = np.array([b for _, b in pairs], dtype=complex) - start
        nodes = start[:, None] + step[:, None] * x[None, :]
        terms = np.sqrt(chart.values(nodes)) * step[:, None]
        terms = np.where(terms.real < 0, -terms, terms)
        total += complex(np.sum(terms @ w))
    return total
