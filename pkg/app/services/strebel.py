"""
Critical graphs, the compactness verdict and periods.
"""

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from core.config import settings
from core.errors import DomainError
from services.cpoly import INF, SpherePoint, point_key, point_to_json
from services.flow import (
    TerminationKind,
    TraceConfig,
    Trajectory,
    chart_of,
    critical_directions,
    flat_length,
    trace_critical,
)
from services.mobius import MobiusMap
from services.qdiff import DivisorEntry, PoleData, QuadDiff, double_poles

log = logging.getLogger(__name__)

GAMMA2_TOL = 1e-9
WITNESS_RADIUS = 1e-3
UPPER_ZERO = complex(0.5, math.sqrt(3) / 2)


class VerdictKind(str, Enum):
    STREBEL = "Strebel"
    NOT_STREBEL = "NotStrebelWitness"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class StrebelVerdict:
    kind: VerdictKind
    witness: Optional[int] = None
    pending: Tuple[int, ...] = ()
    detail: str = ""

    @property
    def is_strebel(self) -> bool:
        return self.kind == VerdictKind.STREBEL

    def to_json(self) -> dict:
        out = {"kind": self.kind.value}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.pending:
            out["pending"] = list(self.pending)
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class Edge:
    trajectory: Trajectory
    start: int
    end: int
    start_slot: int
    end_slot: int
    orientation: int = 1

    @property
    def length(self) -> float:
        return self.trajectory.total_length

    def polyline(self, vertices: Sequence[DivisorEntry]) -> List[SpherePoint]:
        """Leaf points closed off by the two endpoint vertices."""
        return [vertices[self.start].point] + self.trajectory.sphere_points() + [vertices[self.end].point]

    def to_json(self, vertices: Sequence[DivisorEntry]) -> dict:
        return {
            "endpoints": [self.start, self.end],
            "slots": [self.start_slot, self.end_slot],
            "length": self.length,
            "orientation": self.orientation,
            "polyline": [point_to_json(p) for p in self.polyline(vertices)],
        }


@dataclass
class CriticalGraph:
    vertices: List[DivisorEntry]
    edges: List[Edge]
    verdict: StrebelVerdict
    traces: List[Trajectory] = field(default_factory=list)
    cfg: Optional[TraceConfig] = None

    def vertex_index(self, p: SpherePoint) -> int:
        key = point_key(p)
        for i, v in enumerate(self.vertices):
            if point_key(v.point) == key:
                return i
        raise DomainError(f"{p!r} is not a vertex of the critical graph")

    def to_json(self) -> dict:
        return {
            "vertices": [{"point": point_to_json(v.point), "order": v.order} for v in self.vertices],
            "edges": [e.to_json(self.vertices) for e in self.edges],
            "verdict": self.verdict.to_json(),
        }


@dataclass(frozen=True)
class PeriodEntry:
    zeros: Tuple[SpherePoint, SpherePoint]
    length: float
    orientation: int
    edge: int


@dataclass
class PeriodTable:
    entries: List[PeriodEntry]

    @property
    def values(self) -> List[float]:
        return [e.length for e in self.entries]

    def to_json(self) -> list:
        return [
            {
                "zeros": [point_to_json(p) for p in e.zeros],
                "length": e.length,
                "orientation": e.orientation,
                "edge": e.edge,
            }
            for e in self.entries
        ]


# ─────────────────────────────────────────
# Distances
# ─────────────────────────────────────────

def sphere_embed(points: Sequence[SpherePoint]) -> np.ndarray:
    """Stereographic images on the unit sphere; Euclidean distance there is chordal."""
    out = np.empty((len(points), 3))
    for i, p in enumerate(points):
        if p is INF:
            out[i] = (0.0, 0.0, 1.0)
            continue
        r2 = abs(p) ** 2
        out[i] = (2 * p.real / (1 + r2), 2 * p.imag / (1 + r2), (r2 - 1) / (1 + r2))
    return out


def chordal(p: SpherePoint, q: SpherePoint) -> float:
    a, b = sphere_embed([p, q])
    return float(np.linalg.norm(a - b))


def hausdorff(a: Sequence[SpherePoint], b: Sequence[SpherePoint]) -> float:
    """Chordal Hausdorff distance between two point sequences on the sphere."""
    if not a or not b:
        raise DomainError("hausdorff distance needs two nonempty point sets")
    u, v = sphere_embed(a), sphere_embed(b)
    return max(directed_hausdorff(u, v)[0], directed_hausdorff(v, u)[0])


# ─────────────────────────────────────────
# Critical graph
# ─────────────────────────────────────────

def _check_candidate(omega: QuadDiff) -> None:
    worst = min(e.order for e in omega.entries)
    if worst <= -3:
        raise DomainError(f"not a Strebel candidate: pole of order {-worst}")


def _launches(omega: QuadDiff, vertices: List[DivisorEntry]) -> List[Tuple[int, int, complex]]:
    out = []
    for vi, v in enumerate(vertices):
        for slot, d in enumerate(critical_directions(omega, v.point)):
            out.append((vi, slot, d))
    return out


def _arrival_slot(omega: QuadDiff, vertex: SpherePoint, traj: Trajectory) -> int:
    """Critical direction at vertex closest to the direction of the leaf's last point."""
    chart, p = chart_of(vertex)
    last = None
    for c, u in reversed(traj.points):
        if c == chart:
            last = u
            break
    if last is None or last == p:
        return 0
    heading = (last - p) / abs(last - p)
    dirs = critical_directions(omega, vertex)
    return min(range(len(dirs)), key=lambda j: abs(cmath.phase(dirs[j] * heading.conjugate())))


def _trace_all(omega: QuadDiff, vertices, launches, cfg: TraceConfig) -> List[Trajectory]:
    def run(launch):
        vi, _, d = launch
        return trace_critical(omega, vertices[vi].point, d, cfg)

    workers = max(1, settings.TRACE_WORKERS)
    if workers == 1:
        return [run(x) for x in launches]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, launches))


def deduplicate(edges: List[Edge], vertices: Sequence[DivisorEntry], tol: float) -> List[Edge]:
    """Drop edges whose polyline repeats an earlier one (in either direction) within tol."""
    kept: List[Edge] = []
    for e in edges:
        line = e.polyline(vertices)
        duplicate = False
        for k in kept:
            same = (k.start, k.end) == (e.start, e.end)
            flipped = (k.start, k.end) == (e.end, e.start)
            if not (same or flipped):
                continue
            other = k.polyline(vertices)
            if flipped:
                other = list(reversed(other))
            if hausdorff(line, other) < tol:
                duplicate = True
                break
        if not duplicate:
            kept.append(e)
    return kept


def _orient(edge: Edge) -> Edge:
    if edge.start <= edge.end:
        return edge
    return Edge(edge.trajectory.reversed(), edge.end, edge.start, edge.end_slot, edge.start_slot, -edge.orientation)


def _verdict(omega: QuadDiff, traces: List[Trajectory]) -> StrebelVerdict:
    pending = [i for i, t in enumerate(traces) if not t.termination.is_compact]
    if not pending:
        return StrebelVerdict(VerdictKind.STREBEL)
    poles = double_poles(omega)
    for i in pending:
        t = traces[i]
        if t.termination.kind != TerminationKind.BUDGET_EXCEEDED:
            continue
        for pole in poles:
            if chordal(t.termination.point, pole.point) < WITNESS_RADIUS and not _ring_type(pole):
                return StrebelVerdict(
                    VerdictKind.NOT_STREBEL, witness=i,
                    detail=f"critical leaf spirals into the pole at {pole.point!r}",
                )
    kinds = sorted({traces[i].termination.kind.value for i in pending})
    return StrebelVerdict(
        VerdictKind.UNDECIDED, pending=tuple(pending),
        detail="unfinished traces: " + ", ".join(kinds),
    )


def _ring_type(pole: PoleData) -> bool:
    """-c_-2 positive real: nearby leaves are closed circles."""
    return pole.is_real and pole.perimeter > 0


def critical_graph(omega: QuadDiff, cfg: Optional[TraceConfig] = None) -> CriticalGraph:
    cfg = cfg or TraceConfig.from_settings()
    _check_candidate(omega)
    vertices = [e for e in omega.entries if e.order >= 1 or e.order == -1]
    launches = _launches(omega, vertices)
    traces = _trace_all(omega, vertices, launches, cfg)
    verdict = _verdict(omega, traces)

    index = {point_key(v.point): i for i, v in enumerate(vertices)}
    edges: List[Edge] = []
    for (vi, slot, _), traj in zip(launches, traces):
        if traj.termination.kind != TerminationKind.HIT_SINGULAR:
            continue
        end = index[point_key(traj.termination.point)]
        end_slot = _arrival_slot(omega, vertices[end].point, traj)
        edges.append(_orient(Edge(traj, vi, end, slot, end_slot)))
    edges = deduplicate(edges, vertices, 10 * cfg.step)
    edges.sort(key=lambda e: (e.start, e.end, e.start_slot, e.end_slot))

    log.info("critical graph: %d vertices, %d edges, %d traces, verdict %s",
             len(vertices), len(edges), len(traces), verdict.kind.value)
    return CriticalGraph(vertices, edges, verdict, traces, cfg)


def map_graph(g: CriticalGraph, M: MobiusMap) -> List[List[SpherePoint]]:
    """Edge polylines of g moved by a Mobius map."""
    return [[M(p) for p in e.polyline(g.vertices)] for e in g.edges]


# ─────────────────────────────────────────
# Periods
# ─────────────────────────────────────────

def periods(g: CriticalGraph, omega: QuadDiff) -> PeriodTable:
    if not g.verdict.is_strebel:
        raise DomainError(f"periods need a Strebel verdict, got {g.verdict.kind.value}")
    entries = []
    for i, e in enumerate(g.edges):
        a, b = g.vertices[e.start], g.vertices[e.end]
        if a.order >= 1 and b.order >= 1:
            entries.append(PeriodEntry((a.point, b.point), e.length, e.orientation, i))
    return PeriodTable(entries)


def ell(omega: QuadDiff, c: complex) -> float:
    """Flat length along the vertical segment from c up to 1/2 + i sqrt(3)/2."""
    c = complex(c)
    if abs(c.real - 0.5) > GAMMA2_TOL or abs(c.imag) > UPPER_ZERO.imag + GAMMA2_TOL:
        raise DomainError(f"{c!r} is not on the segment Re z = 1/2, |Im z| <= sqrt(3)/2")
    if abs(c - UPPER_ZERO) <= GAMMA2_TOL:
        return 0.0
    return flat_length(omega, [c, UPPER_ZERO])


def classify_periods(values: Sequence[float], classes: Dict[str, float], tol: float) -> List[Optional[str]]:
    """Nearest class label for each value, or None when none is within tol."""
    out = []
    for v in values:
        label, ref = min(classes.items(), key=lambda kv: abs(kv[1] - v))
        out.append(label if abs(ref - v) <= tol else None)
    return out


# ─────────────────────────────────────────
# Ring domains
# ─────────────────────────────────────────

@dataclass
class RingDomain:
    boundary: List[Tuple[int, int]]
    length: float
    pole: Optional[SpherePoint] = None
    perimeter: Optional[float] = None

    @property
    def mismatch(self) -> Optional[float]:
        if self.perimeter is None:
            return None
        return abs(self.length - self.perimeter)

    def to_json(self) -> dict:
        return {
            "boundary": [list(h) for h in self.boundary],
            "length": self.length,
            "pole": None if self.pole is None else point_to_json(self.pole),
            "perimeter": self.perimeter,
        }


def _faces(g: CriticalGraph, omega: QuadDiff) -> List[List[Tuple[int, int]]]:
    valence = {i: len(critical_directions(omega, v.point)) for i, v in enumerate(g.vertices)}
    slots: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for ei, e in enumerate(g.edges):
        slots[(e.start, e.start_slot)] = (ei, +1)
        slots[(e.end, e.end_slot)] = (ei, -1)
    missing = [(v, s) for v, n in valence.items() for s in range(n) if (v, s) not in slots]
    if missing:
        raise DomainError(f"critical graph is incomplete at (vertex, slot) {missing}")

    seen = set()
    faces = []
    for start in sorted(slots):
        if start in seen:
            continue
        face = []
        here = start
        while here not in seen:
            seen.add(here)
            ei, d = slots[here]
            face.append((ei, d))
            e = g.edges[ei]
            there = (e.end, e.end_slot) if d > 0 else (e.start, e.start_slot)
            v, s = there
            # leave clockwise-next so the face stays on the left
            here = (v, (s - 1) % valence[v])
        faces.append(face)
    return faces


def _face_loop(g: CriticalGraph, face: List[Tuple[int, int]]) -> List[SpherePoint]:
    loop: List[SpherePoint] = []
    for ei, d in face:
        line = g.edges[ei].polyline(g.vertices)
        loop.extend(line if d > 0 else list(reversed(line)))
    return loop


def _winding(loop: List[SpherePoint], p: SpherePoint, q: SpherePoint) -> int:
    """Winding number around p after moving q to infinity with t = 1/(z - q)."""
    def t(z):
        if z is INF:
            return 0j
        if q is INF:
            return z
        return 1.0 / (z - q)

    pts = np.array([t(z) for z in loop], dtype=complex) - t(p)
    angles = np.angle(pts[1:] / pts[:-1])
    return int(round(float(np.sum(angles)) / (2 * math.pi)))


def ring_domains(g: CriticalGraph, omega: QuadDiff) -> List[RingDomain]:
    """Faces of the critical graph with their boundary length and enclosed double pole."""
    if not g.verdict.is_strebel:
        raise DomainError("ring domains need a Strebel verdict")
    faces = _faces(g, omega)
    poles = double_poles(omega)
    domains = []
    for face in faces:
        length = sum(g.edges[ei].length for ei, _ in face)
        domains.append(RingDomain(face, length))
    if len(poles) == 1 and len(domains) == 1:
        domains[0].pole = poles[0].point
        domains[0].perimeter = poles[0].perimeter
    elif len(poles) >= 2:
        loops = [_face_loop(g, face) for face in faces]
        for i, pole in enumerate(poles):
            ref = poles[(i + 1) % len(poles)].point
            for dom, loop in zip(domains, loops):
                if _winding(loop, pole.point, ref) == 1:
                    dom.pole = pole.point
                    dom.perimeter = pole.perimeter
                    break
            else:
                log.warning("no face of the critical graph surrounds the pole at %r", pole.point)
    domains.sort(key=lambda d: (d.pole is None, point_key(d.pole) if d.pole is not None else (0, 0.0, 0.0)))
    return domains
