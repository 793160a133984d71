"""
The reproducibility checks run by `verify-paper` and `GET /api/verify`.

Each check returns (passed, detail). A check that raises is recorded as failed
with the exception text; the remaining checks still run.
"""

import cmath
import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DomainError
from services import constructions as cons
from services.cpoly import INF, Poly, RationalFn, SpherePoint, rat_eval
from services.diffspec import parse_diff_spec
from services.flow import TerminationKind, TraceConfig, flat_length_curve, horizontal_direction, trace
from services.mobius import H, IDENTITY, build_phi, compose, inverse, projectively_equal
from services.qdiff import (
    QuadDiff,
    double_poles,
    mobius_pullback,
    order_law_mismatches,
    pullback_orders,
    rational_pullback,
    same_point,
)
from services.render import render_graph, save
from services.strebel import chordal, critical_graph, ell, periods, ring_domains

log = logging.getLogger(__name__)

CHECK_SEED = 20240607
FIGURE_NAME = "q1-critical-graph.svg"
UPPER = complex(0.5, math.sqrt(3) / 2)
LOWER = UPPER.conjugate()

CheckFn = Callable[["CheckContext"], Tuple[bool, str]]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class CheckContext:
    cfg: TraceConfig
    base: QuadDiff
    out_dir: Optional[Path] = None

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng(CHECK_SEED + salt)


def _budget_note(ctx: CheckContext, verdict) -> str:
    return f"verdict {verdict.kind.value} ({verdict.detail or 'no detail'}; length budget {ctx.cfg.length_budget:g})"


# ─────────────────────────────────────────
# Checks
# ─────────────────────────────────────────

def check_divisor(ctx: CheckContext) -> Tuple[bool, str]:
    entries = ctx.base.entries
    poles = [e for e in entries if e.order == -2]
    zeros = [e for e in entries if e.order == 1]
    if len(entries) != 5 or len(poles) != 3 or len(zeros) != 2:
        return False, f"divisor {[(e.point, e.order) for e in entries]}"
    pole_ok = all(any(same_point(e.point, p, 1e-9) for e in poles) for p in (0j, 1 + 0j, INF))
    zero_err = max(min(abs(e.point - z) for e in zeros) for z in (UPPER, LOWER))
    if not pole_ok:
        return False, f"double poles at {[e.point for e in poles]}"
    if zero_err > 1e-9:
        return False, f"zeros off 1/2 ± i√3/2 by {zero_err:.3e}"
    return True, f"zeros located to {zero_err:.1e}"


def check_h_invariance(ctx: CheckContext) -> Tuple[bool, str]:
    q1 = cons.q1()
    pulled = mobius_pullback(H, q1)
    rng = ctx.rng(2)
    pts = rng.uniform(-2, 2, 20) + 1j * rng.uniform(-2, 2, 20)
    err = max(abs(rat_eval(pulled.f, z) - rat_eval(q1.f, z)) / abs(rat_eval(q1.f, z)) for z in pts)
    cube = projectively_equal(compose(H, compose(H, H)), IDENTITY, 1e-12)
    return err < 1e-10 and cube, f"max relative error {err:.2e}, h^3 = id: {cube}"


def _segment_gap(points: Sequence[SpherePoint], b: float) -> float:
    return max(chordal(z, 1j * min(b, max(-b, z.imag))) for z in points if z is not INF)


def _real_ray_gap(points: Sequence[SpherePoint], a: float) -> float:
    """Distance to the real line outside (-a, a), closed up through infinity."""
    gaps = []
    for z in points:
        if z is INF:
            continue
        x = z.real if abs(z.real) >= a else math.copysign(a, z.real)
        gaps.append(chordal(z, complex(x, 0.0)))
    return max(gaps)


def check_family_graph(ctx: CheckContext) -> Tuple[bool, str]:
    notes = []
    ok = True
    for a, b in ((1.0, 1.0), cons.solve_ab(0.75)):
        g = critical_graph(cons.omega_ab(a, b), ctx.cfg)
        if not g.verdict.is_strebel or len(g.edges) != 2:
            ok = False
            notes.append(f"(a,b)=({a:g},{b:.6g}): {len(g.edges)} edges, {_budget_note(ctx, g.verdict)}")
            continue
        lines = [e.polyline(g.vertices) for e in g.edges]
        vertical = min(lines, key=lambda ln: _segment_gap(ln, b))
        horizontal = lines[1] if vertical is lines[0] else lines[0]
        d1, d2 = _segment_gap(vertical, b), _real_ray_gap(horizontal, a)
        ok = ok and d1 < 1e-5 and d2 < 1e-5
        notes.append(f"(a,b)=({a:g},{b:.6g}): gaps {d1:.1e}/{d2:.1e}")
    return ok, "; ".join(notes)


def check_pullback_formula(ctx: CheckContext) -> Tuple[bool, str]:
    rng = ctx.rng(4)
    worst = 0.0
    for _ in range(5):
        a, b = rng.uniform(0.4, 2.5, 2)
        pulled = mobius_pullback(inverse(build_phi(a, b)), cons.omega_ab(a, b))
        closed = cons.hyperelliptic_closed_form(a, b)
        pts = rng.uniform(-2, 2, 20) + 1j * rng.uniform(-2, 2, 20)
        for z in pts:
            expected = closed.num(z) / closed.den(z)
            worst = max(worst, abs(rat_eval(pulled.f, z) - expected) / abs(expected))
    return worst < 1e-9, f"max relative error {worst:.2e} over 5 (a, b) draws"


def _random_poly(rng: np.random.Generator, degree: int):
    return Poly.of(rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1))


def check_order_law(ctx: CheckContext, cases: int = 100) -> Tuple[bool, str]:
    rng = ctx.rng(5)
    failures = []
    for case in range(cases):
        poles = rng.uniform(-2, 2, 4) + 1j * rng.uniform(-2, 2, 4)
        omega = cons.from_branch_points(list(poles))
        d = int(rng.integers(1, 4))
        num = _random_poly(rng, d)
        den = _random_poly(rng, int(rng.integers(0, d + 1)))
        psi = RationalFn(num, den)
        try:
            pulled = rational_pullback(psi, omega)
            predicted = pullback_orders(psi, omega)
            problems = order_law_mismatches(predicted, pulled.entries, 1e-5)
            if sum(e.order for e in predicted) != -4:
                problems.append("predicted degree is not -4")
        except DomainError as exc:
            problems = [str(exc)]
        if problems:
            failures.append(f"case {case}: {problems[0]}")
    return not failures, f"{cases - len(failures)}/{cases} cases agree" + (f"; {failures[0]}" if failures else "")


def check_q1_periods(ctx: CheckContext) -> Tuple[bool, str]:
    g = critical_graph(ctx.base, ctx.cfg)
    if ctx.out_dir is not None:
        save(render_graph(g, ctx.base.entries, title="q1"), Path(ctx.out_dir) / FIGURE_NAME)
    if not g.verdict.is_strebel:
        return False, _budget_note(ctx, g.verdict)
    table = periods(g, ctx.base)
    lengths = table.values
    perims = [pd.perimeter for pd in double_poles(ctx.base)]
    gamma2 = 2.0 * ell(ctx.base, complex(0.5, 0.0))
    gamma1 = unit_arc_length(ctx.base, 5 * math.pi / 3, math.pi / 3)
    rings = ring_domains(g, ctx.base)
    ring_err = max((math.inf if d.mismatch is None else d.mismatch) for d in rings) if rings else math.inf
    ok = (
        len(lengths) == 3
        and all(abs(v - 1.0) <= 1e-8 for v in lengths)
        and len(perims) == 3
        and all(abs(p - 2.0) <= 1e-9 for p in perims)
        and abs(gamma2 - 1.0) <= 1e-8
        and abs(gamma1 - 1.0) <= 1e-8
        and ring_err <= 1e-6
    )
    shown = ", ".join(f"{v:.10f}" for v in lengths)
    return ok, (f"periods [{shown}], arcs {gamma1:.10f} / {gamma2:.10f}, "
                f"perimeters {[round(p, 9) for p in perims]}, ring mismatch {ring_err:.1e}")


def unit_arc_length(omega: QuadDiff, start: float, end: float) -> float:
    """Flat length of the unit-circle arc e^(i phi), phi running from start to end."""
    span = end - start

    def gamma(s):
        return np.exp(1j * (start + span * s))

    def dgamma(s):
        return 1j * span * gamma(s)

    return flat_length_curve(omega, gamma, dgamma)


def check_cover_solver(ctx: CheckContext) -> Tuple[bool, str]:
    notes = []
    ok = True
    for r in (0.125, 0.25, 0.375):
        sol = cons.cover_solver(r)
        sep = min(abs(sol.b[i] - sol.b[j]) for i in range(3) for j in range(i + 1, 3))
        ok = ok and sol.residual < 1e-10 and sep > 1e-3
        notes.append(f"r={r:g}: residual {sol.residual:.1e}, separation {sep:.3g}")
    cert = cons.infinity_certificate()
    rows_ok = all([float(v) for v in row] == [-4 / 3, -4 / 3, 1.0] for row in cert.jacobian)
    reduced_ok = all(v == -1 for v in cert.reduced_at_ones)
    ok = ok and rows_ok and reduced_ok and cert.rank == 1 and cert.empty_at_infinity
    notes.append(f"b4=0: reduced(1,1,1)={[str(v) for v in cert.reduced_at_ones]}, "
                 f"rank {cert.rank}, no solution at infinity: {cert.empty_at_infinity}")
    return ok, "; ".join(notes)


def check_cover_periods(ctx: CheckContext) -> Tuple[bool, str]:
    sol = cons.cover_solver(0.25)
    report = cons.verify_cover_periods(sol, ctx.cfg)
    at_inf = [per for p, per, _ in report.perimeters if p is INF]
    ok = report.all_classified and len(at_inf) == 1 and abs(at_inf[0] - 8.0) <= 1e-6
    classes = sorted({label for _, label in report.periods if label})
    return ok, (f"L={report.L:.9f}, {len(report.periods)} periods in classes {classes}, "
                f"perimeter at infinity {at_inf[0] if at_inf else None}")


def check_elliptic(ctx: CheckContext) -> Tuple[bool, str]:
    pts = [0j, 1 + 0j, -1 + 0j, INF]
    lattice = cons.elliptic_periods(pts)
    tau_err = abs(lattice.tau - 1j)
    square = cons.elliptic_strebel_test(pts, 1.0, 50)
    tilted = cons.elliptic_strebel_test(pts, cmath.exp(2j), 50)
    ok = tau_err < 1e-8 and square.rational_witness == (1, 0) and tilted.rational_witness is None
    return ok, f"|tau - i| = {tau_err:.1e}, witnesses {square.rational_witness} / {tilted.rational_witness}"


def check_preimage_graphs(ctx: CheckContext) -> Tuple[bool, str]:
    bad = []
    for n in range(1, 11):
        for on_critical in (False, True):
            g = cons.build_preimage_graph(n, on_critical)
            if on_critical:
                expected = (n + 1, n)
            elif n <= 2:
                expected = (2, n)
            else:
                expected = (n, n)
            transverse = all(x.transverse for x in g.intersections)
            shape_ok = (g.loops, len(g.intersections)) == expected and transverse == (on_critical or n != 1)
            if not shape_ok or g.euler_from_cells != g.euler_from_counts:
                bad.append(f"n={n}, on_critical={on_critical}")
    return not bad, "all 20 cases consistent" if not bad else "failing: " + ", ".join(bad)


def check_flow_robustness(ctx: CheckContext, leaves: int = 50) -> Tuple[bool, str]:
    q1 = cons.q1()
    rng = ctx.rng(11)
    singular = [0j, 1 + 0j, UPPER, LOWER]
    starts: List[complex] = []
    while len(starts) < leaves:
        z = complex(rng.uniform(-1.5, 2.5), rng.uniform(-2.0, 2.0))
        if min(abs(z - s) for s in singular) > 0.05:
            starts.append(z)

    closed, short = 0, []
    lengths = {}
    for i, z in enumerate(starts):
        t = trace(q1, z, horizontal_direction(q1, z), ctx.cfg)
        if t.termination.kind == TerminationKind.CLOSED:
            closed += 1
            lengths[i] = t.flat_length
            if t.flat_length < 1.9:
                short.append(round(t.flat_length, 6))

    finer = replace(ctx.cfg, step=ctx.cfg.step / 2)
    drift = 0.0
    for i in list(lengths)[:3]:
        t = trace(q1, starts[i], horizontal_direction(q1, starts[i]), finer)
        drift = max(drift, abs(t.flat_length - lengths[i]) / lengths[i])
    ok = closed > 0 and not short and drift < 1e-6
    return ok, f"{closed}/{leaves} closed, short loops {short}, step-halving drift {drift:.1e}"


CHECKS: List[Tuple[str, CheckFn]] = [
    ("q1-divisor", check_divisor),
    ("h-invariance", check_h_invariance),
    ("family-critical-graph", check_family_graph),
    ("pullback-closed-form", check_pullback_formula),
    ("pullback-order-law", check_order_law),
    ("q1-periods", check_q1_periods),
    ("cover-solver", check_cover_solver),
    ("cover-periods", check_cover_periods),
    ("elliptic-slope", check_elliptic),
    ("preimage-graphs", check_preimage_graphs),
    ("flow-robustness", check_flow_robustness),
]


def run_checks(cfg: Optional[TraceConfig] = None, base_spec: str = "q1", out_dir: Optional[Path] = None,
               only: Optional[Sequence[str]] = None) -> List[CheckResult]:
    """Run the acceptance checks in order; base_spec replaces q1 in the divisor and period checks."""
    ctx = CheckContext(cfg or TraceConfig.from_settings(), parse_diff_spec(base_spec).omega, out_dir)
    selected = [(n, fn) for n, fn in CHECKS if only is None or n in only]
    if only is not None:
        unknown = sorted(set(only) - {n for n, _ in CHECKS})
        if unknown:
            raise DomainError(f"unknown check(s): {', '.join(unknown)}")

    results = []
    for name, fn in selected:
        started = time.perf_counter()
        try:
            passed, detail = fn(ctx)
        except Exception as e:
            log.exception("check %s raised", name)
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name, bool(passed), detail, time.perf_counter() - started)
        log.info("%-22s %s  %s", name, "PASS" if result.passed else "FAIL", detail)
        results.append(result)
    return results
