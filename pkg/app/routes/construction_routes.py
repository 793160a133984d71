from typing import List, Optional

from fastapi import APIRouter, Query

from routes.schemas import CoverRequest, EllipticRequest, HyperRequest, PreimageRequest
from services import constructions as cons
from services.acceptance import run_checks
from services.diffspec import parse_complex, parse_point
from services.reports import canonical
from services.strebel import critical_graph

router = APIRouter(prefix="/api", tags=["constructions"])


@router.post("/hyper")
def hyper(req: HyperRequest):
    spec = cons.build_hyperelliptic(req.r, [parse_point(p) for p in req.extra])
    report = spec.to_json()
    report["verdict"] = critical_graph(spec.base_diff, req.options.config()).verdict
    return canonical(report)


@router.post("/elliptic")
def elliptic(req: EllipticRequest):
    points = [parse_point(p) for p in req.points]
    return canonical(cons.elliptic_strebel_test(points, parse_complex(req.c_prime), req.q_bound))


@router.post("/cover")
def cover(req: CoverRequest):
    sol = cons.cover_solver(req.r)
    report = {"solution": sol, "infinity_certificate": cons.infinity_certificate()}
    if req.periods:
        report["periods"] = cons.verify_cover_periods(sol, req.options.config())
    return canonical(report)


@router.post("/preimage-graph")
async def preimage_graph(req: PreimageRequest):
    return canonical(cons.build_preimage_graph(req.n, req.on_critical))


@router.get("/verify")
def verify(only: Optional[List[str]] = Query(default=None), base: str = "q1"):
    """Run the acceptance checks (all of them unless 'only' is given)."""
    results = run_checks(base_spec=base, only=only)
    return {
        "passed": all(r.passed for r in results),
        "checks": [canonical(r) for r in results],
    }
