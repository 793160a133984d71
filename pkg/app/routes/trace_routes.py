from fastapi import APIRouter

from core.errors import UsageError
from routes.schemas import TraceRequest
from services.diffspec import parse_complex, parse_diff_spec, parse_point
from services.flow import critical_directions, horizontal_direction, trace, trace_critical
from services.reports import canonical, trace_report

router = APIRouter(prefix="/api", tags=["trace"])


@router.post("/trace")
def trace_leaf(req: TraceRequest):
    """Trace one horizontal leaf, either through a point or out of a vertex."""
    parsed = parse_diff_spec(req.spec)
    cfg = req.options.config()
    if req.vertex is not None:
        vertex = parse_point(req.vertex)
        directions = critical_directions(parsed.omega, vertex)
        if not 0 <= req.slot < len(directions):
            raise UsageError(f"slot must be in 0..{len(directions) - 1}")
        traj = trace_critical(parsed.omega, vertex, directions[req.slot], cfg)
    else:
        if req.at is None:
            raise UsageError("give either 'at' or 'vertex'")
        z = parse_complex(req.at)
        direction = parse_complex(req.direction) if req.direction else horizontal_direction(parsed.omega, z)
        traj = trace(parsed.omega, z, direction, cfg)
    return canonical(trace_report(traj, parsed.text, req.include_points))
