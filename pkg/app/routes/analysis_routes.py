from fastapi import APIRouter, HTTPException
from fastapi.responses import Response

from routes.schemas import AnalyzeRequest
from services.analysis_store import create_session, get_session_report, get_session_svg
from services.reports import canonical

router = APIRouter(prefix="/api", tags=["analysis"])


@router.post("/analyze")
def analyze(req: AnalyzeRequest):
    """Analyze a diff-spec and keep the result as a session."""
    session = create_session(req.spec, req.options.config())
    return canonical(get_session_report(session.session_id))


@router.get("/render/{session_id}")
def render(session_id: str):
    svg = get_session_svg(session_id)
    if svg is None:
        raise HTTPException(status_code=404, detail="Session not found")
    return Response(content=svg, media_type="image/svg+xml")
