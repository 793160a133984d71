from fastapi import APIRouter, HTTPException

from services.analysis_store import get_session_report
from services.reports import canonical

router = APIRouter(prefix="/api", tags=["report"])


@router.get("/report/{session_id}")
async def get_report(session_id: str):
    """Get the report of a stored analysis."""
    report = get_session_report(session_id)
    if not report:
        raise HTTPException(status_code=404, detail="Session not found")
    return canonical(report)
