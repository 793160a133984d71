import logging
import time
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from core.config import settings
from services.diffspec import ParsedSpec, parse_diff_spec
from services.flow import TraceConfig
from services.render import render_graph
from services.reports import Analysis, analysis_report, analyze

log = logging.getLogger(__name__)


@dataclass
class AnalysisSession:
    session_id: str
    spec_text: str
    parsed: ParsedSpec
    result: Analysis
    created: float = 0
    seconds: float = 0
    svg: Optional[str] = None
    notes: List[str] = field(default_factory=list)


# In-memory session storage
_sessions: Dict[str, AnalysisSession] = {}


def create_session(spec_text: str, cfg: Optional[TraceConfig] = None) -> AnalysisSession:
    """Parse a diff-spec, run the full analysis and keep the result."""
    parsed = parse_diff_spec(spec_text)
    started = time.time()
    result = analyze(parsed.omega, cfg)
    session_id = str(uuid.uuid4())[:8]
    session = AnalysisSession(
        session_id=session_id,
        spec_text=parsed.text,
        parsed=parsed,
        result=result,
        created=started,
        seconds=time.time() - started,
    )
    _sessions[session_id] = session
    while len(_sessions) > settings.MAX_SESSIONS:
        oldest = next(iter(_sessions))
        log.info("analysis %s dropped (store holds %d)", oldest, settings.MAX_SESSIONS)
        del _sessions[oldest]
    log.info("analysis %s: %s -> %s (%.2fs)", session_id, parsed.text,
             result.graph.verdict.kind.value, session.seconds)
    return session


def get_session(session_id: str) -> Optional[AnalysisSession]:
    return _sessions.get(session_id)


def get_session_svg(session_id: str) -> Optional[str]:
    """SVG of the session's critical graph, rendered once and cached."""
    session = get_session(session_id)
    if not session:
        return None
    if session.svg is None:
        session.svg = render_graph(session.result.graph, session.result.omega.entries, title=session.spec_text)
    return session.svg


def get_session_report(session_id: str) -> Optional[dict]:
    session = get_session(session_id)
    if not session:
        return None
    report = analysis_report(session.result, session.spec_text)
    report["session_id"] = session_id
    report["duration_seconds"] = round(session.seconds, 3)
    return report


def clear_sessions():
    _sessions.clear()
