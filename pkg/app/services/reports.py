"""
Canonical JSON output shared by the CLI and the HTTP API.

Keys are sorted and floats carry 12 significant digits, so identical inputs
give byte-identical reports.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Optional

import numpy as np

from core.errors import DomainError
from services.cpoly import Infinity
from services.flow import TraceConfig, Trajectory
from services.qdiff import QuadDiff, double_poles
from services.strebel import CriticalGraph, PeriodTable, RingDomain, critical_graph, periods, ring_domains

log = logging.getLogger(__name__)

SIGNIFICANT = 12


def _number(x: float):
    if not math.isfinite(x):
        return None
    value = float(f"{x:.{SIGNIFICANT}g}")
    return 0.0 if value == 0 else value


def canonical(obj: Any) -> Any:
    """Plain JSON data with rounded floats; complex numbers become [re, im]."""
    if hasattr(obj, "to_json"):
        return canonical(obj.to_json())
    if isinstance(obj, Infinity):
        return "inf"
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _number(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_number(obj.real), _number(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2) + "\n"


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)
    return path


@dataclass
class Analysis:
    omega: QuadDiff
    graph: CriticalGraph
    table: Optional[PeriodTable]
    domains: Optional[List[RingDomain]]
    cfg: TraceConfig


def analyze(omega: QuadDiff, cfg: Optional[TraceConfig] = None) -> Analysis:
    """Divisor, critical graph, periods and ring domains of one differential."""
    cfg = cfg or TraceConfig.from_settings()
    graph = critical_graph(omega, cfg)
    table = domains = None
    if graph.verdict.is_strebel:
        table = periods(graph, omega)
        try:
            domains = ring_domains(graph, omega)
        except DomainError as exc:
            log.warning("ring domains unavailable: %s", exc)
    return Analysis(omega, graph, table, domains, cfg)


def divisor_json(omega: QuadDiff) -> list:
    return [{"point": e.point, "order": e.order} for e in omega.entries]


def perimeters_json(omega: QuadDiff) -> list:
    return [
        {
            "point": pd.point,
            "c_minus_2": pd.leading_coeff,
            "perimeter": pd.perimeter,
            "perimeter_imag": pd.perimeter_imag,
        }
        for pd in double_poles(omega)
    ]


def trace_report(traj: Trajectory, spec: str, include_points: bool = False) -> dict:
    points = traj.sphere_points()
    report = {
        "spec": spec,
        "termination": traj.termination,
        "flat_length": traj.flat_length,
        "total_length": traj.total_length,
        "steps": len(points),
        "start": points[0],
        "end": points[-1],
    }
    if include_points:
        report["points"] = points
    return report


def analysis_report(result: Analysis, spec: Optional[str] = None, include_edges: bool = False) -> dict:
    report = {
        "spec": spec if spec is not None else result.omega.label,
        "coefficient": result.omega.f.to_json(),
        "divisor": divisor_json(result.omega),
        "perimeters": perimeters_json(result.omega),
        "verdict": result.graph.verdict,
        "periods": result.table.to_json() if result.table is not None else None,
        "ring_domains": [d.to_json() for d in result.domains] if result.domains is not None else None,
        "edges": [
            {"endpoints": [e.start, e.end], "length": e.length, "orientation": e.orientation}
            for e in result.graph.edges
        ],
        "vertices": [{"point": v.point, "order": v.order} for v in result.graph.vertices],
        "config": result.cfg.to_json(),
    }
    if include_edges:
        report["graph"] = result.graph.to_json()
    return report
