import json

import numpy as np
import pytest

from services.cpoly import INF
from services.flow import TraceConfig, horizontal_direction, trace
from services.render import Element, Viewport, props_repr, render_graph, save, split_visible
from services.reports import Analysis, analysis_report, analyze, canonical, dumps, trace_report
from services.strebel import periods, ring_domains


def test_canonical_rounds_to_twelve_digits():
    assert canonical(0.1 + 0.2) == 0.3
    assert canonical(np.float64(1.0) / 3.0) == 0.333333333333
    assert canonical(1e-20) == 1e-20


def test_canonical_special_values():
    assert canonical(-0.0) == 0.0
    assert json.dumps(canonical(-0.0)) == "0.0"
    assert canonical(float("nan")) is None
    assert canonical(float("inf")) is None
    assert canonical(INF) == "inf"
    assert canonical(1 + 2j) == [1.0, 2.0]
    assert canonical((True, 3, np.int64(4))) == [True, 3, 4]
    assert canonical(np.array([0.5, 1.5])) == [0.5, 1.5]
    assert canonical({1: None}) == {"1": None}


def test_dumps_is_deterministic():
    a = dumps({"b": 1.0000000000001, "a": [0.1 + 0.2j]})
    b = dumps({"a": [0.1 + 0.2j], "b": 1.0})
    assert a == b
    assert a.endswith("\n")
    assert list(json.loads(a)) == ["a", "b"]


@pytest.fixture(scope="module")
def q1_analysis(q1, cfg, q1_graph):
    return Analysis(q1, q1_graph, periods(q1_graph, q1), ring_domains(q1_graph, q1), cfg)


def test_analysis_report(q1_analysis):
    report = canonical(analysis_report(q1_analysis, "q1"))
    assert report["spec"] == "q1"
    assert report["verdict"] == {"kind": "Strebel"}
    assert len(report["divisor"]) == 5
    assert len(report["edges"]) == 3
    assert len(report["periods"]) == 3
    assert len(report["ring_domains"]) == 3
    assert "graph" not in report
    assert sorted(p["perimeter"] for p in report["perimeters"]) == pytest.approx([2.0, 2.0, 2.0])
    assert report["config"]["step"] == 0.001


def test_analysis_report_with_edges(q1_analysis):
    report = canonical(analysis_report(q1_analysis, include_edges=True))
    assert report["spec"] == "q1"
    assert len(report["graph"]["edges"]) == 3
    assert all(len(e["polyline"]) > 10 for e in report["graph"]["edges"])


def test_analyze_skips_periods_for_undecided_graphs(q1):
    short = TraceConfig(length_budget=0.1)
    result = analyze(q1, short)
    assert not result.graph.verdict.is_strebel
    assert result.table is None and result.domains is None
    report = canonical(analysis_report(result))
    assert report["verdict"]["kind"] == "Undecided"
    assert report["periods"] is None


def test_trace_report(q1, cfg):
    z = 0.1 + 0j
    t = trace(q1, z, horizontal_direction(q1, z), cfg)
    report = canonical(trace_report(t, "q1"))
    assert report["termination"] == {"kind": "Closed"}
    assert report["flat_length"] == pytest.approx(2.0, abs=1e-5)
    assert report["start"] == [0.1, 0.0]
    assert "points" not in report
    full = canonical(trace_report(t, "q1", include_points=True))
    assert len(full["points"]) == full["steps"]


def test_props_and_elements():
    assert props_repr({"stroke_width": 2.0, "x": 1.23456}) == 'stroke-width="2" x="1.2346"'
    assert Element("circle", r=4).svg() == '<circle r="4" />'
    assert Element("text", text="<q1>", x=1).svg() == '<text x="1">&lt;q1&gt;</text>'


def test_split_visible_cuts_at_infinity():
    view = Viewport([0j, 1 + 0j])
    runs, cuts = split_visible([0j, 0.5 + 0j, INF, 1 + 0j, 1.05 + 0j], view)
    assert runs == [[0j, 0.5 + 0j], [1 + 0j, 1.05 + 0j]]
    assert cuts == [0.5 + 0j]


def test_render_q1_graph(q1, q1_graph, tmp_path):
    svg = render_graph(q1_graph, q1.entries, title="q1")
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 3
    assert "stroke-dasharray" not in svg
    # two zeros, plus the finite double poles at 0 and 1 drawn crossed
    assert svg.count("<circle") == 4
    assert svg.count("<line") == 4
    assert "∞" not in svg
    assert ">q1</text>" in svg
    path = save(svg, tmp_path / "figures" / "q1.svg")
    assert path.read_text(encoding="utf-8") == svg


def test_render_extra_leaf_is_dashed(q1, q1_graph, cfg):
    z = 0.1 + 0j
    leaf = trace(q1, z, horizontal_direction(q1, z), cfg)
    svg = render_graph(q1_graph, q1.entries, [leaf])
    assert svg.count("<polyline") == 4
    assert svg.count("stroke-dasharray") == 1
