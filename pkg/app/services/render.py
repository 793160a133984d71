"""
SVG pictures of critical graphs.

Zeros are filled dots, simple poles open dots and double poles crossed dots.
Critical edges are solid polylines; leaves that did not end at a singularity
(spirals, budget overruns, sample noncritical leaves) are dashed. Pieces of a
leaf that leave the viewport or pass through infinity are cut there and the
cut is marked with an infinity sign.
"""

import logging
from html import escape
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from services.cpoly import INF, SpherePoint
from services.flow import TerminationKind, Trajectory
from services.qdiff import DivisorEntry
from services.strebel import CriticalGraph

log = logging.getLogger(__name__)

NS_SVG = "http://www.w3.org/2000/svg"
SIZE = 480
PADDING = 0.12
VIEW_CAP = 6.0       # leaves are cut beyond this modulus
MIN_SPAN = 1.0
DOT = 4.0

EDGE_STYLE = dict(stroke="#1f4e79", stroke_width=1.6, fill="none")
LEAF_STYLE = dict(stroke="#8a8a8a", stroke_width=1.0, fill="none", stroke_dasharray="5 3")


def demangle(k: str) -> str:
    return k.replace("_", "-")


def rounder(x, prec: int = 4):
    if isinstance(x, float):
        xr = round(x, prec)
        return int(xr) if xr % 1 == 0 else xr
    return x


def props_repr(d: dict) -> str:
    return " ".join(f'{demangle(k)}="{rounder(v)}"' for k, v in d.items())


class Element:
    def __init__(self, tag: str, children: Optional[List["Element"]] = None, text: Optional[str] = None, **attr):
        self.tag = tag
        self.children = children or []
        self.text = text
        self.attr = attr

    def __repr__(self):
        return f"{self.tag}: {props_repr(self.attr)}"

    def svg(self) -> str:
        props = props_repr(self.attr)
        pre = " " if props else ""
        if not self.children and self.text is None:
            return f"<{self.tag}{pre}{props} />"
        inner = escape(self.text) if self.text is not None else "\n" + "\n".join(c.svg() for c in self.children) + "\n"
        return f"<{self.tag}{pre}{props}>{inner}</{self.tag}>"


class Viewport:
    """Affine map from the z-plane (y = -Im z) to pixel coordinates."""

    def __init__(self, points: Iterable[complex], size: float = SIZE, padding: float = PADDING):
        pts = np.array([p for p in points if abs(p) <= VIEW_CAP], dtype=complex)
        if pts.size == 0:
            pts = np.array([0j])
        lo_x, hi_x = pts.real.min(), pts.real.max()
        lo_y, hi_y = (-pts.imag).min(), (-pts.imag).max()
        span = max(hi_x - lo_x, hi_y - lo_y, MIN_SPAN) * (1 + 2 * padding)
        self.cx = 0.5 * (lo_x + hi_x)
        self.cy = 0.5 * (lo_y + hi_y)
        self.span = span
        self.size = size

    def __call__(self, z: complex) -> Tuple[float, float]:
        k = self.size / self.span
        return (self.size / 2 + k * (z.real - self.cx), self.size / 2 + k * (-z.imag - self.cy))

    def contains(self, z: SpherePoint) -> bool:
        if z is INF or abs(z) > VIEW_CAP:
            return False
        x, y = self(z)
        return 0 <= x <= self.size and 0 <= y <= self.size


def split_visible(points: Sequence[SpherePoint], view: Viewport) -> Tuple[List[List[complex]], List[complex]]:
    """Visible runs of a polyline plus the last visible point before each cut."""
    runs: List[List[complex]] = []
    cuts: List[complex] = []
    current: List[complex] = []
    for p in points:
        if view.contains(p):
            current.append(complex(p))
            continue
        if current:
            runs.append(current)
            cuts.append(current[-1])
            current = []
    if current:
        runs.append(current)
    return [r for r in runs if len(r) >= 2], cuts


def _polyline(run: Sequence[complex], view: Viewport, style: dict) -> Element:
    coords = " ".join("{:.3f},{:.3f}".format(*view(z)) for z in run)
    return Element("polyline", points=coords, **style)


def _infinity_mark(z: complex, view: Viewport) -> Element:
    x, y = view(z)
    return Element("text", text="∞", x=x + 4.0, y=y - 4.0, font_size=14, fill="#b03a2e")


def _vertex(entry: DivisorEntry, view: Viewport) -> List[Element]:
    x, y = view(entry.point)
    if entry.order >= 1:
        return [Element("circle", cx=x, cy=y, r=DOT, fill="black")]
    if entry.order == -1:
        return [Element("circle", cx=x, cy=y, r=DOT, fill="white", stroke="black", stroke_width=1.2)]
    d = DOT * 0.7
    return [
        Element("circle", cx=x, cy=y, r=DOT, fill="white", stroke="black", stroke_width=1.2),
        Element("line", x1=x - d, y1=y - d, x2=x + d, y2=y + d, stroke="black", stroke_width=1.2),
        Element("line", x1=x - d, y1=y + d, x2=x + d, y2=y - d, stroke="black", stroke_width=1.2),
    ]


def _leaf(points: Sequence[SpherePoint], view: Viewport, style: dict) -> List[Element]:
    runs, cuts = split_visible(points, view)
    out = [_polyline(run, view, style) for run in runs]
    out += [_infinity_mark(z, view) for z in cuts]
    return out


def render_graph(g: CriticalGraph, entries: Sequence[DivisorEntry],
                 extra_leaves: Sequence[Trajectory] = (), title: Optional[str] = None) -> str:
    """SVG document for a critical graph; entries is the full divisor (poles included)."""
    edge_lines = [e.polyline(g.vertices) for e in g.edges]
    open_traces = [t for t in g.traces if t.termination.kind != TerminationKind.HIT_SINGULAR]
    leaves = [t.sphere_points() for t in list(open_traces) + list(extra_leaves)]

    finite = [e.point for e in entries if e.point is not INF]
    for line in edge_lines:
        finite += [p for p in line if p is not INF]
    view = Viewport(finite)

    body: List[Element] = [Element("rect", x=0, y=0, width=view.size, height=view.size, fill="white")]
    for line in edge_lines:
        body += _leaf(line, view, EDGE_STYLE)
    for line in leaves:
        body += _leaf(line, view, LEAF_STYLE)
    for entry in entries:
        if entry.point is not INF and view.contains(entry.point):
            body += _vertex(entry, view)
    if title:
        body.append(Element("text", text=title, x=8, y=18, font_size=13, fill="#333333"))

    log.debug("rendered %d edges and %d open leaves", len(edge_lines), len(leaves))
    doc = Element("svg", body, width=view.size, height=view.size, xmlns=NS_SVG,
                  viewBox=f"0 0 {view.size} {view.size}")
    return doc.svg() + "\n"


def save(text: str, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fid:
        fid.write(text)
    log.info("wrote %s", path)
    return path
