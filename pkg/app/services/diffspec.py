"""
The diff-spec mini-language naming a quadratic differential:

    q1
    omega:a,b
    hyper:r;beta2,beta3,...
    elliptic:a1,a2,a3,a4;c'
    cover:r
    rat:[n0,n1,...]/[d0,d1,...]      (coefficients in ascending degree)

Complex literals are written re+imi (for example 0.5-2i, 3i, -i) and the
point at infinity is "inf".
"""

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List

from core.errors import UsageError
from services import constructions as cons
from services.cpoly import INF, Poly, RationalFn, SpherePoint
from services.qdiff import QuadDiff, rational_pullback

log = logging.getLogger(__name__)

_IMAG = re.compile(r"^(?P<head>.*?)(?P<coef>[+-]?(?:\d+\.?\d*(?:e[+-]?\d+)?|\.\d+(?:e[+-]?\d+)?)?)i$")


@dataclass
class ParsedSpec:
    kind: str
    text: str
    omega: QuadDiff
    details: Dict[str, Any] = field(default_factory=dict)


def parse_complex(text: str) -> complex:
    s = text.strip().lower().replace(" ", "")
    if not s:
        raise UsageError("empty number")
    if s.endswith("i"):
        m = _IMAG.match(s)
        if not m:
            raise UsageError(f"bad complex literal {text!r}")
        coef = m.group("coef")
        if coef in ("", "+", "-"):
            coef += "1"
        s = m.group("head") + coef + "j"
    try:
        value = complex(s)
    except ValueError:
        raise UsageError(f"bad complex literal {text!r}") from None
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise UsageError(f"non-finite number {text!r}")
    return value


def parse_point(text: str) -> SpherePoint:
    if text.strip().lower() in ("inf", "infinity", "oo"):
        return INF
    return parse_complex(text)


def parse_real(text: str) -> float:
    value = parse_complex(text)
    if value.imag != 0:
        raise UsageError(f"expected a real number, got {text!r}")
    return value.real


def _split(text: str) -> List[str]:
    return [part for part in (p.strip() for p in text.split(",")) if part]


def _coefficients(text: str) -> Poly:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise UsageError(f"coefficient list must be bracketed: {text!r}")
    values = [parse_complex(v) for v in _split(text[1:-1])]
    if not values:
        raise UsageError("empty coefficient list")
    return Poly.of(values)


def parse_diff_spec(text: str) -> ParsedSpec:
    """Resolve a diff-spec string to a quadratic differential (plus construction data)."""
    raw = text.strip()
    kind, _, body = raw.partition(":")
    kind = kind.lower()

    if kind == "q1":
        if body:
            raise UsageError("q1 takes no parameters")
        return ParsedSpec("q1", raw, cons.q1())

    if kind == "omega":
        parts = _split(body)
        if len(parts) != 2:
            raise UsageError("omega needs two reals: omega:a,b")
        a, b = (parse_real(p) for p in parts)
        return ParsedSpec("omega", raw, cons.omega_ab(a, b), {"a": a, "b": b})

    if kind == "hyper":
        head, _, tail = body.partition(";")
        if not head.strip():
            raise UsageError("hyper needs r: hyper:r;beta2,beta3,...")
        r = parse_real(head)
        extra = [parse_point(p) for p in _split(tail)]
        spec = cons.build_hyperelliptic(r, extra)
        return ParsedSpec("hyper", raw, spec.base_diff, {"hyper": spec})

    if kind == "elliptic":
        head, sep, tail = body.partition(";")
        points = [parse_point(p) for p in _split(head)]
        if len(points) != 4 or not sep:
            raise UsageError("elliptic needs four points and c': elliptic:a1,a2,a3,a4;c'")
        c_prime = parse_complex(tail)
        omega = cons.from_branch_points(points, c_prime, label=raw)
        return ParsedSpec("elliptic", raw, omega, {"points": points, "c_prime": c_prime})

    if kind == "cover":
        r = parse_real(body)
        sol = cons.cover_solver(r)
        omega = rational_pullback(cons.cover_map(sol), cons.q1())
        return ParsedSpec("cover", raw, QuadDiff(omega.f, raw), {"cover": sol})

    if kind == "rat":
        num_text, sep, den_text = body.partition("]/[")
        if not sep:
            raise UsageError("rat needs [num]/[den]")
        num = _coefficients(num_text + "]")
        den = _coefficients("[" + den_text)
        if num.is_zero:
            raise UsageError("numerator is zero")
        if den.is_zero:
            raise UsageError("denominator is zero")
        return ParsedSpec("rat", raw, QuadDiff.make(RationalFn(num, den), raw))

    raise UsageError(f"unknown diff-spec {text!r}")
