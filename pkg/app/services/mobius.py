"""Mobius transformations of the sphere as projective 2x2 complex matrices."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import DomainError
from services.cpoly import EVAL_TOL, INF, Poly, RationalFn, SpherePoint, normalize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MobiusMap:
    """Stored with its largest-magnitude entry scaled to exactly 1."""

    m11: complex
    m12: complex
    m21: complex
    m22: complex
    tag: Optional[str] = None

    def __post_init__(self):
        entries = [complex(self.m11), complex(self.m12), complex(self.m21), complex(self.m22)]
        if not all(np.isfinite(e.real) and np.isfinite(e.imag) for e in entries):
            raise DomainError("Mobius entries must be finite")
        pivot = max(entries, key=abs)
        if pivot == 0:
            raise DomainError("zero matrix is not a Mobius map")
        entries = [e / pivot for e in entries]
        det = entries[0] * entries[3] - entries[1] * entries[2]
        if abs(det) <= EVAL_TOL:
            raise DomainError("singular matrix is not a Mobius map")
        for name, value in zip(("m11", "m12", "m21", "m22"), entries):
            object.__setattr__(self, name, value)

    @classmethod
    def from_matrix(cls, m, tag: Optional[str] = None) -> "MobiusMap":
        return cls(m[0][0], m[0][1], m[1][0], m[1][1], tag)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    @property
    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    def __call__(self, z: SpherePoint) -> SpherePoint:
        return apply(self, z)

    def to_rational(self) -> RationalFn:
        return normalize(RationalFn(Poly.of([self.m12, self.m11]), Poly.of([self.m22, self.m21])))

    def derivative_at(self, z: complex) -> complex:
        return self.det / (self.m21 * z + self.m22) ** 2

    def to_json(self) -> dict:
        return {
            "matrix": [[e.real, e.imag] for e in (self.m11, self.m12, self.m21, self.m22)],
            "tag": self.tag,
        }


IDENTITY = MobiusMap(1, 0, 0, 1, "identity")
# h(z) = (z - 1) / z, the order-3 symmetry of q1
H = MobiusMap(1, -1, 1, 0, "h")


def apply(M: MobiusMap, z: SpherePoint) -> SpherePoint:
    if z is INF:
        if M.m21 == 0:
            return INF
        return M.m11 / M.m21
    num = M.m11 * z + M.m12
    den = M.m21 * z + M.m22
    if abs(den) <= EVAL_TOL * (abs(M.m21) * abs(z) + abs(M.m22)):
        return INF
    return num / den


def inverse(M: MobiusMap) -> MobiusMap:
    tag = None
    if M.tag == "identity":
        tag = "identity"
    elif M.tag:
        tag = f"{M.tag}^-1"
    return MobiusMap(M.m22, -M.m12, -M.m21, M.m11, tag)


def compose(M: MobiusMap, N: MobiusMap) -> MobiusMap:
    """M after N."""
    prod = M.matrix @ N.matrix
    return MobiusMap.from_matrix(prod)


def projectively_equal(M: MobiusMap, N: MobiusMap, tol: float = 1e-12) -> bool:
    u = np.array([M.m11, M.m12, M.m21, M.m22])
    v = np.array([N.m11, N.m12, N.m21, N.m22])
    scale = np.linalg.norm(u) * np.linalg.norm(v)
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(u[i] * v[j] - u[j] * v[i]) > tol * scale:
                return False
    return True


def build_phi(a: float, b: float) -> MobiusMap:
    """phi(z) = (a + bi)/(2a) * (z - a)/(z - bi): sends a, -a, bi to 0, 1, inf."""
    a, b = float(a), float(b)
    if a == 0 or b == 0:
        raise DomainError("build_phi needs a != 0 and b != 0")
    s = complex(a, b)
    return MobiusMap(s, -a * s, 2 * a, -2j * a * b, "phi")
