"""Polygonal domains, tagged boundary parts and critical points."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from signolab.fields import Field, make_field

CORNER_TOL = 1e-9


class GeometryError(ValueError):
    """Base class for invalid boundary specifications."""


class MissingDirichlet(GeometryError):
    pass


class SignoriniTouchesControl(GeometryError):
    pass


class UncoveredEdge(GeometryError):
    pass


class NonSimplePolygon(GeometryError):
    pass


class ConditionTag(str, enum.Enum):
    DIRICHLET = "D"
    NEUMANN = "N"
    CONTROL = "U"
    SIGNORINI = "S"

    def __str__(self):
        return self.value


def as_tag(t) -> ConditionTag:
    if isinstance(t, ConditionTag):
        return t
    try:
        return ConditionTag(str(t).upper()[:1])
    except ValueError:
        raise GeometryError(f"unknown condition tag {t!r}") from None


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p, tol=0.0) -> bool:
    return (
        min(a[0], b[0]) - tol <= p[0] <= max(a[0], b[0]) + tol
        and min(a[1], b[1]) - tol <= p[1] <= max(a[1], b[1]) + tol
    )


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test (touching counts)."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    def edge(self, k: int):
        return self.vertices[k], self.vertices[(k + 1) % self.n]

    def edge_length(self, k: int) -> float:
        a, b = self.edge(k)
        return math.hypot(b[0] - a[0], b[1] - a[1])

    def signed_area(self) -> float:
        v = self.array()
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def perimeter(self) -> float:
        return sum(self.edge_length(k) for k in range(self.n))

    def check(self) -> None:
        n = self.n
        if n < 3:
            raise NonSimplePolygon("polygon needs at least 3 vertices")
        for k in range(n):
            a, b = self.edge(k)
            if a == b:
                raise NonSimplePolygon(f"consecutive vertices {k} and {(k + 1) % n} coincide")
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if segments_intersect(*self.edge(i), *self.edge(j)):
                    raise NonSimplePolygon(f"edges {i} and {j} intersect")
        if self.signed_area() <= 0:
            raise NonSimplePolygon("polygon must be oriented counterclockwise")

    def contains(self, x, y) -> np.ndarray:
        """Strict-ish point-in-polygon by ray crossing (vectorized)."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for k in range(self.n):
            (x0, y0), (x1, y1) = self.edge(k)
            cond = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= cond & (x < xc)
        return inside


def interior_angle(polygon: Polygon, index: int) -> float:
    """Angle inside the (counterclockwise) polygon at vertex ``index``."""
    n = polygon.n
    p = np.array(polygon.vertices[index])
    prev = np.array(polygon.vertices[(index - 1) % n])
    nxt = np.array(polygon.vertices[(index + 1) % n])
    a = prev - p
    b = nxt - p
    # counterclockwise angle from the outgoing edge to the reversed incoming edge
    ang = math.atan2(b[0] * a[1] - b[1] * a[0], b[0] * a[0] + b[1] * a[1])
    if ang <= 0:
        ang += 2 * math.pi
    return ang


def outgoing_direction(polygon: Polygon, index: int) -> float:
    """Direction angle of the edge leaving vertex ``index``."""
    (x0, y0), (x1, y1) = polygon.edge(index)
    return math.atan2(y1 - y0, x1 - x0)


@dataclass(frozen=True)
class Segment:
    """A run of consecutive polygon edges sharing one boundary condition.

    ``data`` is either a tuple of polynomial coefficients in normalized
    arclength (degree <= 4) or a named analytic Field.
    """

    edges: tuple
    tag: ConditionTag
    data: object = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(int(e) for e in self.edges))
        object.__setattr__(self, "tag", as_tag(self.tag))
        d = self.data
        if d is None or isinstance(d, Field):
            pass
        elif isinstance(d, (dict, str)):
            d = make_field(d)
        else:
            d = tuple(float(c) for c in d)
            if len(d) > 5:
                raise GeometryError("segment polynomial data must have degree <= 4")
        object.__setattr__(self, "data", d)


@dataclass(frozen=True)
class BoundarySpec:
    polygon: Polygon
    segments: tuple
    lifting: Field | None = None
    load: Field | None = None
    gap: Field | None = None
    exact: Field | None = None
    name: str = ""
    _edge_segment: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for key in ("lifting", "load", "gap", "exact"):
            v = getattr(self, key)
            if v is not None and not isinstance(v, Field):
                object.__setattr__(self, key, make_field(v))
        owner = [-1] * self.polygon.n
        for s, seg in enumerate(self.segments):
            for e in seg.edges:
                if 0 <= e < self.polygon.n and owner[e] == -1:
                    owner[e] = s
        object.__setattr__(self, "_edge_segment", tuple(owner))

    def edge_segment(self, k: int) -> int:
        return self._edge_segment[k]

    def edge_tag(self, k: int) -> ConditionTag:
        return self.segments[self._edge_segment[k]].tag

    def has_tag(self, tag) -> bool:
        tag = as_tag(tag)
        return any(s.tag == tag for s in self.segments)

    def segment_length(self, s: int) -> float:
        return sum(self.polygon.edge_length(e) for e in self.segments[s].edges)

    def segment_arclength(self, s: int, edge: int, points) -> np.ndarray:
        """Normalized arclength in [0, 1] of ``points`` lying on ``edge`` of segment ``s``."""
        seg = self.segments[s]
        offset = 0.0
        for e in seg.edges:
            if e == edge:
                break
            offset += self.polygon.edge_length(e)
        a, _ = self.polygon.edge(edge)
        pts = np.atleast_2d(np.asarray(points, float))
        local = np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1])
        return (offset + local) / self.segment_length(s)

    def segment_data(self, s: int, edge: int, points) -> np.ndarray:
        """Evaluate the datum of segment ``s`` at points on one of its edges."""
        seg = self.segments[s]
        pts = np.atleast_2d(np.asarray(points, float))
        d = seg.data
        if d is None:
            fallback = {ConditionTag.DIRICHLET: self.lifting, ConditionTag.SIGNORINI: self.gap}.get(seg.tag)
            if fallback is None:
                return np.zeros(len(pts))
            return np.asarray(fallback.value(pts[:, 0], pts[:, 1]), float)
        if isinstance(d, Field):
            return np.asarray(d.value(pts[:, 0], pts[:, 1]), float)
        t = self.segment_arclength(s, edge, pts)
        return np.polynomial.polynomial.polyval(t, np.array(d))


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    angle: float
    pair: tuple
    kind: str
    vertex: int = -1
    direction: float = 0.0  # direction of the first leg (theta = 0 inside the domain)


def validate_boundary(spec: BoundarySpec) -> BoundarySpec:
    """Return ``spec`` unchanged if it satisfies all boundary-part constraints."""
    spec.polygon.check()
    n = spec.polygon.n
    seen = [0] * n
    for seg in spec.segments:
        if not seg.edges:
            raise UncoveredEdge("segment with no edges")
        for e in seg.edges:
            if not 0 <= e < n:
                raise UncoveredEdge(f"segment references edge {e} outside 0..{n - 1}")
            seen[e] += 1
        for a, b in zip(seg.edges, seg.edges[1:]):
            if b != (a + 1) % n:
                raise UncoveredEdge(f"segment edges {seg.edges} are not consecutive")
    for e, c in enumerate(seen):
        if c == 0:
            raise UncoveredEdge(f"edge {e} has no boundary condition")
        if c > 1:
            raise UncoveredEdge(f"edge {e} is tagged {c} times")
    if not spec.has_tag(ConditionTag.DIRICHLET):
        raise MissingDirichlet("Gamma_D must be non-empty")
    for v in range(n):
        t_in = spec.edge_tag((v - 1) % n)
        t_out = spec.edge_tag(v)
        if {t_in, t_out} == {ConditionTag.SIGNORINI, ConditionTag.CONTROL}:
            raise SignoriniTouchesControl(
                f"Signorini and control parts meet at vertex {v} {spec.polygon.vertices[v]}"
            )
    return spec


def critical_points(spec: BoundarySpec) -> list[CriticalPoint]:
    """Corners and tag-change points, ordered along the boundary from vertex 0."""
    poly = spec.polygon
    n = poly.n
    out = []
    for v in range(n):
        alpha = interior_angle(poly, v)
        corner = abs(alpha - math.pi) > CORNER_TOL
        t_in = spec.edge_tag((v - 1) % n)
        t_out = spec.edge_tag(v)
        change = t_in != t_out
        if not (corner or change):
            continue
        kind = "both" if corner and change else ("corner" if corner else "condition-change")
        out.append(
            CriticalPoint(
                location=poly.vertices[v],
                angle=alpha,
                pair=(t_out, t_in),
                kind=kind,
                vertex=v,
                direction=outgoing_direction(poly, v),
            )
        )
    return out
