"""Planar convex intersections and the pairwise tube-overlap bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError, GeometryError, NearParallelError
from .geometry import Tube, spherical_distance, tube_vertices_2d

CONVEXITY_TOL = 1e-12
SNAP_TOL = 1e-12
PARALLEL_CUTOFF = 1e-9


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) and len(v) < 3:
            raise GeometryError("a non-empty polygon needs at least 3 vertices")
        if len(v):
            edges = np.roll(v, -1, axis=0) - v
            turns = _cross(edges, np.roll(edges, -1, axis=0))
            scale = max(1.0, float(np.max(np.abs(v))) ** 2)
            if np.any(turns < -CONVEXITY_TOL * scale):
                raise GeometryError("polygon is not convex and counterclockwise")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def empty(cls) -> "ConvexPolygon":
        return cls(np.empty((0, 2)))

    @classmethod
    def from_tube(cls, t: Tube) -> "ConvexPolygon":
        return cls(tube_vertices_2d(t))

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def area(self) -> float:
        return polygon_area(self)


def polygon_area(p: ConvexPolygon) -> float:
    """Shoelace area; zero for the empty polygon."""
    v = p.vertices
    if len(v) < 3:
        return 0.0
    return 0.5 * abs(float(np.sum(_cross(v, np.roll(v, -1, axis=0)))))


def _dedupe(points: list[np.ndarray]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if not out or np.max(np.abs(p - out[-1])) > SNAP_TOL:
            out.append(p)
    if len(out) > 1 and np.max(np.abs(out[0] - out[-1])) <= SNAP_TOL:
        out.pop()
    return out


def clip(subject: ConvexPolygon, clip_region: ConvexPolygon) -> ConvexPolygon:
    """Sutherland-Hodgman clip of ``subject`` by ``clip_region``."""
    if subject.is_empty or clip_region.is_empty:
        return ConvexPolygon.empty()
    poly = [np.asarray(p) for p in subject.vertices]
    cv = clip_region.vertices
    for k in range(len(cv)):
        a, b = cv[k], cv[(k + 1) % len(cv)]
        edge = b - a
        side = [float(_cross(edge, p - a)) for p in poly]
        out = []
        for i, p in enumerate(poly):
            q = poly[(i + 1) % len(poly)]
            sp, sq = side[i], side[(i + 1) % len(poly)]
            if sp >= 0:
                out.append(p)
            if (sp >= 0) != (sq >= 0):
                t = sp / (sp - sq)
                out.append(p + t * (q - p))
        poly = _dedupe(out)
        if len(poly) < 3:
            return ConvexPolygon.empty()
    verts = np.array(poly)
    if float(np.sum(_cross(verts, np.roll(verts, -1, axis=0)))) <= 0.0:
        return ConvexPolygon.empty()
    return _safe_polygon(verts)


def _safe_polygon(verts: np.ndarray) -> ConvexPolygon:
    # rounding can leave a sliver turn slightly negative; drop such vertices
    while len(verts) >= 3:
        edges = np.roll(verts, -1, axis=0) - verts
        turns = _cross(edges, np.roll(edges, -1, axis=0))
        bad = np.flatnonzero(turns < -CONVEXITY_TOL)
        if not len(bad):
            return ConvexPolygon(verts)
        verts = np.delete(verts, (bad[0] + 1) % len(verts), axis=0)
    return ConvexPolygon.empty()


def slab_intersection_area(eps: float, d: float) -> float:
    """Cross-section area of two infinite eps-slabs whose normals are ``d`` apart."""
    if not eps > 0:
        raise ArgumentError("eps must be positive")
    if d <= PARALLEL_CUTOFF or d >= math.pi - PARALLEL_CUTOFF:
        raise NearParallelError(f"slabs at angle {d:g} are (nearly) parallel")
    return eps * eps / math.sin(d)


def crossing_angle(a: Tube, b: Tube) -> float:
    return spherical_distance(a.core.direction, b.core.direction)


def tube_pair_intersection_area_2d(a: Tube, b: Tube) -> float:
    """Exact area of the intersection of two planar tubes."""
    if a.dim != 2 or b.dim != 2:
        raise DimensionError("tube_pair_intersection_area_2d needs planar tubes")
    area = polygon_area(clip(ConvexPolygon.from_tube(a), ConvexPolygon.from_tube(b)))
    return min(area, a.volume, b.volume)


def _gap_angle(i: int, j: int, eps: float, alpha: float) -> tuple[int, float]:
    if i == j:
        raise ArgumentError("pair bounds need distinct indices")
    gap = abs(i - j)
    angle = gap * eps**alpha
    if angle >= math.pi - PARALLEL_CUTOFF:
        raise NearParallelError(f"angle {angle:g} is not admissible")
    return gap, angle


def pairwise_bound(i: int, j: int, eps: float, alpha: float) -> float:
    """(2/pi) eps^(2-alpha) / |i-j|, the linearized fan-pair expression with constant 2/pi.

    Not an upper bound for eps^2/sin(|i-j| eps^alpha): sin x >= 2x/pi gives
    the constant pi/2 instead.  Use :func:`linearized_pair_bound` wherever a
    valid bound is needed.
    """
    gap, _ = _gap_angle(i, j, eps, alpha)
    return (2.0 / math.pi) * eps ** (2.0 - alpha) / gap


def linearized_pair_bound(i: int, j: int, eps: float, alpha: float) -> float:
    """(pi/2) eps^(2-alpha) / |i-j|; dominates eps^2/sin(d) while d = |i-j| eps^alpha <= pi/2."""
    gap, _ = _gap_angle(i, j, eps, alpha)
    return (math.pi / 2.0) * eps ** (2.0 - alpha) / gap


def fan_pair_overlap_bound(i: int, j: int, eps: float, alpha: float, tube_area: float) -> float:
    """Upper bound on |T_i cap T_j| for fan tubes, never above a tube's area.

    Uses the linearized bound while the crossing angle is at most pi/2 and
    the exact eps^2/sin(d) form beyond that.
    """
    angle = abs(i - j) * eps**alpha
    d = angle % math.pi
    if d <= PARALLEL_CUTOFF or d >= math.pi - PARALLEL_CUTOFF:
        return tube_area
    if angle <= math.pi / 2:
        bound = linearized_pair_bound(i, j, eps, alpha)
    else:
        bound = slab_intersection_area(eps, d)
    return min(bound, tube_area)
