"""Core primitives: directions, segments, tubes, hyperplanes, pages, Grassmannians.

Points are plain float arrays of shape ``(n,)``. Every type here is immutable;
arrays stored on instances are marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionError, GeometryError, ParallelError

TWO_PI = 2.0 * math.pi
MIN_NORM = 1e-12
BOUNDARY_TOL = 1e-9
MIN_SINGULAR = 1e-8


def as_point(x) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.size < 1:
        raise DimensionError("empty coordinate vector")
    arr.setflags(write=False)
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def basis_vector(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


@dataclass(frozen=True)
class Direction:
    """A unit vector; renormalized on construction."""

    unit: np.ndarray

    def __post_init__(self):
        v = np.array(self.unit, dtype=float).reshape(-1)
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or norm < MIN_NORM:
            raise GeometryError(f"cannot build a direction from a vector of norm {norm:g}")
        object.__setattr__(self, "unit", _frozen(v / norm))

    @classmethod
    def from_angle(cls, angle: float) -> "Direction":
        return cls(np.array([math.cos(angle), math.sin(angle)]))

    @property
    def dim(self) -> int:
        return self.unit.shape[0]

    def __neg__(self) -> "Direction":
        return Direction(-self.unit)


def _unit(d) -> np.ndarray:
    return d.unit if isinstance(d, Direction) else Direction(d).unit


def spherical_distance(a, b) -> float:
    """Great-circle distance between two unit vectors, in ``[0, pi]``."""
    ua, ub = _unit(a), _unit(b)
    if ua.shape != ub.shape:
        raise DimensionError(f"dimension mismatch: {ua.shape[0]} vs {ub.shape[0]}")
    return math.acos(min(1.0, max(-1.0, float(ua @ ub))))


def orthonormal_complement(vectors, dim: int) -> np.ndarray:
    """Rows form an orthonormal basis of the orthogonal complement of ``span(vectors)``."""
    vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vecs.size == 0:
        return np.eye(dim)
    _, s, vt = np.linalg.svd(vecs, full_matrices=True)
    rank = int(np.sum(s > MIN_SINGULAR * max(1.0, s[0])))
    return vt[rank:].copy()


@dataclass(frozen=True)
class Segment:
    center: np.ndarray
    direction: Direction
    length: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", Direction(self.direction))
        if self.direction.dim != self.center.shape[0]:
            raise DimensionError("segment center and direction differ in dimension")
        if not self.length > 0:
            raise GeometryError("segment length must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * self.length * self.direction.unit
        return self.center - half, self.center + half

    def distance_to(self, points) -> np.ndarray:
        """Euclidean distance from each point to the closed segment."""
        p = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        t = np.clip(p @ self.direction.unit, -0.5 * self.length, 0.5 * self.length)
        return np.linalg.norm(p - t[:, None] * self.direction.unit, axis=1)


@dataclass(frozen=True)
class Tube:
    """A box around a segment: length along the core, ``width`` across thin axes.

    ``normal_frame`` holds n-1 orthonormal vectors orthogonal to the core.  The
    first ``thin_count`` of them are thin axes (half-extent ``width/2``), the
    rest are long axes (half-extent 1/2).  ``thin_count=1`` gives the 1 x eps
    rectangle in the plane and the 1^(n-1) x eps slab piece in higher dimension;
    ``thin_count=n-1`` gives the box neighbourhood of a segment.
    """

    core: Segment
    width: float
    normal_frame: np.ndarray
    thin_count: int = 1

    def __post_init__(self):
        n = self.core.dim
        frame = np.atleast_2d(np.asarray(self.normal_frame, dtype=float))
        if frame.shape != (n - 1, n):
            raise DimensionError(f"normal frame must have shape {(n - 1, n)}, got {frame.shape}")
        full = np.vstack([self.core.direction.unit, frame])
        if not np.allclose(full @ full.T, np.eye(n), atol=1e-12):
            raise GeometryError("tube frame is not orthonormal")
        if not self.width > 0:
            raise GeometryError("tube width must be positive")
        if not 1 <= self.thin_count <= n - 1:
            raise ArgumentError("thin_count must lie in [1, n-1]")
        object.__setattr__(self, "normal_frame", _frozen(frame))

    @classmethod
    def planar(cls, center, angle: float, width: float, length: float = 1.0) -> "Tube":
        """2-D tube whose long side has directional angle ``angle``."""
        c, s = math.cos(angle), math.sin(angle)
        core = Segment(center, Direction(np.array([c, s])), length)
        return cls(core, width, np.array([[-s, c]]))

    @property
    def dim(self) -> int:
        return self.core.dim

    @property
    def half_extents(self) -> np.ndarray:
        """Half-extents along (core, normal_frame...)."""
        h = np.full(self.dim, 0.5)
        h[0] = 0.5 * self.core.length
        h[1 : 1 + self.thin_count] = 0.5 * self.width
        return h

    @property
    def frame(self) -> np.ndarray:
        return np.vstack([self.core.direction.unit, self.normal_frame])

    @property
    def volume(self) -> float:
        return float(np.prod(2.0 * self.half_extents))

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        reach = np.abs(self.frame).T @ self.half_extents
        return self.core.center - reach, self.core.center + reach

    def contains(self, points, tol: float = BOUNDARY_TOL) -> np.ndarray:
        """Closed-set membership with boundary tolerance ``tol``."""
        p = np.atleast_2d(np.asarray(points, dtype=float)) - self.core.center
        local = p @ self.frame.T
        return np.all(np.abs(local) <= self.half_extents + tol, axis=1)

    def vertices_2d(self) -> np.ndarray:
        return tube_vertices_2d(self)


def tube_vertices_2d(t: Tube) -> np.ndarray:
    """The four corners of a planar tube, counterclockwise."""
    if t.dim != 2:
        raise DimensionError(f"tube_vertices_2d needs a planar tube, got dimension {t.dim}")
    d = t.core.direction.unit * (0.5 * t.core.length)
    nu = t.normal_frame[0] * (0.5 * t.width)
    # orient the normal so (d, nu) is positively oriented
    if d[0] * nu[1] - d[1] * nu[0] < 0:
        nu = -nu
    c = t.core.center
    return np.array([c - d - nu, c + d - nu, c + d + nu, c - d + nu])


@dataclass(frozen=True)
class Hyperplane:
    """The set ``{x : <x, normal> = offset}``."""

    normal: Direction
    offset: float = 0.0

    def __post_init__(self):
        if not isinstance(self.normal, Direction):
            object.__setattr__(self, "normal", Direction(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def ambient_dim(self) -> int:
        return self.normal.dim

    @property
    def foot(self) -> np.ndarray:
        return self.offset * self.normal.unit

    def basis(self) -> np.ndarray:
        """Orthonormal rows spanning the direction space of the hyperplane.

        For a coordinate hyperplane ``x_i = c`` the basis is the remaining
        standard basis vectors in order, so hyperplane coordinates are just
        the other coordinates.
        """
        n = self.ambient_dim
        u = self.normal.unit
        axis = int(np.argmax(np.abs(u)))
        if abs(abs(u[axis]) - 1.0) < 1e-15:
            return np.delete(np.eye(n), axis, axis=0)
        return orthonormal_complement(u[None, :], n)

    def coordinates(self, points) -> np.ndarray:
        """Coordinates of points (assumed on the plane) in ``basis()`` about ``foot``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (p - self.foot) @ self.basis().T

    def residual(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return p @ self.normal.unit - self.offset


def line_hyperplane_intersection(s: Segment, h: Hyperplane) -> np.ndarray:
    """Point where the infinite extension of ``s`` meets ``h``."""
    if s.dim != h.ambient_dim:
        raise DimensionError("segment and hyperplane differ in dimension")
    denom = float(s.direction.unit @ h.normal.unit)
    if abs(denom) < MIN_NORM:
        raise ParallelError("segment is parallel to the hyperplane")
    t = (h.offset - float(s.center @ h.normal.unit)) / denom
    return s.center + t * s.direction.unit


@dataclass(frozen=True)
class PageFamily:
    """Hyperplanes through the origin whose normals sweep the circle of span(u, v)."""

    u: Direction
    v: Direction
    phase: float = 0.0

    def __post_init__(self):
        u = self.u if isinstance(self.u, Direction) else Direction(self.u)
        v = self.v if isinstance(self.v, Direction) else Direction(self.v)
        if u.dim != v.dim:
            raise DimensionError("page basis vectors differ in dimension")
        if abs(float(u.unit @ v.unit)) > 1e-12:
            raise GeometryError("page basis vectors are not orthogonal")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "phase", float(self.phase) % TWO_PI)

    @classmethod
    def standard(cls, n: int, phase: float = 0.0) -> "PageFamily":
        return cls(Direction(basis_vector(n, 0)), Direction(basis_vector(n, 1)), phase)

    @property
    def dim(self) -> int:
        return self.u.dim

    def normal(self, t: float) -> np.ndarray:
        a = t + self.phase
        return math.cos(a) * self.u.unit + math.sin(a) * self.v.unit

    def in_plane_direction(self, t: float) -> np.ndarray:
        """Unit vector of span(u, v) lying in the page at angle ``t``."""
        a = t + self.phase
        return -math.sin(a) * self.u.unit + math.cos(a) * self.v.unit

    def complement(self) -> np.ndarray:
        """Orthonormal basis of span(u, v)^perp, shared by every page."""
        return orthonormal_complement(np.vstack([self.u.unit, self.v.unit]), self.dim)

    def page_frame(self, t: float) -> np.ndarray:
        """Rows: orthonormal basis of the page, starting with the in-plane direction."""
        return np.vstack([self.in_plane_direction(t), self.complement()])


def page_at(pages: PageFamily, t: float) -> Hyperplane:
    """The page with directional angle ``t`` (reduced mod 2 pi)."""
    return Hyperplane(Direction(pages.normal(float(t) % TWO_PI)), 0.0)


@dataclass(frozen=True)
class GrassmannElement:
    """A k-dimensional subspace of R^m, stored as k orthonormal rows."""

    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        k, m = b.shape
        if not k < m:
            raise DimensionError(f"subspace dimension {k} must be below ambient {m}")
        if not np.allclose(b @ b.T, np.eye(k), atol=1e-10):
            raise GeometryError("Grassmann basis is not orthonormal")
        object.__setattr__(self, "basis", _frozen(b))

    @classmethod
    def from_span(cls, vectors) -> "GrassmannElement":
        """Orthonormalize spanning vectors; rejects near-dependent input."""
        a = np.atleast_2d(np.asarray(vectors, dtype=float))
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        if s[-1] < MIN_SINGULAR:
            raise GeometryError(f"spanning vectors are nearly dependent (sigma_min={s[-1]:.3g})")
        q, r = np.linalg.qr(a.T)
        q = q * np.sign(np.diag(r))
        return cls(q.T)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def sub_dim(self) -> int:
        return self.basis.shape[0]

    def project(self, x) -> np.ndarray:
        """Coordinates of ``x`` (shape (..., m)) in the subspace basis."""
        return np.asarray(x, dtype=float) @ self.basis.T

    def embed(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.basis

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis


def principal_angles(a: GrassmannElement, b: GrassmannElement) -> np.ndarray:
    """Principal angles (ascending) between two subspaces of equal dimension."""
    if a.ambient_dim != b.ambient_dim:
        raise DimensionError("subspaces live in different ambient spaces")
    cos = np.sort(np.linalg.svd(a.basis @ b.basis.T, compute_uv=False))[::-1]
    # sines from the component of b outside a; accurate for small angles
    resid = b.basis - (b.basis @ a.basis.T) @ a.basis
    sin = np.sort(np.linalg.svd(resid, compute_uv=False))
    small = cos > math.sqrt(0.5)
    return np.where(small, np.arcsin(np.clip(sin, 0.0, 1.0)), np.arccos(np.clip(cos, -1.0, 1.0)))
