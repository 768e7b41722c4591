"""Direction caps, the lift of a segment family into R^(2n-1), Grassmannian
projections back down, rearrangement distances and the sector-interior finder
for families of segments on lines through the origin."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import betainc
from scipy.stats import norm, qmc

from .errors import ArgumentError, DimensionError, EmptySelectionError, InconclusiveError
from .geometry import (
    Direction,
    GrassmannElement,
    Hyperplane,
    Segment,
    basis_vector,
    line_hyperplane_intersection,
    orthonormal_complement,
)

DEGENERATE_TOL = 1e-12
ORIGIN_TOL = 1e-9
SHELL_WIDTH = 0.5


# direction caps --------------------------------------------------------------

@dataclass(frozen=True)
class DirectionSet:
    """Spherical cap of geodesic ``radius`` about ``center``.

    The chart sends the open unit ball of R^(n-1) onto the open cap by
    ``y -> exp_center(radius * y)`` in the tangent basis ``tangent``.
    ``margin`` is a lower bound for |<theta, normal(H)>| on the cap.
    """

    center: Direction
    radius: float
    margin: float = 0.0

    def __post_init__(self):
        if not isinstance(self.center, Direction):
            object.__setattr__(self, "center", Direction(self.center))
        if not 0 < self.radius <= math.pi:
            raise ArgumentError(f"cap radius must lie in (0, pi], got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.dim

    @property
    def tangent(self) -> np.ndarray:
        return orthonormal_complement(self.center.unit[None, :], self.dim)

    def chart(self, y) -> np.ndarray:
        """Map points of the open unit ball of R^(n-1) to directions in the cap."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        r = np.linalg.norm(y, axis=1)
        if np.any(r >= 1.0):
            raise ArgumentError("chart points must lie in the open unit ball")
        v = y @ self.tangent
        ang = self.radius * r
        with np.errstate(invalid="ignore", divide="ignore"):
            unit_v = np.where(r[:, None] > 0, v / np.where(r > 0, r, 1.0)[:, None], 0.0)
        return np.cos(ang)[:, None] * self.center.unit + np.sin(ang)[:, None] * unit_v

    def inverse_chart(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
        ang = np.arccos(np.clip(theta @ self.center.unit, -1.0, 1.0))
        t = theta @ self.tangent.T
        tn = np.linalg.norm(t, axis=1)
        scale = np.where(tn > 0, ang / (self.radius * np.where(tn > 0, tn, 1.0)), 0.0)
        return t * scale[:, None]

    def contains(self, theta, tol: float = 1e-12) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
        return np.arccos(np.clip(theta @ self.center.unit, -1.0, 1.0)) <= self.radius + tol

    def quasi_uniform(self, count: int, seed: int = 0) -> np.ndarray:
        """``count`` directions from a scrambled Halton sequence pushed through the chart."""
        if count < 1:
            raise ArgumentError("count must be positive")
        d = self.dim - 1
        u = qmc.Halton(d=d + (d > 1), scramble=True, seed=seed).random(count)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        if d == 1:
            y = 2.0 * u - 1.0
        else:
            g = norm.ppf(u[:, 1:])
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            y = g * (u[:, :1] ** (1.0 / d))
        return self.chart(y * (1.0 - 1e-12))

    def uniform(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Directions distributed by surface measure on the cap."""
        d = self.dim - 1
        out = np.empty((0, self.dim))
        while len(out) < count:
            m = 2 * (count - len(out)) + 16
            g = rng.standard_normal((m, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = self.radius * rng.random(m) ** (1.0 / d)
            if d > 1:
                # density on the sphere carries sin(r)^(d-1) against r^(d-1) in the tangent ball
                keep = rng.random(m) <= (np.sinc(r / math.pi)) ** (d - 1)
                g, r = g[keep], r[keep]
            v = g @ self.tangent
            out = np.vstack([out, np.cos(r)[:, None] * self.center.unit + np.sin(r)[:, None] * v])
        return out[:count]


def cap_fraction(n: int, margin: float) -> float:
    """Fraction of S^(n-1) with |theta_1| >= margin."""
    if not 0 <= margin <= 1:
        raise ArgumentError("margin must lie in [0, 1]")
    return float(1.0 - betainc(0.5, 0.5 * (n - 1), margin * margin))


def _arrays(segments: Sequence[Segment]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not len(segments):
        raise EmptySelectionError("empty segment family")
    c = np.array([s.center for s in segments])
    d = np.array([s.direction.unit for s in segments])
    L = np.array([s.length for s in segments])
    return c, d, L


def restrict_directions(
    segments: Sequence[Segment], h: Hyperplane, margin: float = 0.5
) -> tuple[DirectionSet, list[Segment]]:
    """Keep segments with |<theta, normal(h)>| >= margin.

    Directions are flipped toward the normal (the segment set is unchanged),
    so every kept direction lies in the cap of radius arccos(margin) about it.
    """
    if not 0 < margin <= 1:
        raise ArgumentError(f"margin must lie in (0, 1], got {margin}")
    c, d, L = _arrays(segments)
    nrm = h.normal.unit
    dots = d @ nrm
    keep = np.abs(dots) >= margin
    if not keep.any():
        raise EmptySelectionError(f"no direction has |<theta, normal>| >= {margin}")
    sign = np.where(dots < 0, -1.0, 1.0)
    kept = [Segment(c[i], Direction(sign[i] * d[i]), L[i]) for i in np.flatnonzero(keep)]
    cap = DirectionSet(Direction(nrm), max(math.acos(min(1.0, margin)), 1e-15), margin)
    return cap, kept


# lift ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LiftRecord:
    original: Segment
    x_theta: np.ndarray
    lifted: Segment


def lift_family(family: Sequence[Segment], h: Hyperplane) -> tuple[LiftRecord, ...]:
    """Lift each segment to R^n x R^(n-1), shifted by (0, x_theta).

    x_theta is the point where the extended line meets ``h``, in the
    coordinates of ``h.basis()`` about ``h.foot``.
    """
    out = []
    for s in family:
        if s.dim != h.ambient_dim:
            raise DimensionError("segment and hyperplane differ in dimension")
        x = h.coordinates(line_hyperplane_intersection(s, h))[0]
        center = np.concatenate([s.center, x])
        direction = np.concatenate([s.direction.unit, np.zeros(len(x))])
        out.append(LiftRecord(s, x, Segment(center, Direction(direction), s.length)))
    return tuple(out)


def tilde_h_basis(h: Hyperplane) -> np.ndarray:
    """Orthonormal rows spanning the direction space of H~ = {(p, x) : p in h, x = coords(p)}."""
    b = h.basis()
    k = len(b)
    return np.hstack([b, np.eye(k)]) / math.sqrt(2.0)


def tilde_h_anchor(h: Hyperplane) -> np.ndarray:
    return np.concatenate([h.foot, np.zeros(h.ambient_dim - 1)])


def h_tilde_perp(h: Hyperplane) -> GrassmannElement:
    """Orthogonal complement of H~'s direction space, as a Grassmann element of dimension n."""
    n = h.ambient_dim
    return GrassmannElement(orthonormal_complement(tilde_h_basis(h), 2 * n - 1))


def tilde_h_residual(record: LiftRecord, h: Hyperplane) -> float:
    """Distance between the lifted extended line and H~ (zero when they meet)."""
    s = record.lifted
    basis = tilde_h_basis(h)
    a = np.vstack([s.direction.unit, -basis]).T
    rhs = tilde_h_anchor(h) - s.center
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    return float(np.linalg.norm(a @ sol - rhs))


def gamma0(n: int) -> GrassmannElement:
    """Coordinate projection of R^(2n-1) onto its first n coordinates."""
    if n < 2:
        raise ArgumentError("n must be at least 2")
    return GrassmannElement(np.eye(2 * n - 1)[:n])


def perturb_gamma(g: GrassmannElement, delta: float, seed: int) -> GrassmannElement:
    """Move ``g`` along a random Grassmann geodesic so its largest principal angle is ``delta``.

    The rotation acting on R^m has ||R - I||_2 = 2 sin(delta/2) <= delta.
    """
    if not 0 <= delta < 0.5:
        raise ArgumentError(f"delta must lie in [0, 0.5), got {delta}")
    if delta == 0:
        return g
    k, m = g.sub_dim, g.ambient_dim
    q = orthonormal_complement(g.basis, m)
    x = np.random.default_rng(seed).standard_normal((m - k, k))
    u, s, vt = np.linalg.svd(x, full_matrices=True)
    r = len(s)
    angles = np.zeros(k)
    angles[:r] = delta * s / s[0]
    u_pad = np.zeros((m - k, k))
    u_pad[:, :r] = u[:, :r]
    cols = g.basis.T @ vt.T * np.cos(angles) + q.T @ u_pad * np.sin(angles)
    return GrassmannElement.from_span((cols @ vt).T)


# projection and rearrangement -------------------------------------------------------

@dataclass(frozen=True)
class RearrangementReport:
    displacements: np.ndarray  # per kept theta, max over matched points of |P x~ - x|
    hausdorff: np.ndarray  # per kept theta, Hausdorff distance between the segments
    epsilon_target: float
    degenerate: tuple  # indices whose image collapsed to a point
    lipschitz: float  # largest neighbour ratio |F(a) - F(b)| / |a - b|

    @property
    def displacement(self) -> float:
        return float(np.max(self.displacements)) if len(self.displacements) else 0.0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.displacements < self.epsilon_target))


@dataclass(frozen=True)
class ProjectedFamily:
    segments: tuple  # Segment or None (degenerate) per record
    directions: np.ndarray  # F(theta) per record, NaN rows when degenerate
    report: Optional[RearrangementReport] = None

    @property
    def degenerate(self) -> tuple:
        return tuple(i for i, s in enumerate(self.segments) if s is None)


def _segment_hausdorff(a0, a1, b0, b1) -> float:
    def dist(p, s0, s1):
        d = s1 - s0
        t = np.clip((p - s0) @ d / max(float(d @ d), 1e-300), 0.0, 1.0)
        return float(np.linalg.norm(p - s0 - t * d))

    return max(dist(a0, b0, b1), dist(a1, b0, b1), dist(b0, a0, a1), dist(b1, a0, a1))


def direction_lipschitz(thetas: np.ndarray, values: np.ndarray, neighbours: int = 6) -> float:
    """Largest ratio |F(a) - F(b)| / |a - b| over nearest-neighbour pairs."""
    ok = np.all(np.isfinite(values), axis=1)
    thetas, values = thetas[ok], values[ok]
    if len(thetas) < 2:
        return 0.0
    k = min(neighbours + 1, len(thetas))
    dist, idx = cKDTree(thetas).query(thetas, k=k)
    dist, idx = dist[:, 1:], idx[:, 1:]
    num = np.linalg.norm(values[idx] - values[:, None, :], axis=2)
    ratio = np.where(dist > 0, num / np.where(dist > 0, dist, 1.0), 0.0)
    return float(np.max(ratio))


def project_family(
    records: Sequence[LiftRecord],
    g: GrassmannElement,
    epsilon_target: float = 0.1,
    anchor: Optional[np.ndarray] = None,
) -> ProjectedFamily:
    """Images of the lifted segments under pi_g (after subtracting ``anchor``).

    When g has dimension n the images are compared with the original
    segments: point x~(t) of the lift is matched with x(t) of the original,
    and the displacement is max_t |pi_g x~(t) - x(t)|, attained at an end.
    """
    if not len(records):
        raise EmptySelectionError("no records to project")
    n = records[0].original.dim
    if g.ambient_dim != 2 * n - 1:
        raise DimensionError(f"projection needs ambient dimension {2 * n - 1}, got {g.ambient_dim}")
    anchor = np.zeros(g.ambient_dim) if anchor is None else np.asarray(anchor, dtype=float)
    segs, dirs, disp, haus, thetas = [], [], [], [], []
    for r in records:
        s = r.lifted
        pc = g.project(s.center - anchor)
        pd = g.project(s.direction.unit)
        norm_pd = float(np.linalg.norm(pd))
        if norm_pd < DEGENERATE_TOL:
            segs.append(None)
            dirs.append(np.full(g.sub_dim, np.nan))
            continue
        img = Segment(pc, Direction(pd / norm_pd), s.length * norm_pd)
        segs.append(img)
        dirs.append(pd / norm_pd)
        if g.sub_dim == n:
            a0, a1 = r.original.endpoints
            p0, p1 = (g.project(e - anchor) for e in s.endpoints)
            disp.append(max(float(np.linalg.norm(p0 - a0)), float(np.linalg.norm(p1 - a1))))
            haus.append(_segment_hausdorff(p0, p1, a0, a1))
            thetas.append(r.original.direction.unit)
    dirs = np.array(dirs)
    report = None
    if g.sub_dim == n:
        ok = np.array([s is not None for s in segs])
        originals = np.array([r.original.direction.unit for r in records])
        lip = direction_lipschitz(originals[ok], dirs[ok])
        report = RearrangementReport(
            np.array(disp), np.array(haus), float(epsilon_target),
            tuple(int(i) for i in np.flatnonzero(~ok)), lip,
        )
    return ProjectedFamily(tuple(segs), dirs, report)


def line_origin_distance(s: Segment) -> float:
    """Distance from the origin to the infinite line through ``s``."""
    c, u = s.center, s.direction.unit
    return float(np.linalg.norm(c - (c @ u) * u))


# spaghetti check ---------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusDecomposition:
    shell_width: float
    shells: dict  # k -> indices of rays meeting shell k
    N: int
    ray_dirs: np.ndarray = field(repr=False)
    ray_lo: np.ndarray = field(repr=False)
    ray_hi: np.ndarray = field(repr=False)


def rays_of(family: Sequence[Segment], tol: float = ORIGIN_TOL):
    """Split each segment into its radial pieces: (unit direction, r_lo, r_hi, segment index)."""
    dirs, lo, hi, owner = [], [], [], []
    for i, s in enumerate(family):
        if line_origin_distance(s) > tol:
            raise ArgumentError(f"segment {i} does not lie on a line through the origin")
        u = s.direction.unit
        a = float(s.center @ u) - 0.5 * s.length
        b = float(s.center @ u) + 0.5 * s.length
        if b > 0:
            dirs.append(u), lo.append(max(a, 0.0)), hi.append(b), owner.append(i)
        if a < 0:
            dirs.append(-u), lo.append(max(-b, 0.0)), hi.append(-a), owner.append(i)
    return np.array(dirs), np.array(lo), np.array(hi), np.array(owner)


def annulus_decomposition(family: Sequence[Segment], shell_width: float = SHELL_WIDTH) -> AnnulusDecomposition:
    dirs, lo, hi, _ = rays_of(family)
    first = np.floor(lo / shell_width).astype(int)
    last = np.floor(hi / shell_width).astype(int)
    shells: dict[int, list] = {}
    for i, (f, l) in enumerate(zip(first, last)):
        for k in range(f, l + 1):
            shells.setdefault(int(k), []).append(i)
    shells = {k: np.array(v) for k, v in sorted(shells.items())}
    return AnnulusDecomposition(shell_width, shells, int(max(shells)), dirs, lo, hi)


@dataclass(frozen=True)
class SectorWitness:
    shell: int
    cap: DirectionSet
    radial: tuple  # (t_lo, t_hi), a common radial interval inside the shell
    members: np.ndarray  # ray directions inside the sub-cap
    max_sample_distance: float  # over the verification samples
    fill_epsilon: float  # largest distance from a continuum sector point to the family seen
    decomposition: AnnulusDecomposition = field(repr=False)

    def contains(self, points) -> np.ndarray:
        """Membership in the open sector {t theta : t in radial, theta in cap}."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        t = np.linalg.norm(p, axis=1)
        a, b = self.radial
        ok = (t > a) & (t < b)
        cos = (p @ self.cap.center.unit) / np.where(t > 0, t, 1.0)
        return ok & (np.arccos(np.clip(cos, -1.0, 1.0)) < self.cap.radius)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.cap.dim
        b = self.radial[1]
        return np.full(n, -b), np.full(n, b)

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        """Points of the open sector, uniform by volume."""
        rng = np.random.default_rng(seed)
        n = self.cap.dim
        theta = self.cap.uniform(count, rng)
        a, b = self.radial
        t = (a**n + (b**n - a**n) * rng.random(count)) ** (1.0 / n)
        return t[:, None] * theta


def _family_distance(points: np.ndarray, family: Sequence[Segment], block: int = 256) -> np.ndarray:
    c, d, L = _arrays(family)
    out = np.full(len(points), np.inf)
    for s in range(0, len(c), block):
        cc, dd, hl = c[s:s + block], d[s:s + block], 0.5 * L[s:s + block]
        rel = points[:, None, :] - cc[None]
        t = np.clip(np.einsum("psk,sk->ps", rel, dd), -hl, hl)
        dist = np.linalg.norm(rel - t[..., None] * dd[None], axis=2)
        out = np.minimum(out, dist.min(axis=1))
    return out


def _candidate_caps(dirs: np.ndarray, seeds: int = 64, levels: int = 4):
    """(center, radius) pairs, largest radii first.

    Each seed direction selects the rays in its open hemisphere; their
    normalized mean is the cap center and the largest angle to them the
    top radius, halved ``levels - 1`` times.
    """
    stride = max(1, len(dirs) // seeds)
    tops = []
    for s in dirs[::stride]:
        hemi = dirs[dirs @ s > 0]
        m = hemi.mean(axis=0)
        if np.linalg.norm(m) < 1e-9:
            continue
        c = m / np.linalg.norm(m)
        R = float(np.max(np.arccos(np.clip(hemi @ c, -1.0, 1.0))))
        tops.append((c, min(max(R, 1e-6), math.pi)))
    for j in range(levels):
        for c, R in tops:
            yield c, R / 2**j


def _median_spacing(unit: np.ndarray) -> float:
    """Median nearest-neighbour angle among distinct directions."""
    dist, _ = cKDTree(unit).query(unit, k=2)
    return float(np.median(2.0 * np.arcsin(np.clip(0.5 * dist[:, 1], 0.0, 1.0))))


def spaghetti_check(
    family: Sequence[Segment],
    direction_samples: int = 1000,
    sector_samples: int = 1000,
    min_members: int = 16,
    seed: int = 0,
    shell_width: float = SHELL_WIDTH,
    fill_factor: float = 4.0,
) -> SectorWitness:
    """Find a shell k and a sub-cap of directions whose rays all cover a common
    radial interval inside shell k; the open sector they sweep is the witness.

    A sub-cap counts as an open set of directions at this resolution when it
    holds at least ``min_members`` distinct directions and ``direction_samples``
    probe directions drawn in it all lie within ``fill_factor`` median
    neighbour spacings (and a quarter radius) of a member.  The witness is
    checked on ``sector_samples`` points r*theta with theta a member.
    """
    if min_members < 2:
        raise ArgumentError("min_members must be at least 2")
    dec = annulus_decomposition(family, shell_width)
    dirs, lo, hi = dec.ray_dirs, dec.ray_lo, dec.ray_hi
    rng = np.random.default_rng(seed)
    candidates = list(_candidate_caps(dirs))
    for k, idx in dec.shells.items():
        s_lo, s_hi = k * shell_width, (k + 1) * shell_width
        in_shell = np.zeros(len(dirs), dtype=bool)
        in_shell[idx] = True
        for center, rho in candidates:
            members = np.flatnonzero(np.arccos(np.clip(dirs @ center, -1.0, 1.0)) <= rho)
            if len(members) < min_members or not in_shell[members].all():
                continue
            t_lo = max(float(lo[members].max()), s_lo)
            t_hi = min(float(hi[members].min()), s_hi)
            if not t_hi - t_lo > 1e-9:
                continue
            member_dirs = np.unique(np.round(dirs[members], 12), axis=0)
            if len(member_dirs) < min_members:
                continue
            cap = DirectionSet(Direction(center), rho)
            probe = cap.uniform(direction_samples, rng)
            fill = float(np.max(np.arccos(np.clip(np.max(probe @ member_dirs.T, axis=1), -1, 1))))
            if fill > min(0.25 * rho, fill_factor * _median_spacing(member_dirs)):
                continue
            # open interval: stay strictly inside
            pad = 1e-6 * (t_hi - t_lo)
            radial = (t_lo + pad, t_hi - pad)
            pick = rng.integers(len(member_dirs), size=sector_samples)
            r = rng.uniform(radial[0], radial[1], sector_samples)
            pts = r[:, None] * member_dirs[pick]
            max_d = float(np.max(_family_distance(pts, family)))
            cont = r[:, None] * cap.uniform(sector_samples, rng)
            fill_eps = float(np.max(_family_distance(cont, family)))
            return SectorWitness(k, cap, radial, member_dirs, max_d, fill_eps, dec)
    raise InconclusiveError("no shell and sub-cap found at this sampling resolution")


def centered_family(cap: DirectionSet, count: int, radius: float = 0.0, length: float = 1.0, seed: int = 0) -> list[Segment]:
    """Segments of the given length along quasi-uniform cap directions, centered at radius*theta."""
    theta = cap.quasi_uniform(count, seed)
    return [Segment(radius * t, Direction(t), length) for t in theta]


def default_hyperplane(n: int) -> Hyperplane:
    """{x_1 = 0}."""
    return Hyperplane(Direction(basis_vector(n, 0)), 0.0)
