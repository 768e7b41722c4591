"""Generators: equi-angular tube fans, slab fans on pages, Kakeya books, and an
adversarial placement search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ArgumentError
from .geometry import TWO_PI, PageFamily
from .rng import child_seed_ints
from .union_measure import Schedule, TubeFamily, fan_count, sample_box

PLACEMENT_KINDS = ("through_origin", "random_ball", "explicit", "adversarial")


@dataclass(frozen=True)
class PlacementSpec:
    """Where the tubes of a fan sit.

    ``through_origin`` centers every tube at the origin; ``random_ball``
    draws centers uniformly in B(0, radius); ``explicit`` takes ``centers``
    verbatim; ``adversarial`` runs :func:`adversarial_search` for
    ``iterations`` steps.
    """

    kind: str = "through_origin"
    radius: float = 1.0
    seed: int = 0
    centers: Optional[tuple] = None
    iterations: int = 200

    def __post_init__(self):
        if self.kind not in PLACEMENT_KINDS:
            raise ArgumentError(f"unknown placement kind {self.kind!r}")
        if self.kind == "explicit" and self.centers is None:
            raise ArgumentError("explicit placement needs centers")
        if self.kind == "adversarial" and self.iterations < 1:
            raise ArgumentError("adversarial placement needs at least one iteration")
        if self.centers is not None:
            object.__setattr__(self, "centers", tuple(tuple(float(x) for x in c) for c in self.centers))


def uniform_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return g * r[:, None]


def _check_schedule(alpha: float, c: float, eps: float) -> None:
    if not 0 < alpha < 1:
        raise ArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 < c <= TWO_PI:
        raise ArgumentError(f"c must lie in (0, 2pi], got {c}")
    if not 0 < eps < 1:
        raise ArgumentError(f"eps must lie in (0, 1), got {eps}")


def place_centers(placement: PlacementSpec, count: int, dim: int, alpha: float, c: float, eps: float) -> np.ndarray:
    if placement.kind == "through_origin":
        return np.zeros((count, dim))
    if placement.kind == "random_ball":
        return uniform_ball(np.random.default_rng(placement.seed), count, dim, placement.radius)
    if placement.kind == "explicit":
        centers = np.array(placement.centers, dtype=float).reshape(-1, dim)
        if len(centers) != count:
            raise ArgumentError(f"explicit placement has {len(centers)} centers, family needs {count}")
        return centers
    if dim != 2:
        raise ArgumentError("adversarial placement is implemented for planar fans")
    result = adversarial_search(alpha, c, eps, placement.iterations, placement.seed, init_radius=placement.radius)
    return result.centers


def fan_angles(alpha: float, c: float, eps: float) -> np.ndarray:
    return np.arange(fan_count(alpha, c, eps)) * eps**alpha


def build_fan(alpha: float, c: float, eps: float, placement: PlacementSpec = PlacementSpec()) -> TubeFamily:
    """Planar fan: tube i has long-side angle i*eps^alpha, i = 0..floor(c/eps^alpha)."""
    _check_schedule(alpha, c, eps)
    angles = fan_angles(alpha, c, eps)
    centers = place_centers(placement, len(angles), 2, alpha, c, eps)
    return _planar_family(centers, angles, eps, Schedule(alpha, c, eps))


def _planar_family(centers, angles, eps, schedule=None, length: float = 1.0) -> TubeFamily:
    cos, sin = np.cos(angles), np.sin(angles)
    frames = np.stack([np.stack([cos, sin], -1), np.stack([-sin, cos], -1)], axis=1)
    return TubeFamily(centers, frames, eps, np.full(len(angles), length), 1, angles, schedule)


def build_slab_fan(
    n: int,
    alpha: float,
    c: float,
    eps: float,
    placement: PlacementSpec = PlacementSpec(),
    pages: Optional[PageFamily] = None,
) -> TubeFamily:
    """Slab pieces 1^(n-1) x eps, tube i lying on the page with angle i*eps^alpha.

    The unit cube of tube i is spanned by the page's in-plane direction and
    the common complement of the page plane; its thin axis is the page normal.
    """
    _check_schedule(alpha, c, eps)
    if n < 2:
        raise ArgumentError("dimension must be at least 2")
    pages = pages or PageFamily.standard(n)
    angles = fan_angles(alpha, c, eps)
    comp = pages.complement()
    frames = np.array([np.vstack([pages.in_plane_direction(t), pages.normal(t), comp]) for t in angles])
    centers = place_centers(placement, len(angles), n, alpha, c, eps)
    return TubeFamily(centers, frames, eps, None, 1, angles, Schedule(alpha, c, eps))


# Kakeya books ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BookPage:
    angle: float
    offset: np.ndarray
    frame: np.ndarray  # rows: orthonormal basis of the page, in page coordinates order
    normal: np.ndarray
    book: "KakeyaBook"


@dataclass(frozen=True, eq=False)
class KakeyaBook:
    """A discretized n-Kakeya book.

    For ``dim == 2`` the leaf is a planar fan (``fan``).  For ``dim > 2`` each
    sampled page angle carries an offset ``a`` and a (dim-1)-book expressed in
    the page's own coordinates (the rows of ``frame``).
    """

    dim: int
    bound_C: float
    fan: Optional[TubeFamily] = None
    pages: Optional[PageFamily] = None
    leaves: tuple = field(default=())

    def skeleton(self) -> tuple[np.ndarray, np.ndarray]:
        """(centers, frames) of every leaf tube in ambient coordinates.

        ``frames[:, 0]`` is the segment direction; the other rows are the
        in-page normal followed by the page normals of every level.
        """
        if self.dim == 2:
            return np.array(self.fan.centers), np.array(self.fan.frames)
        centers, frames = [], []
        for leaf in self.leaves:
            c, f = leaf.book.skeleton()
            centers.append(leaf.offset + c @ leaf.frame)
            lifted = f @ leaf.frame
            normal = np.broadcast_to(leaf.normal, (len(f), 1, self.dim))
            frames.append(np.concatenate([lifted, normal], axis=1))
        return np.concatenate(centers), np.concatenate(frames)

    def leaf_lengths(self) -> np.ndarray:
        if self.dim == 2:
            return np.array(self.fan.lengths)
        return np.concatenate([leaf.book.leaf_lengths() for leaf in self.leaves])

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment endpoints (starts, ends) of the skeleton."""
        c, f = self.skeleton()
        half = 0.5 * self.leaf_lengths()[:, None] * f[:, 0]
        return c - half, c + half

    def tubes(self, eps: Optional[float] = None) -> TubeFamily:
        """The eps-box neighbourhood of every leaf segment (all normal axes thin)."""
        c, f = self.skeleton()
        width = eps if eps is not None else self._leaf_eps()
        labels = self.page_labels()
        return TubeFamily(c, f, width, self.leaf_lengths(), self.dim - 1, labels=labels)

    def page_labels(self) -> np.ndarray:
        if self.dim == 2:
            return np.zeros(len(self.fan), dtype=int)
        return np.concatenate([np.full(len(leaf.book.leaf_lengths()), i) for i, leaf in enumerate(self.leaves)])

    def _leaf_eps(self) -> float:
        return self.fan.width if self.dim == 2 else self.leaves[0].book._leaf_eps()

    def max_norm(self) -> float:
        """Largest distance from the origin of any leaf tube corner (exact for boxes)."""
        c, f = self.skeleton()
        half = np.full((len(c), self.dim), 0.5 * self._leaf_eps())
        half[:, 0] = 0.5 * self.leaf_lengths()
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        corners = c[:, None, :] + np.einsum("sk,tk,tkj->tsj", signs, half, f)
        return float(np.max(np.linalg.norm(corners, axis=2)))


def _min_radius(n: int, eps: float) -> float:
    """Radius of a through-origin book of dimension n (corner padding included)."""
    return 0.5 + 0.5 * eps * math.sqrt(max(1, n - 1))


def build_book(
    n: int,
    angle_step: float,
    leaf_params: tuple[float, float, float],
    placement_seed: int = 0,
    placement: str = "random",
    bound_C: float = 2.0,
    page_span: float = math.pi,
    pages: Optional[PageFamily] = None,
) -> KakeyaBook:
    """Build a discretized n-Kakeya book.

    ``placement="random"`` draws page offsets and leaf centers from
    ``placement_seed`` so that everything stays in B(0, bound_C);
    ``placement="through_origin"`` uses zero offsets and through-origin fans,
    giving the open book whose pages share one (n-2)-dimensional spine.
    Pages are sampled at angles 0, angle_step, ... below ``page_span``.
    """
    alpha, c, eps = leaf_params
    if n < 2:
        raise ArgumentError("a Kakeya book needs dimension at least 2")
    if not angle_step > 0:
        raise ArgumentError("angle_step must be positive")
    if placement not in ("random", "through_origin"):
        raise ArgumentError(f"unknown book placement {placement!r}")
    _check_schedule(alpha, c, eps)
    if bound_C < _min_radius(n, eps):
        raise ArgumentError(f"bound_C={bound_C} cannot hold a book of dimension {n}")
    if n == 2:
        if placement == "through_origin":
            spec = PlacementSpec("through_origin")
        else:
            radius = max(0.0, bound_C - _min_radius(2, eps))
            spec = PlacementSpec("random_ball", radius=radius, seed=placement_seed)
        return KakeyaBook(2, bound_C, fan=build_fan(alpha, c, eps, spec))

    pages = pages or PageFamily.standard(n)
    # angles in [0, page_span); a page at page_span would repeat page 0 when span = pi
    angles = np.arange(max(1, int(math.ceil(page_span / angle_step - 1e-9)))) * angle_step
    seeds = child_seed_ints(placement_seed, 2 * len(angles))
    r_off = min(0.5 * bound_C, max(0.0, bound_C - _min_radius(n - 1, eps)))
    sub_bound = bound_C - r_off
    comp = pages.complement()
    leaves = []
    for k, t in enumerate(angles):
        frame = np.vstack([pages.in_plane_direction(t), comp])
        if placement == "random":
            offset = uniform_ball(np.random.default_rng(seeds[2 * k]), 1, n, r_off)[0]
        else:
            offset = np.zeros(n)
        sub = build_book(
            n - 1,
            angle_step,
            leaf_params,
            seeds[2 * k + 1],
            placement,
            sub_bound,
            page_span,
        )
        leaves.append(BookPage(float(t), offset, frame, pages.normal(t), sub))
    return KakeyaBook(n, bound_C, pages=pages, leaves=tuple(leaves))


def build_unit_ball_book(eps: float, page_span: float = math.pi) -> KakeyaBook:
    """The unit ball as a 3-book: every page holds the unit disk.

    Each disk is a fan of length-2 diameters at angular step ``eps`` and the
    pages are sampled at step ``eps``, so the eps-boxes cover B(0, 1) up to
    an O(eps) shell as eps -> 0.
    """
    pages = PageFamily.standard(3)
    comp = pages.complement()
    disk_angles = np.arange(int(math.ceil(math.pi / eps))) * eps
    fan = _planar_family(np.zeros((len(disk_angles), 2)), disk_angles, eps, length=2.0)
    disk = KakeyaBook(2, 1.0 + eps, fan=fan)
    leaves = tuple(
        BookPage(float(t), np.zeros(3), np.vstack([pages.in_plane_direction(t), comp]), pages.normal(t), disk)
        for t in np.arange(int(math.ceil(page_span / eps))) * eps
    )
    return KakeyaBook(3, 1.0 + eps * math.sqrt(2), pages=pages, leaves=leaves)


# adversarial placement ---------------------------------------------------------

@dataclass(frozen=True)
class AdversarialResult:
    centers: np.ndarray
    history: tuple  # objective after each iteration (non-increasing)
    initial: float
    accepted: int


def adversarial_search(
    alpha: float,
    c: float,
    eps: float,
    iterations: int,
    seed: int,
    samples: int = 200_000,
    sigma: float = 0.05,
    decay: float = 0.9,
    domain_radius: float = 2.0,
    init_radius: float = 1.0,
) -> AdversarialResult:
    """Hill descent on tube centers minimizing the Monte Carlo union area.

    The sample points are fixed for the whole search (common random numbers),
    so the objective is a deterministic function of the centers and each
    move is evaluated incrementally from per-point coverage counts.  One
    iteration is the evaluation of the seeded initial placement; every
    further iteration proposes a Gaussian move of one center (projected into
    B(0, domain_radius)) and accepts it only on a strict decrease.  The step
    shrinks by ``decay`` on each rejection and resets on acceptance.
    """
    _check_schedule(alpha, c, eps)
    if iterations < 1:
        raise ArgumentError("iterations must be at least 1")
    angles = fan_angles(alpha, c, eps)
    k = len(angles)
    init_seed, pts_seed, walk_seed = child_seed_ints(seed, 3)
    centers = uniform_ball(np.random.default_rng(init_seed), k, 2, init_radius)
    half = domain_radius + 0.5 + eps
    lo, hi = np.array([-half, -half]), np.array([half, half])
    box_area = float(np.prod(hi - lo))
    pts = sample_box(lo, hi, samples, pts_seed)
    pts = pts[np.argsort(pts[:, 0], kind="stable")]
    xs = pts[:, 0]
    dirs = np.stack([np.cos(angles), np.sin(angles)], -1)
    nrms = np.stack([-np.sin(angles), np.cos(angles)], -1)
    reach_x = 0.5 * np.abs(dirs[:, 0]) + 0.5 * eps * np.abs(nrms[:, 0])

    def hits(i, center):
        a = np.searchsorted(xs, center[0] - reach_x[i] - 1e-9, side="left")
        b = np.searchsorted(xs, center[0] + reach_x[i] + 1e-9, side="right")
        rel = pts[a:b] - center
        inside = (np.abs(rel @ dirs[i]) <= 0.5 + 1e-9) & (np.abs(rel @ nrms[i]) <= 0.5 * eps + 1e-9)
        return a + np.flatnonzero(inside)

    cover = np.zeros(len(pts), dtype=np.int32)
    members = []
    for i in range(k):
        h = hits(i, centers[i])
        cover[h] += 1
        members.append(h)
    covered = int(np.count_nonzero(cover))
    scale = box_area / len(pts)
    history = [covered * scale]
    initial = history[0]
    rng = np.random.default_rng(walk_seed)
    step = sigma
    accepted = 0
    for _ in range(iterations - 1):
        i = int(rng.integers(k))
        prop = centers[i] + rng.normal(0.0, step, 2)
        norm = float(np.linalg.norm(prop))
        if norm > domain_radius:
            prop *= domain_radius / norm
        old, new = members[i], hits(i, prop)
        lost = int(np.count_nonzero(cover[old] == 1))
        cover[old] -= 1
        gained = int(np.count_nonzero(cover[new] == 0))
        candidate = covered - lost + gained
        if candidate < covered:
            cover[new] += 1
            centers[i] = prop
            members[i] = new
            covered = candidate
            accepted += 1
            step = sigma
        else:
            cover[old] += 1
            step *= decay
        history.append(covered * scale)
    return AdversarialResult(centers.copy(), tuple(history), initial, accepted)


def adversarial_placement(alpha: float, c: float, eps: float, iterations: int, seed: int, **kw) -> PlacementSpec:
    """The best explicit placement found by :func:`adversarial_search`."""
    result = adversarial_search(alpha, c, eps, iterations, seed, **kw)
    return PlacementSpec("explicit", centers=tuple(map(tuple, result.centers)))
