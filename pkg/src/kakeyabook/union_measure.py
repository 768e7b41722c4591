"""Measures of tube unions.

Two engines:

* ``exact_union_area_2d`` integrates ``x dy`` over the boundary of the union
  of planar convex tubes.  Each tube edge is clipped against every other tube
  (Cyrus-Beck), the uncovered pieces are exactly the union boundary, and
  Green's theorem turns them into the area.  A certified rasterization
  bracket is available as an alternative method.
* ``monte_carlo_union_volume`` works in any dimension, with a uniform-grid
  spatial index so each sample is tested only against nearby tubes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, CapacityError, DimensionError
from .geometry import BOUNDARY_TOL, Direction, Segment, Tube, orthonormal_complement
from .intersection import (
    PARALLEL_CUTOFF,
    fan_pair_overlap_bound,
    tube_pair_intersection_area_2d,
)
from .rng import chunk_generators

DEFAULT_CAP = 50_000
MC_CHUNK = 1 << 16
RASTER_TOL = 1e-4


@dataclass(frozen=True)
class Schedule:
    alpha: float
    c: float
    eps: float

    @property
    def step(self) -> float:
        return self.eps**self.alpha

    @property
    def count(self) -> int:
        return fan_count(self.alpha, self.c, self.eps)


def fan_count(alpha: float, c: float, eps: float) -> int:
    """floor(c / eps^alpha) + 1, guarding against round-off just below an integer."""
    ratio = c / eps**alpha
    return int(math.floor(ratio * (1.0 + 1e-12))) + 1


@dataclass(frozen=True, eq=False)
class TubeFamily:
    """An ordered tube family stored as packed arrays.

    ``frames[i]`` has the core direction as row 0 and the normal frame below;
    the first ``thin_count`` normal rows are thin (half-extent ``width/2``).
    ``angles[i]`` is the directional angle of tube ``i`` (planar axis angle,
    or page angle in higher dimension) when the family follows a schedule.
    """

    centers: np.ndarray
    frames: np.ndarray
    width: float
    lengths: Optional[np.ndarray] = None
    thin_count: int = 1
    angles: Optional[np.ndarray] = None
    schedule: Optional[Schedule] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        frames = np.asarray(self.frames, dtype=float).reshape(len(centers), centers.shape[1], centers.shape[1])
        lengths = np.ones(len(centers)) if self.lengths is None else np.asarray(self.lengths, dtype=float)
        for name, arr in (("centers", centers), ("frames", frames), ("lengths", lengths)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.angles is not None:
            a = np.asarray(self.angles, dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, "angles", a)

    @classmethod
    def from_tubes(cls, tubes: Sequence[Tube], **kw) -> "TubeFamily":
        tubes = list(tubes)
        if not tubes:
            raise ArgumentError("use TubeFamily.empty for an empty family")
        widths = {t.width for t in tubes}
        thins = {t.thin_count for t in tubes}
        if len(widths) != 1 or len(thins) != 1:
            raise ArgumentError("all tubes of a family share one width and thin_count")
        return cls(
            centers=np.array([t.core.center for t in tubes]),
            frames=np.array([t.frame for t in tubes]),
            width=tubes[0].width,
            lengths=np.array([t.core.length for t in tubes]),
            thin_count=tubes[0].thin_count,
            **kw,
        )

    @classmethod
    def empty(cls, dim: int, width: float) -> "TubeFamily":
        return cls(np.empty((0, dim)), np.empty((0, dim, dim)), width)

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @cached_property
    def half_extents(self) -> np.ndarray:
        h = np.full((len(self), self.dim), 0.5)
        h[:, 0] = 0.5 * self.lengths
        h[:, 1 : 1 + self.thin_count] = 0.5 * self.width
        return h

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.prod(2.0 * self.half_extents, axis=1)

    @cached_property
    def tubes(self) -> tuple[Tube, ...]:
        return tuple(
            Tube(Segment(c, Direction(f[0]), float(L)), self.width, f[1:], self.thin_count)
            for c, f, L in zip(self.centers, self.frames, self.lengths)
        )

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        reach = np.einsum("tji,tj->ti", np.abs(self.frames), self.half_extents)
        return (self.centers - reach).min(axis=0), (self.centers + reach).max(axis=0)

    def contains(self, points, tube_ids, tol: float = BOUNDARY_TOL) -> np.ndarray:
        """Membership of ``points[k]`` in tube ``tube_ids[k]`` (paired)."""
        rel = points - self.centers[tube_ids]
        local = np.einsum("pij,pj->pi", self.frames[tube_ids], rel)
        return np.all(np.abs(local) <= self.half_extents[tube_ids] + tol, axis=1)

    def subset(self, idx) -> "TubeFamily":
        idx = np.asarray(idx)
        return TubeFamily(
            self.centers[idx],
            self.frames[idx],
            self.width,
            self.lengths[idx],
            self.thin_count,
            None if self.angles is None else self.angles[idx],
            None,
            None if self.labels is None else self.labels[idx],
        )

    def scaled(self, factor: float) -> "TubeFamily":
        """The family with every coordinate multiplied by ``factor``."""
        if self.thin_count < self.dim - 1:
            raise DimensionError("scaling is only defined for families without unit long axes")
        return TubeFamily(self.centers * factor, self.frames, self.width * factor, self.lengths * factor, self.thin_count)

    def polygons_2d(self) -> np.ndarray:
        """Counterclockwise corner arrays of shape (T, 4, 2)."""
        if self.dim != 2:
            raise DimensionError("polygons_2d needs a planar family")
        d = self.frames[:, 0, :] * (0.5 * self.lengths)[:, None]
        nu = self.frames[:, 1, :] * (0.5 * self.width)
        flip = d[:, 0] * nu[:, 1] - d[:, 1] * nu[:, 0] < 0
        nu = np.where(flip[:, None], -nu, nu)
        c = self.centers
        return np.stack([c - d - nu, c + d - nu, c + d + nu, c - d + nu], axis=1)


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    stderr: float
    method: str
    samples: int = 0
    lower: Optional[float] = None
    upper: Optional[float] = None


# exact planar engine ------------------------------------------------------

def _boundary_union_area(polys: np.ndarray, edge_chunk: int = 256) -> float:
    k, m, _ = polys.shape
    nxt = np.roll(polys, -1, axis=1)
    ev = nxt - polys
    elen = np.linalg.norm(ev, axis=2)
    nrm = np.stack([ev[..., 1], -ev[..., 0]], axis=-1) / elen[..., None]
    off = np.einsum("kmi,kmi->km", nrm, polys)
    scale = max(1.0, float(np.max(np.abs(polys))))
    tol = 1e-12 * scale

    starts = polys.reshape(-1, 2)
    vecs = ev.reshape(-1, 2)
    lens = elen.reshape(-1)
    enrm = nrm.reshape(-1, 2)
    owner = np.repeat(np.arange(k), m)
    total = 0.0
    for lo_e in range(0, k * m, edge_chunk):
        sl = slice(lo_e, min(k * m, lo_e + edge_chunk))
        p, d, ln, en, own = starts[sl], vecs[sl], lens[sl], enrm[sl], owner[sl]
        a = np.einsum("ei,kmi->ekm", p, nrm) - off[None]
        b = np.einsum("ei,kmi->ekm", d, nrm)
        parallel = np.abs(b) <= 1e-12 * ln[:, None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(parallel, 0.0, -a / np.where(parallel, 1.0, b))
        lo = np.max(np.where(~parallel & (b < 0), t, 0.0), axis=2)
        hi = np.min(np.where(~parallel & (b > 0), t, 1.0), axis=2)
        lo = np.maximum(lo, 0.0)
        hi = np.minimum(hi, 1.0)
        # parallel constraints: strictly outside empties, on-line uses index rule
        outside = parallel & (a > tol)
        on_line = parallel & (np.abs(a) <= tol)
        same_dir = np.einsum("ei,kmi->ekm", en, nrm) > 0
        lower_index = np.arange(k)[None, :, None] < own[:, None, None]
        blocked = outside | (on_line & same_dir & ~lower_index)
        empty = np.any(blocked, axis=2) | (hi <= lo)
        empty[np.arange(len(own)), own] = True
        lo = np.where(empty, 0.0, lo)
        hi = np.where(empty, 0.0, hi)
        order = np.argsort(lo, axis=1)
        lo = np.take_along_axis(lo, order, axis=1)
        hi = np.take_along_axis(hi, order, axis=1)
        reach = np.maximum.accumulate(hi, axis=1)
        prev = np.concatenate([np.zeros((len(own), 1)), reach[:, :-1]], axis=1)
        s = np.maximum(lo, prev)
        e = np.maximum(hi, prev)
        covered = np.sum(e - s, axis=1)
        covered_t = 0.5 * np.sum(e * e - s * s, axis=1)
        free = 1.0 - covered
        free_t = 0.5 - covered_t
        total += float(np.sum(d[:, 1] * (p[:, 0] * free + d[:, 0] * free_t)))
    return total


def raster_bracket_2d(f: TubeFamily, cell: float) -> tuple[float, float]:
    """Certified (lower, upper) bounds on the union area from a square grid.

    Lower counts cells lying entirely in a single tube; upper counts cells
    meeting any tube (separating-axis test).
    """
    if f.dim != 2:
        raise DimensionError("raster_bracket_2d needs a planar family")
    if len(f) == 0:
        return 0.0, 0.0
    lo, hi = f.aabb()
    origin = lo - cell
    shape = np.ceil((hi - origin) / cell).astype(int) + 2
    inner = np.zeros(shape, dtype=bool)
    touch = np.zeros(shape, dtype=bool)
    reach = np.einsum("tji,tj->ti", np.abs(f.frames), f.half_extents)
    for i in range(len(f)):
        c, fr, h = f.centers[i], f.frames[i], f.half_extents[i]
        i0 = np.floor((c - reach[i] - origin) / cell).astype(int)
        i1 = np.floor((c + reach[i] - origin) / cell).astype(int) + 1
        xs = origin[0] + cell * np.arange(i0[0], i1[0] + 1)
        ys = origin[1] + cell * np.arange(i0[1], i1[1] + 1)
        # corners relative to the tube, in the tube frame
        gx = (xs - c[0])[:, None, None] * fr[None, None, :, 0]
        gy = (ys - c[1])[None, :, None] * fr[None, None, :, 1]
        corner_in = np.all(np.abs(gx + gy) <= h, axis=2)
        full = corner_in[:-1, :-1] & corner_in[1:, :-1] & corner_in[:-1, 1:] & corner_in[1:, 1:]
        # separating axes: cell axes are covered by the bounding box slice
        cx = xs[:-1] + 0.5 * cell - c[0]
        cy = ys[:-1] + 0.5 * cell - c[1]
        proj = cx[:, None, None] * fr[None, None, :, 0] + cy[None, :, None] * fr[None, None, :, 1]
        rad = 0.5 * cell * (np.abs(fr[:, 0]) + np.abs(fr[:, 1]))
        meets = np.all(np.abs(proj) <= h + rad, axis=2)
        inner[i0[0] : i1[0], i0[1] : i1[1]] |= full
        touch[i0[0] : i1[0], i0[1] : i1[1]] |= meets
    area = cell * cell
    return float(inner.sum()) * area, float(touch.sum()) * area


def exact_union_area_2d(
    f: TubeFamily,
    method: str = "boundary",
    cap: int = DEFAULT_CAP,
    raster_tol: float = RASTER_TOL,
    max_raster_cells: int = 1 << 24,
) -> MeasureEstimate:
    """Lebesgue measure of the union of a planar tube family.

    ``method="boundary"`` is exact up to floating point (stderr 0).
    ``method="raster"`` refines a certified bracket until its relative width
    is below ``raster_tol`` or the grid budget is exhausted; stderr is the
    bracket half-width.
    """
    if f.dim != 2:
        raise DimensionError(f"exact_union_area_2d needs a planar family, got dimension {f.dim}")
    if len(f) > cap:
        raise CapacityError(f"{len(f)} tubes exceed the exact-engine cap of {cap}")
    if len(f) == 0:
        return MeasureEstimate(0.0, 0.0, "exact2d")
    if method == "boundary":
        return MeasureEstimate(_boundary_union_area(f.polygons_2d()), 0.0, "exact2d")
    if method != "raster":
        raise ArgumentError(f"unknown exact engine {method!r}")
    lo, hi = f.aabb()
    cell = 0.25 * f.width
    while True:
        lower, upper = raster_bracket_2d(f, cell)
        width = upper - lower
        cells = np.prod(np.ceil((hi - lo) / cell) + 3)
        if width <= raster_tol * upper or cells * 4 > max_raster_cells:
            mid = 0.5 * (lower + upper)
            return MeasureEstimate(mid, 0.5 * width, "raster2d", lower=lower, upper=upper)
        cell *= 0.5


# Monte Carlo engine -------------------------------------------------------

def _grid_resolution(dim: int) -> int:
    return {2: 256, 3: 48}.get(dim, 12)


@dataclass
class TubeIndex:
    """Uniform grid over a box mapping each cell to the tubes that may meet it."""

    family: TubeFamily
    lo: np.ndarray
    hi: np.ndarray
    cell: float = 0.0
    shape: np.ndarray = field(default=None, repr=False)
    indptr: np.ndarray = field(default=None, repr=False)
    tube_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        f = self.family
        n = f.dim
        extent = float(np.max(self.hi - self.lo))
        thin = 0.5 * f.width * math.sqrt(f.thin_count)
        cell = max(extent / _grid_resolution(n), 2.0 * thin, 1e-12)
        self.cell = cell
        self.shape = np.maximum(1, np.ceil((self.hi - self.lo) / cell).astype(np.int64))
        step = cell / 4.0
        long_dims = n - f.thin_count
        reach = 0.5 * step * math.sqrt(long_dims) + thin
        dil = int(math.ceil(reach / cell))
        offsets = np.stack(
            np.meshgrid(*[np.arange(-dil, dil + 1)] * n, indexing="ij"), axis=-1
        ).reshape(-1, n)
        strides = np.cumprod(np.concatenate([[1], self.shape[::-1][:-1]]))[::-1]
        pairs = []
        for t in range(len(f)):
            fr, h, c = f.frames[t], f.half_extents[t], f.centers[t]
            axes = [0] + list(range(1 + f.thin_count, n))
            grids = [np.linspace(-h[a], h[a], max(2, int(math.ceil(2 * h[a] / step)) + 1)) for a in axes]
            mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, len(axes))
            pts = c + mesh @ fr[axes]
            idx = np.floor((pts - self.lo) / cell).astype(np.int64)
            idx = np.unique(idx, axis=0)
            idx = (idx[:, None, :] + offsets[None, :, :]).reshape(-1, n)
            ok = np.all((idx >= 0) & (idx < self.shape), axis=1)
            flat = np.unique(idx[ok] @ strides)
            pairs.append(np.stack([flat, np.full(len(flat), t)], axis=1))
        pairs = np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = pairs[order]
        ncell = int(np.prod(self.shape))
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(pairs[:, 0], minlength=ncell))])
        self.tube_ids = pairs[:, 1].astype(np.int64)
        self._strides = strides

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        idx = np.floor((points - self.lo) / self.cell).astype(np.int64)
        idx = np.clip(idx, 0, self.shape - 1)
        return idx @ self._strides

    def hits(self, points: np.ndarray, max_pairs: int = 1 << 22) -> np.ndarray:
        """Boolean mask: which points lie in the union."""
        out = np.zeros(len(points), dtype=bool)
        cid = self.cell_of(points)
        cnt = self.indptr[cid + 1] - self.indptr[cid]
        start = 0
        while start < len(points):
            # grow the block until it holds max_pairs candidate pairs
            csum = np.cumsum(cnt[start:])
            stop = start + max(1, int(np.searchsorted(csum, max_pairs, side="right")))
            blk = slice(start, stop)
            c = cnt[blk]
            total = int(c.sum())
            if total:
                rep = np.repeat(np.arange(start, stop), c)
                first = np.repeat(self.indptr[cid[blk]] - (np.cumsum(c) - c), c)
                tid = self.tube_ids[first + np.arange(total)]
                inside = self.family.contains(points[rep], tid)
                out[rep[inside]] = True
            start = stop
        return out


def sample_box(lo, hi, samples: int, seed: int) -> np.ndarray:
    """All Monte Carlo points for (box, samples, seed), chunked as the estimator draws them."""
    gens = chunk_generators(seed, samples, MC_CHUNK)
    lo, hi = np.asarray(lo), np.asarray(hi)
    parts = [lo + (hi - lo) * g.random((k, len(lo))) for g, k in gens]
    return np.concatenate(parts) if parts else np.empty((0, len(lo)))


def monte_carlo_union_volume(
    f: TubeFamily,
    samples: int,
    seed: int,
    threads: int = 1,
    box: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> MeasureEstimate:
    """Hit-or-miss estimate of the union volume in the family's padded bounding box.

    Points are drawn in fixed-size chunks, each with its own generator
    spawned from ``seed``, so the estimate does not depend on ``threads``.
    """
    if samples < 10_000:
        raise ArgumentError("monte_carlo_union_volume needs at least 1e4 samples")
    if len(f) == 0:
        return MeasureEstimate(0.0, 0.0, "montecarlo", samples)
    if box is None:
        lo, hi = f.aabb()
        lo, hi = lo - f.width, hi + f.width
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    volume = float(np.prod(hi - lo))
    index = TubeIndex(f, lo, hi)

    def run(job):
        gen, k = job
        pts = lo + (hi - lo) * gen.random((k, len(lo)))
        return int(np.count_nonzero(index.hits(pts)))

    jobs = chunk_generators(seed, samples, MC_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(run, jobs))
    else:
        counts = [run(j) for j in jobs]
    hits = sum(counts)
    p = hits / samples
    return MeasureEstimate(p * volume, math.sqrt(p * (1.0 - p) / samples) * volume, "montecarlo", samples)


# Bonferroni ---------------------------------------------------------------

def slab_pair_bound(f: TubeFamily, i: int, j: int) -> float:
    """Upper bound on |T_i cap T_j| from the two thin slabs containing the tubes.

    The cross-section in the plane of the two thin normals lies in a
    parallelogram of area w^2/sin d; along the remaining directions the
    intersection is confined to the projection of the smaller tube.
    """
    if f.thin_count != 1:
        raise ArgumentError("slab bound needs one thin axis per tube")
    cap = float(min(f.volumes[i], f.volumes[j]))
    ni, nj = f.frames[i, 1], f.frames[j, 1]
    d = math.acos(min(1.0, max(-1.0, float(ni @ nj))))
    if d <= PARALLEL_CUTOFF or d >= math.pi - PARALLEL_CUTOFF:
        return cap
    area = f.width * f.width / math.sin(d)
    comp = orthonormal_complement(np.vstack([ni, nj]), f.dim)
    factor = 1.0
    if len(comp):
        factors = []
        for t in (i, j):
            widths = 2.0 * np.abs(comp @ f.frames[t].T) @ f.half_extents[t]
            factors.append(float(np.prod(widths)))
        factor = min(factors)
    return min(area * factor, cap)


def bonferroni_lower_bound(f: TubeFamily, pairs: str = "auto") -> float:
    """sum |T_i| - sum_{i<j} (upper bound on |T_i cap T_j|), clamped at 0.

    ``pairs`` selects the overlap bound: ``"linear"`` uses the linearized fan
    bound indexed by |i-j| (needs a schedule), ``"exact"`` clips tube pairs
    exactly (planar only), ``"slab"`` uses :func:`slab_pair_bound`.
    ``"auto"`` is ``"linear"`` when a schedule is present, else ``"slab"``.
    """
    k = len(f)
    if k == 0:
        return 0.0
    total = float(np.sum(f.volumes))
    if k == 1:
        return total
    if pairs == "auto":
        pairs = "linear" if f.schedule is not None else "slab"
    if pairs == "linear":
        if f.schedule is None:
            raise ArgumentError("linearized pair bounds need a scheduled family")
        s = f.schedule
        area = float(np.min(f.volumes))
        overlap = sum(
            (k - g) * fan_pair_overlap_bound(0, g, s.eps, s.alpha, area) for g in range(1, k)
        )
    elif pairs == "exact":
        tubes = f.tubes
        overlap = sum(
            tube_pair_intersection_area_2d(tubes[i], tubes[j]) for i in range(k) for j in range(i + 1, k)
        )
    elif pairs == "slab":
        overlap = sum(slab_pair_bound(f, i, j) for i in range(k) for j in range(i + 1, k))
    else:
        raise ArgumentError(f"unknown pair bound {pairs!r}")
    return max(0.0, total - overlap)


def loglog_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y): (slope, intercept, r^2)."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if len(lx) < 2:
        raise ArgumentError("a log-log fit needs at least two points")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(slope), float(intercept), r2
