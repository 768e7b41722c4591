"""Box-counting dimension of point sets and segment unions.

Cells are half-open ``[k d, (k+1) d)^n`` anchored at the origin.  Segments
are walked exactly: every crossing of a grid plane splits a segment into
pieces, each piece lies in one cell, and the crossing points and endpoints
contribute their own cells.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ArgumentError
from .geometry import Segment

SNAP = 1e-9
WALK_BUDGET = 1 << 20


@dataclass(frozen=True)
class SegmentSet:
    starts: np.ndarray
    ends: np.ndarray

    @classmethod
    def of(cls, segments: Sequence[Segment]) -> "SegmentSet":
        ends = [s.endpoints for s in segments]
        return cls(np.array([e[0] for e in ends]), np.array([e[1] for e in ends]))

    def __len__(self) -> int:
        return len(self.starts)


Collection = Union[np.ndarray, SegmentSet, Sequence[Segment]]


def _snap_floor(x: np.ndarray) -> np.ndarray:
    r = np.round(x)
    x = np.where(np.abs(x - r) <= SNAP, r, x)
    return np.floor(x).astype(np.int64)


def _segment_cells(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer cells (unit grid) met by segments a[i]-b[i]."""
    m, n = a.shape
    d = b - a
    ts, segs, axes, planes = [], [], [], []
    for k in range(n):
        lo = np.minimum(a[:, k], b[:, k])
        hi = np.maximum(a[:, k], b[:, k])
        first = np.floor(lo + SNAP).astype(np.int64) + 1
        last = np.ceil(hi - SNAP).astype(np.int64) - 1
        cnt = np.maximum(0, last - first + 1)
        if not cnt.sum():
            continue
        seg = np.repeat(np.arange(m), cnt)
        g = np.repeat(first, cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        ts.append((g - a[seg, k]) / d[seg, k])
        segs.append(seg)
        axes.append(np.full(len(seg), k))
        planes.append(g)
    if ts:
        t = np.concatenate(ts)
        seg = np.concatenate(segs)
        ax = np.concatenate(axes)
        pl = np.concatenate(planes)
    else:
        t = np.empty(0)
        seg = ax = pl = np.empty(0, dtype=np.int64)

    # crossing points, with the crossed coordinate pinned to its plane
    cross = a[seg] + t[:, None] * d[seg]
    cross[np.arange(len(seg)), ax] = pl
    cells = [_snap_floor(a), _snap_floor(b), _snap_floor(cross)]

    # one midpoint per piece between consecutive breakpoints
    all_t = np.concatenate([np.zeros(m), np.ones(m), t])
    all_s = np.concatenate([np.arange(m), np.arange(m), seg])
    order = np.lexsort((all_t, all_s))
    all_t, all_s = all_t[order], all_s[order]
    same = all_s[1:] == all_s[:-1]
    mid_t = 0.5 * (all_t[1:] + all_t[:-1])[same]
    mid_s = all_s[1:][same]
    cells.append(_snap_floor(a[mid_s] + mid_t[:, None] * d[mid_s]))
    return np.concatenate(cells)


def _unique_rows(cells: np.ndarray) -> np.ndarray:
    """np.unique(cells, axis=0), via scalar keys when the index range fits in int64."""
    if len(cells) == 0:
        return cells
    lo = cells.min(axis=0)
    span = cells.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) >= 2.0**62:
        return np.unique(cells, axis=0)
    strides = np.cumprod(np.concatenate([[1], span[::-1][:-1]]))[::-1]
    keys = np.unique((cells - lo) @ strides)
    out = np.empty((len(keys), cells.shape[1]), dtype=np.int64)
    for j, st in enumerate(strides):
        out[:, j], keys = np.divmod(keys, st)
    return out + lo


def occupied_cells(collection: Collection, delta: float) -> np.ndarray:
    """Unique integer indices of the delta-grid cells meeting the collection."""
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    if isinstance(collection, SegmentSet):
        segs = collection
    elif isinstance(collection, np.ndarray) or (len(collection) and not isinstance(collection[0], Segment)):
        pts = np.atleast_2d(np.asarray(collection, dtype=float))
        if pts.size == 0:
            raise ArgumentError("box_count needs a nonempty collection")
        return _unique_rows(_snap_floor(pts / delta))
    else:
        if not len(collection):
            raise ArgumentError("box_count needs a nonempty collection")
        segs = SegmentSet.of(collection)
    if len(segs) == 0:
        raise ArgumentError("box_count needs a nonempty collection")
    a, b = segs.starts / delta, segs.ends / delta
    # bound the crossing arrays of each block by roughly WALK_BUDGET entries
    crossings = np.sum(np.abs(b - a), axis=1) + a.shape[1] + 2
    block = np.searchsorted(np.cumsum(crossings), WALK_BUDGET * np.arange(1, 1 + int(crossings.sum() // WALK_BUDGET) + 1))
    bounds = np.unique(np.concatenate([[0], np.minimum(block, len(a)), [len(a)]]))
    parts = [_unique_rows(_segment_cells(a[i:j], b[i:j])) for i, j in zip(bounds[:-1], bounds[1:]) if j > i]
    return parts[0] if len(parts) == 1 else _unique_rows(np.concatenate(parts))


def box_count(collection: Collection, delta: float) -> int:
    """N(delta): number of half-open delta-cells meeting the set."""
    return int(len(occupied_cells(collection, delta)))


def lattice_count(contains, lo, hi, delta: float, chunk: int = 1 << 20) -> int:
    """Number of points of the delta-lattice (cell centers) inside a region.

    The points are delta-separated and lie in the region, so this is a
    packing count; it has the same growth exponent as the cell count for
    any set, and for solid regions avoids the boundary layer of cells that
    biases coarse-scale fits.  ``contains`` maps (m, n) points to booleans.
    """
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    k_lo = np.floor(lo / delta).astype(np.int64)
    k_hi = np.floor(hi / delta).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(k_lo, k_hi)]
    shape = [len(a) for a in axes]
    total = int(np.prod(shape))
    count = 0
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        idx = np.stack(np.unravel_index(flat, shape), axis=1)
        pts = (np.stack([axes[j][idx[:, j]] for j in range(len(axes))], axis=1) + 0.5) * delta
        count += int(np.count_nonzero(contains(pts)))
    return count


@dataclass(frozen=True)
class BoxCountSeries:
    deltas: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float)
        c = np.asarray(self.counts, dtype=np.int64)
        if d.shape != c.shape:
            raise ArgumentError("deltas and counts differ in length")
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "counts", c)

    def __len__(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class DimensionFit:
    slope: float
    intercept: float
    r_squared: float
    delta_range: tuple[float, float]


def dyadic_deltas(k_min: int, k_max: int) -> np.ndarray:
    """2^-k_min, ..., 2^-k_max (decreasing)."""
    return 2.0 ** -np.arange(k_min, k_max + 1)


def box_count_series(collection: Collection, deltas: Sequence[float], threads: int = 1) -> BoxCountSeries:
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]
    if isinstance(collection, (list, tuple)) and collection and isinstance(collection[0], Segment):
        collection = SegmentSet.of(collection)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(lambda d: box_count(collection, d), deltas))
    else:
        counts = [box_count(collection, d) for d in deltas]
    return BoxCountSeries(deltas, np.array(counts))


def dimension_fit(series: BoxCountSeries, skip_coarsest: int = 2) -> DimensionFit:
    """Least-squares slope of log N(delta) against log(1/delta).

    The ``skip_coarsest`` largest deltas are dropped, as far as that leaves
    at least four scales.
    """
    if len(series) < 4:
        raise ArgumentError(f"dimension_fit needs at least 4 scales, got {len(series)}")
    order = np.argsort(series.deltas)[::-1]
    d = series.deltas[order]
    n = series.counts[order].astype(float)
    skip = max(0, min(skip_coarsest, len(d) - 4))
    d, n = d[skip:], n[skip:]
    x, y = np.log(1.0 / d), np.log(n)
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - slope * x - intercept) ** 2))
    r2 = 1.0 if ss_tot <= 1e-24 else max(0.0, 1.0 - ss_res / ss_tot)
    if abs(slope) < 1e-12:
        slope = 0.0
    return DimensionFit(float(slope), float(intercept), r2, (float(d.min()), float(d.max())))


# calibration corpora -----------------------------------------------------------

def point_corpus(n: int = 2) -> np.ndarray:
    return np.full((1, n), 1.0 / 3.0)


def segment_corpus(angle: float = 0.3, n: int = 2) -> SegmentSet:
    d = np.zeros(n)
    d[0], d[1] = math.cos(angle), math.sin(angle)
    start = np.full(n, 0.1)
    return SegmentSet(start[None], (start + d)[None])


def square_corpus(spacing_exp: int = 12) -> SegmentSet:
    """[0,1)^2 filled by horizontal segments 2^-spacing_exp apart.

    Every cell of side >= 2^-(spacing_exp-1) meets the set, so N(2^-k) = 4^k.
    """
    h = 2.0**-spacing_exp
    y = (np.arange(2**spacing_exp) + 0.5) * h
    return SegmentSet(np.stack([np.full_like(y, 0.5 * h), y], 1), np.stack([np.full_like(y, 1 - 0.5 * h), y], 1))


def cantor_dust(levels: int = 7) -> np.ndarray:
    """Centers of the level-``levels`` squares of the 4-piece, ratio-1/4 Cantor dust (dimension 1)."""
    digits = np.array([0.0, 0.75])
    pts = np.zeros((1, 2))
    scale = 1.0
    for _ in range(levels):
        offs = np.array([[x, y] for x in digits for y in digits]) * scale
        pts = (pts[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        scale *= 0.25
    return pts + 0.5 * scale
