"""Lower-bound certificates over an eps grid: planar fans, slab fans, 3-books."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .box_dimension import DimensionFit, SegmentSet, box_count_series, dimension_fit
from .constructions import PlacementSpec, build_book, build_fan, build_slab_fan
from .errors import ArgumentError
from .intersection import fan_pair_overlap_bound
from .rng import child_seed_ints
from .union_measure import (
    MeasureEstimate,
    bonferroni_lower_bound,
    exact_union_area_2d,
    loglog_fit,
    monte_carlo_union_volume,
)

SIGMA = 3.0
EXACT_TOL = 1e-9


@dataclass(frozen=True)
class CertificateReport:
    alpha: float
    c: float
    eps_grid: tuple
    tube_counts: tuple
    measured: tuple  # MeasureEstimate per grid point
    bonferroni_lower: tuple
    fitted_exponent: float
    fitted_intercept: float
    r_squared: float
    fitted_constant_A: float
    slack: float
    fit_mask: tuple
    verdict: bool

    def rows(self):
        for eps, m, b, k in zip(self.eps_grid, self.measured, self.bonferroni_lower, self.tube_counts):
            yield {"eps": eps, "measured": m.value, "bound": b, "stderr": m.stderr, "tubes": k}


def _check_grid(eps_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(eps_grid, dtype=float)
    if len(grid) < 2:
        raise ArgumentError("the eps grid needs at least two points")
    if np.any(np.diff(grid) >= 0):
        raise ArgumentError("the eps grid must be strictly decreasing")
    log2 = np.log2(grid)
    if not np.allclose(log2, np.round(log2), atol=1e-12):
        raise ArgumentError("the eps grid must be dyadic")
    return grid


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def lemma_L1_certificate(
    alpha: float,
    c: float,
    placement: PlacementSpec,
    eps_grid: Sequence[float],
    engine: str = "boundary",
    slack: float = 0.1,
    pairs: str = "linear",
    threads: int = 1,
) -> CertificateReport:
    """Planar fan certificate: measured union vs Bonferroni bound, and the
    log-log exponent of the union area in eps.

    Grid points with a single tube are measured but excluded from the fit.
    """
    grid = _check_grid(eps_grid)

    def point(eps):
        fam = build_fan(alpha, c, float(eps), placement)
        return len(fam), exact_union_area_2d(fam, method=engine), bonferroni_lower_bound(fam, pairs)

    results = _map(point, grid, threads)
    counts = [r[0] for r in results]
    measured = [r[1] for r in results]
    lower = [r[2] for r in results]
    mask = np.array(counts) > 1
    values = np.array([m.value for m in measured])
    if mask.sum() >= 2:
        slope, intercept, r2 = loglog_fit(grid[mask], values[mask])
    else:
        slope, intercept, r2 = float("nan"), float("nan"), float("nan")
    A = float(np.min(values / grid ** (1.0 - alpha)))
    bounds_ok = all(m.value >= b - SIGMA * m.stderr - EXACT_TOL for m, b in zip(measured, lower))
    verdict = bool(bounds_ok and slope <= (1.0 - alpha) + slack)
    return CertificateReport(
        alpha, c, tuple(grid.tolist()), tuple(counts), tuple(measured), tuple(lower),
        slope, intercept, r2, A, slack, tuple(mask.tolist()), verdict,
    )


@dataclass(frozen=True)
class SlabCertificate:
    n: int
    eps_grid: tuple
    measured: tuple
    bonferroni_lower: tuple
    single_volume: tuple  # analytic volume of one slab piece
    verdict: bool

    def rows(self):
        for eps, m, b in zip(self.eps_grid, self.measured, self.bonferroni_lower):
            yield {"eps": eps, "measured": m.value, "bound": b, "stderr": m.stderr}


def slab_certificate(
    n: int,
    alpha: float,
    c: float,
    placement: PlacementSpec,
    eps_grid: Sequence[float],
    samples: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> SlabCertificate:
    """Slab fans in R^n: Monte Carlo union volume against the slab-formula Bonferroni bound."""
    grid = _check_grid(eps_grid)
    seeds = child_seed_ints(seed, len(grid))
    measured, lower = [], []
    for eps, s in zip(grid, seeds):
        fam = build_slab_fan(n, alpha, c, float(eps), placement)
        measured.append(monte_carlo_union_volume(fam, samples, s, threads))
        lower.append(bonferroni_lower_bound(fam, "slab"))
    verdict = all(m.value >= b - SIGMA * m.stderr for m, b in zip(measured, lower))
    return SlabCertificate(n, tuple(grid.tolist()), tuple(measured), tuple(lower), tuple(grid.tolist()), verdict)


@dataclass(frozen=True)
class BookBoundReport:
    alpha: float
    beta: float
    eps_grid: tuple
    pages: tuple
    tubes: tuple
    page_sum: tuple  # sum over pages of |union of in-page boxes| (exact)
    cross_overlap: tuple  # sum over page pairs of the overlap bound
    bonferroni_lower: tuple
    lower_curve: tuple
    measured: tuple
    C1: float
    C2: float
    verdict: bool
    skeleton_fit: Optional[DimensionFit] = None
    skeleton_counts: tuple = ()
    skeleton_deltas: tuple = ()
    notes: tuple = field(default=())

    def rows(self):
        for i, eps in enumerate(self.eps_grid):
            m = self.measured[i]
            yield {
                "eps": eps, "measured": m.value, "bound": self.lower_curve[i], "stderr": m.stderr,
                "bonferroni": self.bonferroni_lower[i], "pages": self.pages[i], "tubes": self.tubes[i],
            }


def book_bound_certificate(
    alpha: float,
    eps_grid: Sequence[float],
    beta: Optional[float] = None,
    placement: str = "through_origin",
    samples: int = 10_000_000,
    seed: int = 0,
    leaf_c: float = math.pi,
    page_span: float = math.pi,
    bound_C: float = 2.0,
    skeleton: bool = True,
    threads: int = 1,
) -> BookBoundReport:
    """Two-term lower curve C1 eps^(2-alpha-beta) - C2 eps^(2-2beta) log(1/eps) for 3-books.

    Pages sit at angle steps eps^beta; each page holds a planar fan with
    step eps^alpha, thickened to eps-boxes.  Per grid point:

    * the exact in-page unions (planar engine x thickness eps) give sum |P_i|;
    * page pairs at angle d overlap in at most (eps^2/sin d) times the
      book diameter, linearized with constant pi/2 while d <= pi/2;
    * C1 = min over the grid of sum |P_i| / eps^(2-alpha-beta) and
      C2 = max over the grid of overlap sum / (eps^(2-2beta) log(1/eps)),
      so the curve sits below the Bonferroni bound at every grid point.

    The Monte Carlo volume of the whole box family is the measured value.
    """
    grid = _check_grid(eps_grid)
    beta = alpha * alpha if beta is None else beta
    seeds = child_seed_ints(seed, 2 * len(grid))
    diameter = 2.0 * bound_C
    pages, tubes, page_sum, overlap, bonf, measured, books = [], [], [], [], [], [], []
    for k, eps in enumerate(grid):
        eps = float(eps)
        book = build_book(3, eps**beta, (alpha, leaf_c, eps), seeds[2 * k], placement, bound_C, page_span)
        areas = np.array([exact_union_area_2d(leaf.book.fan).value * eps for leaf in book.leaves])
        p = len(areas)
        cap = float(np.min(areas)) if p else 0.0
        cross = sum(
            (p - g) * min(cap, diameter * fan_pair_overlap_bound(0, g, eps, beta, math.inf))
            for g in range(1, p)
        )
        fam = book.tubes(eps)
        measured.append(monte_carlo_union_volume(fam, samples, seeds[2 * k + 1], threads))
        pages.append(p)
        tubes.append(len(fam))
        page_sum.append(float(areas.sum()))
        overlap.append(float(cross))
        bonf.append(max(0.0, float(areas.sum()) - cross))
        books.append(book)

    e1 = grid ** (2.0 - alpha - beta)
    e2 = grid ** (2.0 - 2.0 * beta) * np.log(1.0 / grid)
    C1 = float(np.min(np.array(page_sum) / e1))
    C2 = float(np.max(np.array(overlap) / e2))
    curve = C1 * e1 - C2 * e2
    verdict = all(m.value >= b - SIGMA * m.stderr for m, b in zip(measured, curve))

    fit, counts, deltas = None, (), ()
    if skeleton:
        # skeleton of the finest book, counted at the grid scales (delta >= eps)
        starts, ends = books[-1].segments()
        series = box_count_series(SegmentSet(starts, ends), grid, threads)
        fit = dimension_fit(series, skip_coarsest=0)
        counts, deltas = tuple(series.counts.tolist()), tuple(series.deltas.tolist())
    notes = (
        "in-page angular step eps^alpha, page step eps^beta",
        "cross-page pair bound uses |i1 - i2|",
        "box neighbourhoods stand in for round eps-neighbourhoods",
    )
    return BookBoundReport(
        alpha, beta, tuple(grid.tolist()), tuple(pages), tuple(tubes), tuple(page_sum), tuple(overlap),
        tuple(bonf), tuple(curve.tolist()), tuple(measured), C1, C2, verdict, fit, counts, deltas, notes,
    )
