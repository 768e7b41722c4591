"""``kakeya`` command line: run experiment configs, write reports, tables and
figures, and replay a report's embedded config."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import config as cfg
from .box_dimension import (
    BoxCountSeries,
    box_count_series,
    cantor_dust,
    dimension_fit,
    lattice_count,
    point_corpus,
    segment_corpus,
    square_corpus,
)
from .certificates import SIGMA, book_bound_certificate, lemma_L1_certificate
from .constructions import PlacementSpec, adversarial_search, build_book, build_fan, build_slab_fan
from .errors import ConfigError, FormatError, InconclusiveError, KakeyaError
from .geometry import Direction, PageFamily, Segment, basis_vector, principal_angles
from .lift_project import (
    DirectionSet,
    centered_family,
    default_hyperplane,
    gamma0,
    h_tilde_perp,
    lift_family,
    line_origin_distance,
    perturb_gamma,
    project_family,
    restrict_directions,
    spaghetti_check,
    tilde_h_anchor,
    tilde_h_residual,
)
from .rng import child_seed_ints
from .union_measure import bonferroni_lower_bound, exact_union_area_2d, monte_carlo_union_volume

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
DEFAULT_EXPECTED = {"point": 0.0, "segment": 1.0, "square": 2.0, "cantor": 1.0}


@dataclass
class Table:
    name: str
    header: list
    rows: list = field(default_factory=list)


@dataclass
class Outcome:
    verdict: bool
    summary: dict
    tables: list
    figures: list = field(default_factory=list)  # (filename, callable(path))


def fmt(x) -> str:
    """CSV cell: 17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def table_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(t.header)
    for row in t.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def table_json(t: Table) -> str:
    rows = [dict(zip(t.header, _jsonable(list(r)))) for r in t.rows]
    return json.dumps({"table": t.name, "rows": rows}, indent=1) + "\n"


def _placement(p: dict) -> PlacementSpec:
    centers = tuple(map(tuple, p["centers"])) if p["centers"] else None
    return PlacementSpec(p["kind"], p["radius"], p["seed"], centers, p["iterations"])


def _map(fn, items, threads):
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# command handlers ------------------------------------------------------------------

def _fan(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    n, grid = p["n"], p["eps_grid"]
    placement = _placement(p["placement"])
    seeds = child_seed_ints(c.seed, len(grid))
    pages = PageFamily.standard(n, p["page_phase"]) if n > 2 else None

    def point(k):
        eps = grid[k]
        if n == 2:
            fam = build_fan(p["alpha"], p["c"], eps, placement)
            m = exact_union_area_2d(fam, p["engine"], p["cap"], p["raster_tol"])
        else:
            fam = build_slab_fan(n, p["alpha"], p["c"], eps, placement, pages)
            m = monte_carlo_union_volume(fam, c.samples, seeds[k], c.threads)
        return fam, m, bonferroni_lower_bound(fam, p["pairs"])

    results = _map(point, range(len(grid)), c.threads if n == 2 else 1)
    t = Table("data", ["eps", "measured", "bound", "stderr", "tubes"])
    ok = True
    for eps, (fam, m, b) in zip(grid, results):
        t.rows.append([eps, m.value, b, m.stderr, len(fam)])
        ok &= m.value >= b - SIGMA * m.stderr - 1e-9
    figs = [("measure.png", lambda path: _plot_measure(t, path, "union measure vs Bonferroni bound"))]
    if n == 2 and len(results[-1][0]) <= 5000:
        polys = results[-1][0].polygons_2d()
        figs.append(("fan.png", lambda path: _plots().fan(polys, path, f"fan, eps={grid[-1]:g}")))
    return Outcome(ok, {"dimension": n, "grid_points": len(grid)}, [t], figs)


def _book(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    n, grid = p["n"], p["eps_grid"]
    beta = p["beta"] if p["beta"] is not None else p["alpha"] ** 2
    seeds = child_seed_ints(c.seed, 2 * len(grid))
    pages = PageFamily.standard(n, p["page_phase"])
    t = Table("data", ["eps", "measured", "bound", "stderr", "tubes", "max_norm"])
    ok = True
    for k, eps in enumerate(grid):
        book = build_book(n, eps**beta, (p["alpha"], p["c"], eps), seeds[2 * k], p["placement"],
                          p["bound_C"], p["page_span"], pages)
        fam = book.tubes(eps)
        m = monte_carlo_union_volume(fam, c.samples, seeds[2 * k + 1], c.threads)
        single = float(np.max(fam.volumes))
        r = book.max_norm()
        t.rows.append([eps, m.value, single, m.stderr, len(fam), r])
        ok &= (m.value >= single - SIGMA * m.stderr) and r <= p["bound_C"] + 1e-12
    summary = {"dimension": n, "beta": beta, "bound_C": p["bound_C"]}
    figs = [("measure.png", lambda path: _plot_measure(t, path, "book volume (MC)", "one leaf box"))]
    return Outcome(ok, summary, [t], figs)


def _corpus(p: dict):
    kind = p["corpus"]
    if kind == "point":
        return point_corpus(p["n"])
    if kind == "segment":
        return segment_corpus(p["angle"], p["n"])
    if kind == "square":
        return square_corpus(p["spacing_exp"])
    return cantor_dust(p["levels"])


def _series_table(series: BoxCountSeries, fit) -> Table:
    t = Table("boxcount", ["delta", "measured", "bound", "stderr"])
    for d, n in zip(series.deltas, series.counts):
        t.rows.append([d, int(n), math.exp(fit.intercept) * d ** (-fit.slope), 0.0])
    return t


def _boxdim(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    deltas = float(p["base"]) ** -np.arange(p["k_min"], p["k_max"] + 1)
    series = box_count_series(_corpus(p), deltas, c.threads)
    fit = dimension_fit(series, p["skip"])
    expected = p["expected"] if p["expected"] is not None else DEFAULT_EXPECTED[p["corpus"]]
    ok = abs(fit.slope - expected) <= p["tolerance"] and fit.r_squared >= p["r2_min"]
    summary = {"corpus": p["corpus"], "slope": fit.slope, "r_squared": fit.r_squared,
               "expected": expected, "fit_range": list(fit.delta_range)}
    t = _series_table(series, fit)
    figs = [("boxcount.png", lambda path: _plots().box_counts(series.deltas, series.counts, fit.slope,
                                                               fit.intercept, path, p["corpus"]))]
    return Outcome(ok, summary, [t], figs)


def _lift(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    n = p["n"]
    fam_seed, *delta_seeds = child_seed_ints(c.seed, 1 + len(p["deltas"]))
    rng = np.random.default_rng(fam_seed)
    g = rng.standard_normal((p["count"], n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    centers = rng.uniform(-p["center_range"], p["center_range"], (p["count"], n))
    segs = [Segment(x, Direction(d)) for x, d in zip(centers, g)]
    h = default_hyperplane(n)
    cap, kept = restrict_directions(segs, h, p["margin"])
    records = lift_family(kept, h)
    g0 = gamma0(n)
    flat = project_family(records, g0)
    identity = max(
        float(np.max(np.abs(np.array(s.endpoints) - np.array(r.original.endpoints))))
        for s, r in zip(flat.segments, records)
    )
    residual = max(tilde_h_residual(r, h) for r in records)
    perp = project_family(records, h_tilde_perp(h), anchor=tilde_h_anchor(h))
    origin = max((line_origin_distance(s) for s in perp.segments if s is not None), default=0.0)
    max_x = max(float(np.linalg.norm(r.x_theta)) for r in records)
    t = Table("data", ["delta", "measured", "bound", "stderr", "hausdorff", "max_angle", "lipschitz"])
    ok = identity <= 1e-12 and residual <= 1e-10 and origin <= 1e-9
    lengths_ok = True
    for delta, s in zip(p["deltas"], delta_seeds):
        gp = perturb_gamma(g0, delta, s)
        bound = p["bound_factor"] * delta * (1.0 + max_x)
        proj = project_family(records, gp, epsilon_target=bound)
        rep = proj.report
        lengths_ok &= all(q is None or q.length <= r.lifted.length + 1e-12 for q, r in zip(proj.segments, records))
        t.rows.append([delta, rep.displacement, bound, 0.0, float(np.max(rep.hausdorff)),
                       float(np.max(principal_angles(g0, gp))), rep.lipschitz])
        ok &= rep.passed
    ok &= lengths_ok
    summary = {
        "dimension": n, "kept": len(kept), "sampled": p["count"], "cap_radius": cap.radius,
        "identity_error": identity, "tilde_h_residual": residual, "origin_distance": origin,
        "max_x_theta": max_x, "projections_shorten": lengths_ok,
    }
    rows = np.array([r[:3] for r in t.rows], dtype=float)
    figs = [("displacement.png", lambda path: _plots().displacement(rows[:, 0], rows[:, 1], rows[:, 2], path))]
    return Outcome(bool(ok), summary, [t], figs)


def _certify_l1(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    r = lemma_L1_certificate(p["alpha"], p["c"], _placement(p["placement"]), p["eps_grid"], p["engine"],
                             p["slack"], p["pairs"], c.threads)
    t = Table("data", ["eps", "measured", "bound", "stderr", "tubes"])
    for row in r.rows():
        t.rows.append([row["eps"], row["measured"], row["bound"], row["stderr"], row["tubes"]])
    ok = r.verdict and r.r_squared >= p["r2_min"]
    summary = {"alpha": r.alpha, "fitted_exponent": r.fitted_exponent, "exponent_limit": 1 - r.alpha + r.slack,
               "r_squared": r.r_squared, "fitted_constant_A": r.fitted_constant_A}
    figs = [("measure.png", lambda path: _plot_measure(t, path, f"alpha={p['alpha']:g}"))]
    return Outcome(bool(ok), summary, [t], figs)


def _certify_book(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    r = book_bound_certificate(p["alpha"], p["eps_grid"], p["beta"], p["placement"], c.samples, c.seed,
                               p["c"], p["page_span"], p["bound_C"], p["skeleton"], c.threads)
    t = Table("data", ["eps", "measured", "bound", "stderr", "bonferroni", "pages", "tubes"])
    for row in r.rows():
        t.rows.append([row[k] for k in t.header])
    ok = r.verdict and r.C1 > 0 and r.C2 > 0
    summary = {"alpha": r.alpha, "beta": r.beta, "C1": r.C1, "C2": r.C2, "curve_positive_points":
               int(sum(v > 0 for v in r.lower_curve))}
    tables = [t]
    figs = [("measure.png", lambda path: _plot_measure(t, path, "3-book volume vs two-term curve", "two-term curve"))]
    if r.skeleton_fit is not None:
        fit = r.skeleton_fit
        series = BoxCountSeries(np.array(r.skeleton_deltas), np.array(r.skeleton_counts))
        tables.append(_series_table(series, fit))
        ok = ok and fit.slope >= p["min_dimension"] and fit.r_squared >= p["r2_min"]
        summary.update(skeleton_slope=fit.slope, skeleton_r_squared=fit.r_squared)
        figs.append(("skeleton.png", lambda path: _plots().box_counts(series.deltas, series.counts, fit.slope,
                                                                       fit.intercept, path, "book skeleton")))
    return Outcome(bool(ok), summary, tables, figs)


def _spaghetti(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    n = p["n"]
    cap = DirectionSet(Direction(basis_vector(n, 0)), p["cap_radius"])
    fam = centered_family(cap, p["count"], p["center_radius"], p["length"], c.seed)
    try:
        w = spaghetti_check(fam, p["direction_samples"], p["sector_samples"], p["min_members"], c.seed,
                            p["shell_width"], p["fill_factor"])
    except InconclusiveError as e:
        return Outcome(False, {"dimension": n, "witness": "none", "reason": str(e)},
                       [Table("boxcount", ["delta", "measured", "bound", "stderr"])])
    lo, hi = w.bounds()
    deltas = 2.0 ** -np.arange(p["k_min"], p["k_max"] + 1)
    counts = [lattice_count(w.contains, lo, hi, d) for d in deltas]
    series = BoxCountSeries(deltas, np.array(counts))
    fit = dimension_fit(series, p["skip"])
    ok = (w.max_sample_distance <= p["distance_tol"] and fit.slope >= n - p["dimension_slack"]
          and fit.r_squared >= p["r2_min"])
    summary = {
        "dimension": n, "shell": w.shell, "N": w.decomposition.N, "subcap_radius": w.cap.radius,
        "subcap_center": w.cap.center.unit.tolist(), "radial": list(w.radial), "members": len(w.members),
        "max_sample_distance": w.max_sample_distance, "fill_epsilon": w.fill_epsilon,
        "sector_slope": fit.slope, "sector_r_squared": fit.r_squared,
    }
    t = _series_table(series, fit)
    figs = [("sector_boxcount.png", lambda path: _plots().box_counts(deltas, counts, fit.slope, fit.intercept,
                                                                      path, "sector region"))]
    if n == 2:
        starts = np.array([s.endpoints[0] for s in fam])
        ends = np.array([s.endpoints[1] for s in fam])
        pts = w.sample(2000, c.seed)
        figs.append(("sector.png", lambda path: _plots().segments_2d(starts, ends, path, "witness", pts)))
    return Outcome(bool(ok), summary, [t], figs)


def _adversarial(c: cfg.ExperimentConfig) -> Outcome:
    p = c.params
    res = adversarial_search(p["alpha"], p["c"], p["eps"], p["iterations"], c.seed, c.samples, p["sigma"],
                             p["decay"], p["domain_radius"], p["init_radius"])
    fam = build_fan(p["alpha"], p["c"], p["eps"], PlacementSpec("explicit", centers=tuple(map(tuple, res.centers))))
    bound = bonferroni_lower_bound(fam, "linear")
    exact = exact_union_area_2d(fam).value
    half = p["domain_radius"] + 0.5 + p["eps"]
    box = (2 * half) ** 2
    t = Table("data", ["iteration", "measured", "bound", "stderr"])
    for i, v in enumerate(res.history, 1):
        q = v / box
        t.rows.append([i, v, bound, math.sqrt(q * (1 - q) / c.samples) * box])
    monotone = all(b <= a for a, b in zip(res.history, res.history[1:]))
    ok = monotone and exact >= bound - 1e-9
    summary = {"initial": res.initial, "final": res.history[-1], "accepted": res.accepted,
               "final_exact_area": exact, "bonferroni": bound, "tubes": len(fam)}
    polys = fam.polygons_2d()
    figs = [("history.png", lambda path: _plots().history(res.history, path, "adversarial descent")),
            ("fan.png", lambda path: _plots().fan(polys, path, "final placement"))]
    return Outcome(bool(ok), summary, [t], figs)


HANDLERS: dict[str, Callable[[cfg.ExperimentConfig], Outcome]] = {
    "fan": _fan,
    "book": _book,
    "boxdim": _boxdim,
    "lift": _lift,
    "certify-l1": _certify_l1,
    "certify-book": _certify_book,
    "spaghetti": _spaghetti,
    "adversarial": _adversarial,
}


def _plots():
    from . import plotting

    return plotting


def _plot_measure(t: Table, path, title, curve_label="lower bound"):
    rows = np.array([r[:4] for r in t.rows], dtype=float)
    return _plots().measure_vs_bound(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], path, title=title,
                                     curve_label=curve_label)


# run / replay ------------------------------------------------------------------------

def render_report(c: cfg.ExperimentConfig, outcome: Outcome, files: list) -> str:
    status = EXIT_PASS if outcome.verdict else EXIT_FAIL
    lines = [
        "kakeyabook experiment report",
        f"command: {c.command}",
        f"verdict: {'pass' if outcome.verdict else 'fail'}",
        f"exit_status: {status}",
        "",
        "[summary]",
    ]
    for k, v in outcome.summary.items():
        lines.append(f"{k}: {json.dumps(_jsonable(v))}")
    lines += ["", "[files]"] + [os.path.basename(f) for f in files] + ["", cfg.embed(c)]
    return "\n".join(lines)


def run(c: cfg.ExperimentConfig, out_dir: str, figures: bool = True) -> int:
    """Execute a config, write report/tables/figures into ``out_dir``; return the exit status."""
    outcome = HANDLERS[c.command](c)
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for t in outcome.tables:
        ext = "csv" if c.format == "csv" else "json"
        path = os.path.join(out_dir, f"{t.name}.{ext}")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(table_csv(t) if c.format == "csv" else table_json(t))
        files.append(path)
    if figures:
        for name, draw in outcome.figures:
            path = os.path.join(out_dir, name)
            draw(path)
            files.append(path)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_report(c, outcome, files))
    return EXIT_PASS if outcome.verdict else EXIT_FAIL


def replay(report_path: str) -> cfg.ExperimentConfig:
    try:
        with open(report_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise FormatError(f"cannot read report: {e}") from None
    return cfg.extract(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kakeya", description="Kakeya-book experiments and certificates.")
    sub = ap.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="out")
    r.add_argument("--samples", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--format", choices=cfg.FORMATS)
    r.add_argument("--no-figures", action="store_true")
    p = sub.add_parser("replay", help="print (or re-run) the config embedded in a report")
    p.add_argument("report")
    p.add_argument("--out", help="re-run the recovered config into this directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--no-figures", action="store_true")
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.action == "run":
            c = cfg.load(args.config).with_overrides(
                seed=args.seed, samples=args.samples, threads=args.threads, format=args.format
            )
            status = run(c, args.out, not args.no_figures)
        else:
            c = replay(args.report)
            if args.out is None:
                sys.stdout.write(c.dump())
                return EXIT_PASS
            status = run(c.with_overrides(threads=args.threads), args.out, not args.no_figures)
    except (ConfigError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (KakeyaError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{'pass' if status == EXIT_PASS else 'fail'}: report in {os.path.join(args.out, 'report.txt')}")
    return status


if __name__ == "__main__":
    sys.exit(main())
