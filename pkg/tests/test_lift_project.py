import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from kakeyabook.box_dimension import dimension_fit, dyadic_deltas, lattice_count, BoxCountSeries
from kakeyabook.errors import ArgumentError, DimensionError, EmptySelectionError, InconclusiveError
from kakeyabook.geometry import Direction, GrassmannElement, Hyperplane, Segment, principal_angles
from kakeyabook.lift_project import (
    DirectionSet,
    annulus_decomposition,
    cap_fraction,
    centered_family,
    default_hyperplane,
    direction_lipschitz,
    gamma0,
    h_tilde_perp,
    lift_family,
    line_origin_distance,
    perturb_gamma,
    project_family,
    rays_of,
    restrict_directions,
    spaghetti_check,
    tilde_h_anchor,
    tilde_h_basis,
    tilde_h_residual,
)

from strategies import seeds


def random_segments(rng, n, count, spread=0.5):
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return [Segment(c, Direction(u), 1.0) for c, u in zip(rng.uniform(-spread, spread, (count, n)), d)]


def transversal_family(n, count, seed=0):
    h = default_hyperplane(n)
    cap = DirectionSet(Direction(h.normal.unit), math.acos(0.5), 0.5)
    theta = cap.quasi_uniform(count, seed)
    centers = np.random.default_rng(seed).uniform(-0.5, 0.5, (count, n))
    return h, [Segment(c, Direction(t), 1.0) for c, t in zip(centers, theta)]


# direction caps -------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4])
def test_chart_round_trip(n, rng):
    cap = DirectionSet(Direction(rng.standard_normal(n)), 0.8)
    y = rng.standard_normal((200, n - 1))
    y *= (0.99 * rng.random(200) ** (1 / (n - 1)) / np.linalg.norm(y, axis=1))[:, None]
    theta = cap.chart(y)
    np.testing.assert_allclose(np.linalg.norm(theta, axis=1), 1.0, atol=1e-12)
    assert np.all(cap.contains(theta))
    np.testing.assert_allclose(cap.inverse_chart(theta), y, atol=1e-10)
    np.testing.assert_allclose(cap.chart(np.zeros(n - 1))[0], cap.center.unit, atol=1e-15)


def test_chart_rejects_outside_ball():
    cap = DirectionSet(Direction([0.0, 0.0, 1.0]), 0.5)
    with pytest.raises(ArgumentError):
        cap.chart([[1.0, 0.0]])
    with pytest.raises(ArgumentError):
        DirectionSet(Direction([0.0, 1.0]), 0.0)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_quasi_uniform_inside_and_seeded(n):
    cap = DirectionSet(Direction(np.eye(n)[0]), 1.0)
    a = cap.quasi_uniform(500, seed=1)
    assert np.all(cap.contains(a)) and a.shape == (500, n)
    assert np.array_equal(a, cap.quasi_uniform(500, seed=1))
    assert not np.array_equal(a, cap.quasi_uniform(500, seed=2))


def test_uniform_cap_area_fraction():
    # surface-uniform cap samples: the polar angle CDF of S^2 is (1 - cos r) / (1 - cos R)
    cap = DirectionSet(Direction([0.0, 0.0, 1.0]), 1.0)
    theta = cap.uniform(40_000, np.random.default_rng(0))
    r = np.arccos(np.clip(theta[:, 2], -1, 1))
    for q in (0.3, 0.6, 0.9):
        p = (1 - math.cos(q)) / (1 - math.cos(1.0))
        frac = float(np.mean(r <= q))
        assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / len(r))


@pytest.mark.parametrize("n,m", [(2, 0.5), (3, 0.5), (4, 0.3), (5, 0.7)])
def test_cap_fraction_matches_sampling(n, m):
    g = np.random.default_rng(n).standard_normal((200_000, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    p = cap_fraction(n, m)
    frac = float(np.mean(np.abs(g[:, 0]) >= m))
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / len(g))


def test_cap_fraction_closed_forms():
    # S^1: |cos phi| >= m on a fraction 2 arccos(m) / pi; S^2: 1 - m
    assert cap_fraction(2, 0.5) == pytest.approx(2 * math.acos(0.5) / math.pi)
    assert cap_fraction(3, 0.3) == pytest.approx(0.7)
    assert cap_fraction(3, 0.0) == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        cap_fraction(3, 1.5)


def test_restrict_directions_flips_and_filters(rng):
    h = default_hyperplane(3)
    segs = random_segments(rng, 3, 400)
    cap, kept = restrict_directions(segs, h, 0.5)
    dots = np.array([s.direction.unit @ h.normal.unit for s in segs])
    assert len(kept) == int(np.count_nonzero(np.abs(dots) >= 0.5))
    for s in kept:
        assert s.direction.unit @ h.normal.unit >= 0.5
    assert np.all(cap.contains([s.direction.unit for s in kept]))
    assert cap.radius == pytest.approx(math.acos(0.5))
    # the flipped segments are the same point sets
    first = next(s for s, d in zip(segs, dots) if d <= -0.5)
    match = next(k for k in kept if np.allclose(k.center, first.center))
    assert np.allclose(sorted(map(tuple, match.endpoints)), sorted(map(tuple, first.endpoints)))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_restrict_kept_fraction_matches_cap(n):
    count = 10_000
    h = default_hyperplane(n)
    segs = random_segments(np.random.default_rng(n), n, count)
    _, kept = restrict_directions(segs, h, 0.5)
    p = cap_fraction(n, 0.5)
    assert abs(len(kept) / count - p) <= 3 * math.sqrt(p * (1 - p) / count)


def test_restrict_directions_empty():
    h = default_hyperplane(2)
    with pytest.raises(EmptySelectionError):
        restrict_directions([Segment([0, 0], Direction([0.0, 1.0]), 1.0)], h, 0.5)
    with pytest.raises(EmptySelectionError):
        restrict_directions([], h, 0.5)
    with pytest.raises(ArgumentError):
        restrict_directions([Segment([0, 0], Direction([1.0, 0.0]), 1.0)], h, 0.0)


# lift -----------------------------------------------------------------------------

def test_lift_hand_example():
    h = default_hyperplane(3)
    rec = lift_family([Segment([0.5, 0.3, 0.3], Direction([1.0, 0.0, 0.0]), 1.0)], h)[0]
    np.testing.assert_allclose(rec.x_theta, [0.3, 0.3], atol=1e-15)
    np.testing.assert_allclose(rec.lifted.center, [0.5, 0.3, 0.3, 0.3, 0.3], atol=1e-15)
    np.testing.assert_allclose(rec.lifted.direction.unit, [1, 0, 0, 0, 0], atol=1e-15)
    assert rec.lifted.length == 1.0


def test_lift_planar_example():
    h = default_hyperplane(2)
    rec = lift_family([Segment([0.5, 0.3], Direction([1.0, 0.0]), 1.0)], h)[0]
    np.testing.assert_allclose(rec.x_theta, [0.3], atol=1e-15)
    np.testing.assert_allclose(rec.lifted.center, [0.5, 0.3, 0.3], atol=1e-15)


def test_lift_oblique_plane():
    h = Hyperplane(Direction([1.0, 1.0]), 1.0 / math.sqrt(2))  # x + y = 1
    s = Segment([0.0, 0.0], Direction([1.0, 0.0]), 0.5)
    rec = lift_family([s], h)[0]
    hit = h.foot + rec.x_theta @ h.basis()
    np.testing.assert_allclose(hit, [1.0, 0.0], atol=1e-12)


def test_lift_dimension_mismatch():
    with pytest.raises(DimensionError):
        lift_family([Segment([0, 0], Direction([1.0, 0.0]), 1.0)], default_hyperplane(3))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_gamma0_inverts_lift(n):
    h, segs = transversal_family(n, 300, seed=n)
    g = gamma0(n)
    for rec in lift_family(segs, h):
        for a, b in zip(rec.original.endpoints, rec.lifted.endpoints):
            assert np.max(np.abs(g.project(b) - a)) <= 1e-12
    report = project_family(lift_family(segs, h), g).report
    assert report.displacement <= 1e-12 and report.passed


@pytest.mark.parametrize("n", [2, 3, 4])
def test_lifted_lines_meet_tilde_h(n):
    h, segs = transversal_family(n, 200, seed=n)
    b = tilde_h_basis(h)
    np.testing.assert_allclose(b @ b.T, np.eye(n - 1), atol=1e-12)
    for rec in lift_family(segs, h):
        assert tilde_h_residual(rec, h) <= 1e-10


def test_tilde_h_residual_detects_miss():
    h = default_hyperplane(2)
    rec = lift_family([Segment([0.5, 0.3], Direction([1.0, 0.0]), 1.0)], h)[0]
    shifted = type(rec)(rec.original, rec.x_theta, Segment(rec.lifted.center + [0, 0, 0.1], rec.lifted.direction, 1.0))
    assert tilde_h_residual(shifted, h) > 0.05


@pytest.mark.parametrize("n", [2, 3])
def test_perp_projection_through_origin(n):
    h, segs = transversal_family(n, 300, seed=7)
    perp = h_tilde_perp(h)
    assert perp.sub_dim == n and perp.ambient_dim == 2 * n - 1
    np.testing.assert_allclose(perp.basis @ tilde_h_basis(h).T, 0.0, atol=1e-12)
    proj = project_family(lift_family(segs, h), perp, anchor=tilde_h_anchor(h))
    for s in proj.segments:
        if s is not None:
            assert line_origin_distance(s) <= 1e-9


# Grassmannian perturbation ----------------------------------------------------------

@given(seeds, st.floats(1e-4, 0.45), st.sampled_from([2, 3, 4]))
def test_perturb_largest_angle_is_delta(seed, delta, n):
    g0 = gamma0(n)
    g = perturb_gamma(g0, delta, seed)
    ang = principal_angles(g0, g)
    assert ang.max() == pytest.approx(delta, rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(np.sort(subspace_angles(g0.basis.T, g.basis.T)), np.sort(ang), atol=1e-7)


def test_perturb_zero_and_range():
    g0 = gamma0(3)
    assert perturb_gamma(g0, 0.0, 1) is g0
    with pytest.raises(ArgumentError):
        perturb_gamma(g0, 0.5, 1)
    with pytest.raises(ArgumentError):
        perturb_gamma(g0, -0.1, 1)


def test_perturb_seeds_differ():
    a, b = perturb_gamma(gamma0(3), 0.1, 1), perturb_gamma(gamma0(3), 0.1, 2)
    assert principal_angles(a, b).max() > 1e-3
    c = perturb_gamma(gamma0(3), 0.1, 1)
    assert np.array_equal(a.basis, c.basis)


@pytest.mark.parametrize("n", [2, 3])
def test_displacement_bound_and_trend(n):
    h, segs = transversal_family(n, 1000, seed=3)
    _, kept = restrict_directions(segs, h, 0.5)
    recs = lift_family(kept, h)
    xmax = max(float(np.linalg.norm(r.x_theta)) for r in recs)
    means = []
    for delta in (0.1, 0.01, 0.001):
        vals = []
        for seed in range(5):
            rep = project_family(recs, perturb_gamma(gamma0(n), delta, seed), epsilon_target=10 * delta * (1 + xmax)).report
            assert rep.displacement < 10 * delta * (1 + xmax)
            assert rep.passed and not rep.degenerate
            assert np.all(rep.hausdorff <= rep.displacements + 1e-12)
            vals.append(rep.displacement)
        means.append(np.mean(vals))
    assert means[0] > means[1] > means[2]


def test_mean_displacement_monotone_in_delta():
    h, segs = transversal_family(3, 500, seed=5)
    recs = lift_family(restrict_directions(segs, h, 0.5)[1], h)
    means = [np.mean([project_family(recs, perturb_gamma(gamma0(3), d, s)).report.displacement for s in range(8)])
             for d in (0.1, 0.05, 0.01, 0.005)]
    assert all(a > b for a, b in zip(means, means[1:]))


@pytest.mark.parametrize("n", [2, 3])
def test_projection_does_not_lengthen(n):
    h, segs = transversal_family(n, 300, seed=6)
    recs = lift_family(segs, h)
    for delta in (0.3, 0.05):
        proj = project_family(recs, perturb_gamma(gamma0(n), delta, 1))
        for r, s in zip(recs, proj.segments):
            assert s is not None and s.length <= r.lifted.length + 1e-12


def test_projection_lipschitz_in_direction():
    h, segs = transversal_family(3, 800, seed=4)
    recs = lift_family(segs, h)
    rep = project_family(recs, perturb_gamma(gamma0(3), 0.05, 0)).report
    assert rep.lipschitz < 2.0


def test_direction_lipschitz_identity_is_one():
    thetas = DirectionSet(Direction([0.0, 0.0, 1.0]), 0.5).quasi_uniform(300)
    assert direction_lipschitz(thetas, thetas) == pytest.approx(1.0)
    assert direction_lipschitz(thetas[:1], thetas[:1]) == 0.0


def test_projection_degenerate_image():
    # a line along the kernel of the projection collapses to a point
    h = default_hyperplane(2)
    rec = lift_family([Segment([0.5, 0.0], Direction([1.0, 0.0]), 1.0)], h)
    g = GrassmannElement(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    proj = project_family(rec, g)
    assert proj.degenerate == (0,) and proj.report.degenerate == (0,)
    assert np.all(np.isnan(proj.directions[0]))


def test_projection_checks_dimensions():
    h = default_hyperplane(2)
    recs = lift_family([Segment([0.5, 0.0], Direction([1.0, 0.0]), 1.0)], h)
    with pytest.raises(DimensionError):
        project_family(recs, gamma0(3))
    with pytest.raises(EmptySelectionError):
        project_family([], gamma0(2))


# spaghetti witness ------------------------------------------------------------------

def test_rays_split_at_origin():
    segs = [Segment([0.0, 0.0], Direction([1.0, 0.0]), 1.0), Segment([1.0, 1.0], Direction([1.0, 1.0]), 1.0)]
    dirs, lo, hi, owner = rays_of(segs)
    assert len(dirs) == 3
    np.testing.assert_allclose(lo, [0.0, 0.0, math.sqrt(2) - 0.5])
    np.testing.assert_allclose(hi, [0.5, 0.5, math.sqrt(2) + 0.5])
    assert list(owner) == [0, 0, 1]
    with pytest.raises(ArgumentError):
        rays_of([Segment([0.0, 1.0], Direction([1.0, 0.0]), 1.0)])


def test_annulus_shells():
    segs = [Segment([1.0, 0.0], Direction([1.0, 0.0]), 1.0)]
    dec = annulus_decomposition(segs, 0.5)
    assert sorted(dec.shells) == [1, 2, 3] and dec.N == 3


@pytest.mark.parametrize("n", [2, 3])
def test_centered_family_witness(n):
    cap = DirectionSet(Direction(np.eye(n)[-1]), 0.6)
    fam = centered_family(cap, 2000, seed=1)
    w = spaghetti_check(fam, sector_samples=1000, seed=0)
    assert w.shell == 0
    assert w.max_sample_distance <= 1e-9
    pts = w.sample(500, seed=1)
    assert np.all(w.contains(pts))
    lo, hi = w.bounds()
    assert np.all(pts >= lo) and np.all(pts <= hi)
    assert w.radial[0] >= 0 and w.radial[1] <= 0.5


def test_narrow_cap_witness():
    cap = DirectionSet(Direction([0.0, 0.0, 1.0]), 0.3)
    w = spaghetti_check(centered_family(cap, 2000, seed=3), seed=0)
    assert w.shell == 0
    assert 0 <= w.radial[0] < w.radial[1] <= 0.5
    assert w.max_sample_distance <= 1e-9
    assert np.all(cap.contains(w.members))


def test_shifted_family_uses_far_shell():
    cap = DirectionSet(Direction([0.0, 1.0]), 0.4)
    w = spaghetti_check(centered_family(cap, 500, radius=10.0), seed=0)
    assert w.shell == 19
    assert 9.5 <= w.radial[0] < w.radial[1] <= 10.0
    assert w.max_sample_distance <= 1e-9


def test_finitely_many_directions_inconclusive():
    fam = [Segment([0.0, 0.0, 0.0], Direction(u), 1.0) for u in np.eye(3)]
    with pytest.raises(InconclusiveError):
        spaghetti_check(fam)


def test_clustered_directions_rejected():
    # many segments but along only 4 distinct directions: not an open set
    base = np.array([[1.0, 0.0, 0.1], [0.0, 1.0, 0.1], [1.0, 1.0, 0.1], [1.0, -1.0, 0.1]])
    fam = [Segment([0.0, 0.0, 0.0], Direction(base[i % 4]), 1.0) for i in range(400)]
    with pytest.raises(InconclusiveError):
        spaghetti_check(fam)


def test_witness_sector_has_full_dimension():
    cap = DirectionSet(Direction([0.0, 0.0, 1.0]), 0.6)
    w = spaghetti_check(centered_family(cap, 3000, seed=2), seed=0)
    lo, hi = w.bounds()
    deltas = dyadic_deltas(3, 7)
    counts = [lattice_count(w.contains, lo, hi, d) for d in deltas]
    assert w.fill_epsilon < 0.05
    assert dimension_fit(BoxCountSeries(deltas, counts), 0).slope >= 2.9
