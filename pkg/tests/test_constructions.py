import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kakeyabook.constructions import (
    PlacementSpec,
    adversarial_placement,
    adversarial_search,
    build_book,
    build_fan,
    build_slab_fan,
    build_unit_ball_book,
    fan_angles,
)
from kakeyabook.errors import ArgumentError
from kakeyabook.geometry import PageFamily
from kakeyabook.union_measure import exact_union_area_2d, loglog_fit, monte_carlo_union_volume

# fans -----------------------------------------------------------------------------

def test_fan_schedule_example():
    # alpha = 0.5, c = pi/2, eps = 1/16: floor(4 pi / 2) + 1 = 7 tubes at k/4
    f = build_fan(0.5, math.pi / 2, 1 / 16)
    assert len(f) == 7
    np.testing.assert_allclose(f.angles, np.arange(7) / 4, atol=1e-12)
    np.testing.assert_allclose(f.frames[:, 0], np.stack([np.cos(f.angles), np.sin(f.angles)], -1), atol=1e-12)


def test_fan_degenerate_single_tube():
    f = build_fan(0.5, 0.1, 0.25)
    assert len(f) == 1 and f.angles[0] == 0.0
    assert exact_union_area_2d(f).value == pytest.approx(0.25)


@given(st.floats(0.05, 0.95), st.floats(0.05, 2 * math.pi), st.floats(1e-3, 0.5))
def test_fan_schedule_exact(alpha, c, eps):
    f = build_fan(alpha, c, eps)
    step = eps**alpha
    assert len(f) == math.floor(c / step * (1 + 1e-12)) + 1
    np.testing.assert_allclose(f.angles, np.arange(len(f)) * step, rtol=0, atol=1e-12)
    assert np.all(np.linalg.norm(f.centers, axis=1) == 0.0)
    assert f.width == eps and np.all(f.lengths == 1.0)


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.1), (1.0, 1.0, 0.1), (0.5, 0.0, 0.1), (0.5, 7.0, 0.1), (0.5, 1.0, 1.0)])
def test_fan_rejects_bad_ranges(args):
    with pytest.raises(ArgumentError):
        build_fan(*args)


def test_random_ball_placement_deterministic():
    p = PlacementSpec("random_ball", radius=0.7, seed=5)
    a, b = build_fan(0.6, math.pi, 2.0**-6, p), build_fan(0.6, math.pi, 2.0**-6, p)
    assert np.array_equal(a.centers, b.centers)
    assert np.all(np.linalg.norm(a.centers, axis=1) <= 0.7)
    c = build_fan(0.6, math.pi, 2.0**-6, PlacementSpec("random_ball", radius=0.7, seed=6))
    assert not np.array_equal(a.centers, c.centers)


def test_explicit_placement():
    centers = [(0.1 * i, -0.1 * i) for i in range(7)]
    f = build_fan(0.5, math.pi / 2, 1 / 16, PlacementSpec("explicit", centers=centers))
    np.testing.assert_array_equal(f.centers, np.array(centers))
    with pytest.raises(ArgumentError):
        build_fan(0.5, math.pi / 2, 1 / 16, PlacementSpec("explicit", centers=centers[:3]))
    with pytest.raises(ArgumentError):
        PlacementSpec("explicit")
    with pytest.raises(ArgumentError):
        PlacementSpec("spiral")


def test_slab_fan_frames():
    f = build_slab_fan(4, 0.5, math.pi / 2, 1 / 16)
    pages = PageFamily.standard(4)
    assert f.dim == 4 and len(f) == 7
    for t, fr in zip(f.angles, f.frames):
        np.testing.assert_allclose(fr @ fr.T, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(fr[1], pages.normal(t), atol=1e-12)
    np.testing.assert_allclose(f.volumes, 1 / 16)


# books ----------------------------------------------------------------------------

def test_book_base_case_is_fan():
    book = build_book(2, 0.3, (0.5, math.pi / 2, 1 / 16), placement="through_origin")
    f = build_fan(0.5, math.pi / 2, 1 / 16)
    assert np.array_equal(book.fan.centers, f.centers)
    assert np.array_equal(book.fan.frames, f.frames)


def test_open_book_shares_spine():
    eps = 1 / 16
    book = build_book(3, 0.5, (0.5, math.pi / 2, eps), placement="through_origin")
    c, f = book.skeleton()
    assert np.allclose(c, 0.0)
    assert book.max_norm() <= book.bound_C
    # every segment lies in its page: orthogonal to that page's normal
    for leaf in book.leaves:
        _, lf = leaf.book.skeleton()
        dirs = lf[:, 0] @ leaf.frame
        np.testing.assert_allclose(dirs @ leaf.normal, 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_random_book_bounded(seed):
    book = build_book(3, 0.4, (0.6, math.pi / 2, 2.0**-4), placement_seed=seed, bound_C=2.0)
    starts, ends = book.segments()
    assert np.all(np.linalg.norm(starts, axis=1) <= 2.0)
    assert np.all(np.linalg.norm(ends, axis=1) <= 2.0)
    assert book.max_norm() <= 2.0 + 1e-12


@given(st.integers(0, 2**31), st.sampled_from([3, 4]), st.floats(1.0, 3.0))
def test_book_bounded_property(seed, n, bound):
    book = build_book(n, 0.9, (0.5, 1.0, 0.1), placement_seed=seed, bound_C=bound)
    assert book.max_norm() <= bound + 1e-12


def test_book_deterministic_and_seeded():
    a = build_book(3, 0.5, (0.6, 1.0, 0.1), placement_seed=3)
    b = build_book(3, 0.5, (0.6, 1.0, 0.1), placement_seed=3)
    c = build_book(3, 0.5, (0.6, 1.0, 0.1), placement_seed=4)
    assert np.array_equal(a.skeleton()[0], b.skeleton()[0])
    assert not np.array_equal(a.skeleton()[0], c.skeleton()[0])


def test_book_page_count_and_frames():
    book = build_book(3, 0.5, (0.6, 1.0, 0.1), placement="through_origin")
    assert len(book.leaves) == math.ceil(math.pi / 0.5)
    np.testing.assert_allclose([leaf.angle for leaf in book.leaves], 0.5 * np.arange(len(book.leaves)))
    c, f = book.skeleton()
    for fr in f:
        np.testing.assert_allclose(fr @ fr.T, np.eye(3), atol=1e-12)
    tubes = book.tubes()
    assert tubes.thin_count == 2 and tubes.width == 0.1
    assert len(np.unique(tubes.labels)) == len(book.leaves)


def test_four_book_structure():
    book = build_book(4, 1.0, (0.5, 1.0, 0.2), placement_seed=1)
    assert book.dim == 4
    assert all(leaf.book.dim == 3 for leaf in book.leaves)
    assert book.max_norm() <= book.bound_C


def test_book_rejects_bad_input():
    with pytest.raises(ArgumentError):
        build_book(1, 0.5, (0.5, 1.0, 0.1))
    with pytest.raises(ArgumentError):
        build_book(3, 0.0, (0.5, 1.0, 0.1))
    with pytest.raises(ArgumentError):
        build_book(3, 0.5, (0.5, 1.0, 0.1), bound_C=0.3)


def test_unit_ball_book_fills_ball():
    ball = 4 / 3 * math.pi
    est = []
    for eps in (0.2, 0.1, 0.05):
        book = build_unit_ball_book(eps)
        f = book.tubes()
        assert book.max_norm() <= 1 + 2 * eps
        est.append(monte_carlo_union_volume(f, 200_000, seed=1))
    gaps = [abs(e.value - ball) for e in est]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.1 * ball


# adversarial search ---------------------------------------------------------------

def test_adversarial_one_iteration_is_initial():
    r = adversarial_search(0.7, math.pi / 2, 2.0**-5, 1, seed=3)
    again = adversarial_search(0.7, math.pi / 2, 2.0**-5, 1, seed=3)
    assert r.accepted == 0 and len(r.history) == 1
    assert r.history[0] == r.initial
    assert np.array_equal(r.centers, again.centers)
    assert np.all(np.linalg.norm(r.centers, axis=1) <= 1.0)


def test_adversarial_history_non_increasing():
    r = adversarial_search(0.7, math.pi / 2, 2.0**-5, 150, seed=1, samples=50_000)
    h = np.array(r.history)
    assert len(h) == 150
    assert np.all(np.diff(h) <= 0)
    assert r.accepted == int(np.count_nonzero(np.diff(h) < 0))
    assert h[-1] <= r.initial
    assert np.all(np.linalg.norm(r.centers, axis=1) <= 2.0 + 1e-12)


def test_adversarial_deterministic():
    a = adversarial_search(0.5, 1.0, 2.0**-4, 40, seed=9, samples=20_000)
    b = adversarial_search(0.5, 1.0, 2.0**-4, 40, seed=9, samples=20_000)
    assert a.history == b.history and np.array_equal(a.centers, b.centers)


def test_adversarial_beats_random_and_keeps_lower_bound():
    alpha, c, eps = 0.7, math.pi / 2, 2.0**-6
    spec = adversarial_placement(alpha, c, eps, 200, seed=0)
    assert spec.kind == "explicit"
    adv = exact_union_area_2d(build_fan(alpha, c, eps, spec)).value
    init = adversarial_search(alpha, c, eps, 1, seed=0).centers
    rnd = exact_union_area_2d(build_fan(alpha, c, eps, PlacementSpec("explicit", centers=init))).value
    assert adv <= rnd
    # measure / eps^(1-alpha) stays bounded away from zero across the grid
    grid = 2.0 ** -np.arange(4, 9)
    ratios = []
    for e in grid:
        f = build_fan(alpha, c, e, adversarial_placement(alpha, c, e, 50, seed=0))
        ratios.append(exact_union_area_2d(f).value / e ** (1 - alpha))
    assert min(ratios) > 0.1


def test_adversarial_placement_in_fan():
    f = build_fan(0.5, 1.0, 2.0**-4, PlacementSpec("adversarial", iterations=10, seed=2))
    g = adversarial_search(0.5, 1.0, 2.0**-4, 10, seed=2)
    np.testing.assert_array_equal(f.centers, g.centers)


def test_fan_angles_helper():
    np.testing.assert_allclose(fan_angles(0.5, math.pi / 2, 1 / 16), np.arange(7) / 4)


def test_through_origin_fan_exponent_close_to_theory():
    # union of a through-origin fan scales no slower than eps^(1-alpha)
    grid = 2.0 ** -np.arange(4, 10)
    m = [exact_union_area_2d(build_fan(0.5, math.pi / 2, e)).value for e in grid]
    slope, _, _ = loglog_fit(grid, m)
    assert slope <= 0.5 + 0.1
