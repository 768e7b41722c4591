import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import subspace_angles
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon

from kakeyabook.errors import DimensionError, GeometryError, ParallelError
from kakeyabook.geometry import (
    Direction,
    GrassmannElement,
    Hyperplane,
    PageFamily,
    Segment,
    Tube,
    basis_vector,
    line_hyperplane_intersection,
    page_at,
    principal_angles,
    spherical_distance,
    tube_vertices_2d,
)
from kakeyabook.intersection import polygon_area, ConvexPolygon

from strategies import angles, planar_tubes, unit_vectors


def e(n, i):
    return basis_vector(n, i)


# directions ---------------------------------------------------------------------

def test_direction_is_renormalized():
    d = Direction([3.0, 4.0])
    assert abs(np.linalg.norm(d.unit) - 1) <= 1e-12
    np.testing.assert_allclose(d.unit, [0.6, 0.8])


def test_direction_rejects_near_zero():
    with pytest.raises(GeometryError):
        Direction([1e-13, 0.0])
    with pytest.raises(GeometryError):
        Direction([np.nan, 1.0])


@pytest.mark.parametrize("a,b,expected", [
    (e(3, 0), e(3, 0), 0.0),
    (e(3, 0), e(3, 1), math.pi / 2),
    (e(3, 0), -e(3, 0), math.pi),
])
def test_spherical_distance_cases(a, b, expected):
    assert spherical_distance(a, b) == pytest.approx(expected, abs=1e-15)


def test_spherical_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        spherical_distance(e(2, 0), e(3, 0))


@given(unit_vectors(4), unit_vectors(4), unit_vectors(4))
def test_spherical_triangle_inequality(a, b, c):
    assert spherical_distance(a, c) <= spherical_distance(a, b) + spherical_distance(b, c) + 1e-10
    assert spherical_distance(a, b) == pytest.approx(spherical_distance(b, a), abs=1e-15)


# segments and tubes ------------------------------------------------------------------

def test_segment_endpoints():
    s = Segment([1.0, 2.0], Direction([0.0, 1.0]), 3.0)
    a, b = s.endpoints
    np.testing.assert_allclose(a, [1.0, 0.5])
    np.testing.assert_allclose(b, [1.0, 3.5])


def test_segment_rejects_bad_length_and_dims():
    with pytest.raises(GeometryError):
        Segment([0.0, 0.0], Direction([1.0, 0.0]), 0.0)
    with pytest.raises(DimensionError):
        Segment([0.0, 0.0, 0.0], Direction([1.0, 0.0]))


def test_axis_aligned_tube_vertices():
    t = Tube.planar([0.0, 0.0], 0.0, 0.2)
    v = tube_vertices_2d(t)
    np.testing.assert_allclose(sorted(map(tuple, v)), sorted([(-0.5, -0.1), (0.5, -0.1), (0.5, 0.1), (-0.5, 0.1)]))
    ConvexPolygon(v)  # counterclockwise and convex, or this raises


def test_tube_vertices_rotate_with_the_tube():
    t0 = Tube.planar([0.0, 0.0], 0.0, 0.2)
    t1 = Tube.planar([0.0, 0.0], math.pi / 2, 0.2)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    rotated = sorted(map(tuple, np.round(tube_vertices_2d(t0) @ rot.T, 12)))
    assert rotated == sorted(map(tuple, np.round(tube_vertices_2d(t1), 12)))


def test_tube_vertices_need_the_plane():
    t = Tube(Segment(np.zeros(3), Direction(e(3, 0))), 0.1, np.eye(3)[1:])
    with pytest.raises(DimensionError):
        tube_vertices_2d(t)


@given(planar_tubes())
def test_vertex_polygon_area_is_length_times_width(t):
    # shoelace on the four corners against the product of the side lengths
    assert polygon_area(ConvexPolygon(tube_vertices_2d(t))) == pytest.approx(t.core.length * t.width, rel=1e-12)


def test_tube_frame_validation():
    with pytest.raises(GeometryError):
        Tube(Segment([0.0, 0.0], Direction([1.0, 0.0])), 0.1, np.array([[1.0, 0.0]]))
    with pytest.raises(GeometryError):
        Tube.planar([0.0, 0.0], 0.0, 0.0)


@given(planar_tubes(), st.integers(0, 2**31))
def test_tube_membership_matches_polygon_containment(t, seed):
    rng = np.random.default_rng(seed)
    lo, hi = t.aabb()
    pts = rng.uniform(lo - 0.1, hi + 0.1, size=(10_000, 2))
    poly = Polygon(tube_vertices_2d(t))
    inside = t.contains(pts)
    for p, flag in zip(pts, inside):
        dist = poly.exterior.distance(ShapelyPoint(p))
        if dist > 1e-9:
            assert flag == poly.contains(ShapelyPoint(p))


def test_slab_tube_volume_and_membership():
    t = Tube(Segment(np.zeros(3), Direction(e(3, 0))), 0.1, np.eye(3)[1:], thin_count=1)
    assert t.volume == pytest.approx(0.1)
    assert t.contains([[0.49, 0.049, 0.49]])[0]
    assert not t.contains([[0.0, 0.06, 0.0]])[0]
    box = Tube(Segment(np.zeros(3), Direction(e(3, 0))), 0.1, np.eye(3)[1:], thin_count=2)
    assert box.volume == pytest.approx(0.01)


# hyperplanes -----------------------------------------------------------------------

def test_line_hyperplane_axis_case():
    s = Segment(np.zeros(3), Direction(e(3, 0)))
    h = Hyperplane(Direction(e(3, 0)), 0.3)
    np.testing.assert_allclose(line_hyperplane_intersection(s, h), [0.3, 0.0, 0.0], atol=1e-15)


def test_line_hyperplane_parallel():
    s = Segment(np.zeros(3), Direction(e(3, 1)))
    with pytest.raises(ParallelError):
        line_hyperplane_intersection(s, Hyperplane(Direction(e(3, 0)), 0.3))


@given(unit_vectors(3), unit_vectors(3), st.floats(-1, 1), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_line_hyperplane_residual(d, nrm, off, c):
    s = Segment(np.array(c), Direction(d))
    h = Hyperplane(Direction(nrm), off)
    if abs(float(d @ nrm)) < 1e-3:
        return
    x = line_hyperplane_intersection(s, h)
    assert abs(float(x @ h.normal.unit) - off) <= 1e-10
    # and x lies on the extended line
    r = x - s.center
    assert np.linalg.norm(r - (r @ s.direction.unit) * s.direction.unit) <= 1e-10


def test_hyperplane_coordinate_basis():
    h = Hyperplane(Direction(e(3, 0)), 0.0)
    np.testing.assert_array_equal(h.basis(), np.eye(3)[1:])
    np.testing.assert_allclose(h.coordinates([[0.0, 0.4, -0.2]]), [[0.4, -0.2]])


# pages ------------------------------------------------------------------------------

def test_page_basis_cases():
    pages = PageFamily.standard(3)
    np.testing.assert_allclose(page_at(pages, 0.0).normal.unit, e(3, 0), atol=1e-15)
    np.testing.assert_allclose(page_at(pages, math.pi / 2).normal.unit, e(3, 1), atol=1e-15)
    np.testing.assert_allclose(page_at(pages, 2 * math.pi + 0.25).normal.unit, page_at(pages, 0.25).normal.unit)


def test_page_family_needs_orthogonal_basis():
    with pytest.raises(GeometryError):
        PageFamily(Direction([1.0, 0.0, 0.0]), Direction([1.0, 1.0, 0.0]))


@given(angles, angles, st.floats(0, 2 * math.pi), st.integers(2, 6))
def test_page_parametrization_is_isometric(t1, t2, phase, n):
    if abs(t1 - t2) > math.pi:
        return
    pages = PageFamily.standard(n, phase)
    d = spherical_distance(page_at(pages, t1).normal, page_at(pages, t2).normal)
    assert d == pytest.approx(abs(t1 - t2), abs=1e-7)
    # arccos loses digits near 0 and pi; the chord length is the sharp check
    chord = np.linalg.norm(pages.normal(t1) - pages.normal(t2))
    assert chord == pytest.approx(2 * math.sin(abs(t1 - t2) / 2), abs=1e-10)


@given(angles, st.integers(3, 6))
def test_page_frame_is_orthonormal_and_inside_page(t, n):
    pages = PageFamily.standard(n)
    f = pages.page_frame(t)
    np.testing.assert_allclose(f @ f.T, np.eye(n - 1), atol=1e-12)
    np.testing.assert_allclose(f @ pages.normal(t), 0.0, atol=1e-12)


# Grassmannian -------------------------------------------------------------------------

def test_grassmann_rejects_dependent_span():
    with pytest.raises(GeometryError):
        GrassmannElement.from_span([[1.0, 0.0, 0.0], [1.0, 1e-10, 0.0]])
    with pytest.raises(DimensionError):
        GrassmannElement(np.eye(3))


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_projection_idempotent_and_lipschitz(seed, m):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, m))
    g = GrassmannElement.from_span(rng.standard_normal((k, m)))
    np.testing.assert_allclose(g.basis @ g.basis.T, np.eye(k), atol=1e-10)
    x, y = rng.standard_normal((2, m))
    np.testing.assert_allclose(g.project(g.embed(g.project(x))), g.project(x), atol=1e-10)
    assert np.linalg.norm(g.project(x) - g.project(y)) <= np.linalg.norm(x - y) + 1e-12


@given(st.integers(0, 2**31))
def test_principal_angles_match_scipy(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(3, 7))
    k = int(rng.integers(1, m))
    a = GrassmannElement.from_span(rng.standard_normal((k, m)))
    b = GrassmannElement.from_span(rng.standard_normal((k, m)))
    ours = np.sort(principal_angles(a, b))
    ref = np.sort(subspace_angles(a.basis.T, b.basis.T))
    # the reference takes arccos near zero, good to about sqrt(machine eps)
    np.testing.assert_allclose(ours, ref, atol=1e-7)


def test_principal_angles_small_angle_accuracy():
    t = 1e-9
    a = GrassmannElement(np.array([[1.0, 0.0, 0.0]]))
    b = GrassmannElement(np.array([[math.cos(t), math.sin(t), 0.0]]))
    assert principal_angles(a, b)[0] == pytest.approx(t, rel=1e-6)
