import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slotbench.scenegen import geometry

shapely_geom = pytest.importorskip("shapely.geometry")


def _hull_points(seed, n=8, center=(0.5, 0.5), scale=0.2):
    rng = np.random.default_rng(seed)
    pts = np.asarray(center) + rng.uniform(-scale, scale, (n, 2))
    return geometry.convex_hull(pts)


def test_convex_hull_square():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.2, 0.8]])
    hull = geometry.convex_hull(pts)
    assert hull.shape == (4, 2)
    assert {tuple(p) for p in hull} == {(0, 0), (1, 0), (1, 1), (0, 1)}


def test_convex_hull_ccw_orientation():
    hull = _hull_points(3)
    area2 = 0.0
    for i in range(len(hull)):
        a, b = hull[i], hull[(i + 1) % len(hull)]
        area2 += a[0] * b[1] - a[1] * b[0]
    assert area2 > 0


def test_polygons_mtv_separated_is_none():
    a = _hull_points(0, center=(0.2, 0.2), scale=0.1)
    b = _hull_points(1, center=(0.8, 0.8), scale=0.1)
    assert geometry.polygons_mtv(a, b) is None


def test_polygons_mtv_resolves_overlap_shapely_oracle():
    # applying the mtv to b must (nearly) zero the intersection area
    hits = 0
    for seed in range(40):
        a = _hull_points(2 * seed, center=(0.5, 0.5), scale=0.15)
        b = _hull_points(2 * seed + 1, center=(0.58, 0.52), scale=0.15)
        pa, pb = shapely_geom.Polygon(a), shapely_geom.Polygon(b)
        mtv = geometry.polygons_mtv(a, b)
        if pa.intersection(pb).area < 1e-12:
            continue
        hits += 1
        assert mtv is not None
        moved = shapely_geom.Polygon(b + mtv)
        assert pa.intersection(moved).area < 1e-6
        # minimality: the mtv should not be wildly larger than the overlap depth
        assert np.hypot(*mtv) < 0.31
    assert hits > 10


def test_polygons_mtv_pushes_apart_not_through():
    a = np.array([[0.0, 0.0], [0.2, 0.0], [0.2, 0.2], [0.0, 0.2]])
    b = a + np.array([0.15, 0.0])  # overlaps on the right
    mtv = geometry.polygons_mtv(a, b)
    assert mtv is not None and mtv[0] > 0  # b moves further right
    assert abs(mtv[0] - 0.05) < 1e-9 and abs(mtv[1]) < 1e-9


def test_disk_polygon_mtv_face_contact():
    square = np.array([[0.4, 0.4], [0.6, 0.4], [0.6, 0.6], [0.4, 0.6]])
    # disk of radius 0.05 penetrating the left face by 0.01
    mtv = geometry.disk_polygon_mtv(np.array([0.36, 0.5]), 0.05, square)
    assert mtv is not None
    assert abs(mtv[0] - 0.01) < 1e-9 and abs(mtv[1]) < 1e-12


def test_disk_polygon_mtv_shapely_oracle():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        hull = _hull_points(seed + 100, scale=0.12)
        center = np.asarray([0.5, 0.5]) + rng.uniform(-0.2, 0.2, 2)
        r = float(rng.uniform(0.02, 0.08))
        disk = shapely_geom.Point(center).buffer(r, quad_segs=64)
        poly = shapely_geom.Polygon(hull)
        mtv = geometry.disk_polygon_mtv(center, r, hull)
        if poly.intersection(disk).area < 1e-10:
            continue
        assert mtv is not None
        moved = shapely_geom.Polygon(hull + mtv)
        assert moved.intersection(disk).area < 1e-5


def test_disk_center_inside_polygon():
    c = np.array([0.45, 0.5])
    square = np.array([[0.4, 0.4], [0.6, 0.4], [0.6, 0.6], [0.4, 0.6]])
    mtv = geometry.disk_polygon_mtv(c, 0.03, square)
    assert mtv is not None
    q, inside = geometry.closest_point_on_hull(c, square + mtv)
    assert not inside
    assert float(np.hypot(*(c - q))) >= 0.03 - 1e-9


def test_point_segment_distance():
    a, b = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    assert geometry.point_segment_distance(np.array([0.5, 0.3]), a, b) == pytest.approx(0.3)
    assert geometry.point_segment_distance(np.array([-0.4, 0.0]), a, b) == pytest.approx(0.4)
    assert geometry.point_segment_distance(np.array([1.3, 0.4]), a, b) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.1), st.floats(-0.25, 0.25),
       st.floats(-0.25, 0.25))
def test_disk_polygon_mtv_property(seed, r, dx, dy):
    hull = _hull_points(seed, scale=0.15)
    center = np.array([0.5 + dx, 0.5 + dy])
    mtv = geometry.disk_polygon_mtv(center, r, hull)
    if mtv is None:
        q, inside = geometry.closest_point_on_hull(center, hull)
        assert not inside
        assert float(np.hypot(*(center - q))) >= r - 1e-9
    else:
        q, inside = geometry.closest_point_on_hull(center, hull + mtv)
        assert not inside
        assert float(np.hypot(*(center - q))) >= r - 1e-7
