import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexnav.bench import random_cloud, random_region
from convexnav.errors import StartOutsideRegion
from convexnav.geom import (
    ConvexRegion,
    build_convex_region,
    erode_convex,
    half_planes,
    is_convex_clockwise,
    normalize_vertex_count,
    point_in_convex,
    points_in_convex,
    ray_exit_distance,
    ray_polygon_distance,
    regular_polygon,
    signed_area,
    strictly_inside,
)
from convexnav.oracles import bisection_ray_distance, brute_force_in_convex

coord = st.floats(-6.0, 6.0, allow_nan=False)
clouds = st.lists(st.tuples(coord, coord), min_size=1, max_size=40).map(lambda p: np.array(p, dtype=float))


def square(half=2.0):
    return ConvexRegion(np.array([[-half, half], [half, half], [half, -half], [-half, -half]]), np.zeros(2))


def test_single_point_clips_seed_polygon():
    region = build_convex_region(np.array([[2.0, 0.0]]), (0.0, 0.0), 5.0, 24)
    assert not strictly_inside(region, (2.0, 0.0))
    assert brute_force_in_convex(region.vertices, (0.0, 0.0))
    assert np.max(region.vertices[:, 0]) <= 2.0 + 1e-9
    assert is_convex_clockwise(region.vertices)


def test_empty_cloud_gives_seed_polygon():
    region = build_convex_region(np.zeros((0, 2)), (1.0, -1.0), 5.0, 24)
    assert region.num_vertices == 24
    radii = np.hypot(*(region.vertices - [1.0, -1.0]).T)
    assert np.all(radii >= 5.0 - 1e-9)


def test_random_clouds_exclude_points_and_contain_origin():
    rng = np.random.default_rng(0)
    for _ in range(200):
        cloud = random_cloud(rng)
        region = build_convex_region(cloud, (0.0, 0.0), 8.0, 24)
        assert brute_force_in_convex(region.vertices, (0.0, 0.0))
        assert not any(brute_force_in_convex(region.vertices, p, tol=-1e-9) for p in cloud[:60])
        assert not np.any(points_in_convex(region, cloud, tol=-1e-9))


@given(clouds)
def test_region_excludes_cloud(cloud):
    cloud = cloud[np.hypot(cloud[:, 0], cloud[:, 1]) > 1e-3]
    region = build_convex_region(cloud, (0.0, 0.0), 8.0, 24)
    assert region.is_valid()
    for p in cloud:
        assert not strictly_inside(region, p)


@given(clouds, st.floats(0.0, 2 * math.pi), st.floats(0.01, 3.0))
def test_adding_a_farther_point_never_enlarges(cloud, angle, extra_dist):
    cloud = cloud[np.hypot(cloud[:, 0], cloud[:, 1]) > 1e-3]
    far = float(np.max(np.hypot(cloud[:, 0], cloud[:, 1]))) if len(cloud) else 0.0
    r = far + extra_dist
    extra = np.array([[r * math.cos(angle), r * math.sin(angle)]])
    base = build_convex_region(cloud, (0.0, 0.0), 8.0, 24)
    more = build_convex_region(np.vstack((cloud, extra)), (0.0, 0.0), 8.0, 24)
    assert np.all(points_in_convex(base, more.vertices, tol=1e-7))


def test_nearer_point_can_enlarge_the_region():
    # nearest-first clipping skips points already cut away, so a new nearer
    # point may shield a farther one whose cut was tighter
    base = build_convex_region(np.array([[1.0, 1.0]]), (0.0, 0.0), 8.0, 24)
    more = build_convex_region(np.array([[1.0, 1.0], [0.0, 1.0]]), (0.0, 0.0), 8.0, 24)
    assert more.area > 0 and not np.all(points_in_convex(base, more.vertices, tol=1e-7))


def test_normalize_20gon_to_16_is_contained():
    src = ConvexRegion(regular_polygon((0.0, 0.0), 3.0, 20), np.zeros(2))
    out = normalize_vertex_count(src, 16)
    assert out.num_vertices == 16
    assert all(point_in_convex(src, v) for v in out.vertices)
    assert point_in_convex(out, (0.0, 0.0))


@pytest.mark.parametrize("target", [8, 16, 32])
def test_normalize_hits_target_and_keeps_origin(target):
    rng = np.random.default_rng(target)
    for _ in range(50):
        raw = build_convex_region(random_cloud(rng), (0.0, 0.0), 8.0, 24)
        out = normalize_vertex_count(raw, target)
        assert out.num_vertices == target
        assert point_in_convex(out, (0.0, 0.0))
        assert np.all(points_in_convex(raw, out.vertices, tol=1e-7))
        assert out.area <= raw.area + 1e-7


def test_square_upsamples_without_changing_shape():
    out = normalize_vertex_count(square(), 16)
    assert out.num_vertices == 16
    assert out.area == pytest.approx(16.0, abs=1e-9)


def test_orientation_and_half_planes():
    sq = square()
    assert signed_area(sq.vertices) < 0
    assert sq.area == pytest.approx(16.0)
    normals, offsets = half_planes(sq.vertices)
    assert np.allclose(np.hypot(normals[:, 0], normals[:, 1]), 1.0)
    assert np.allclose(offsets, 2.0)


def test_point_in_convex_boundary_inclusive():
    sq = square()
    assert point_in_convex(sq, (2.0, 0.0))
    assert not strictly_inside(sq, (2.0, 0.0))
    assert not point_in_convex(sq, (2.0 + 1e-6, 0.0))


def test_point_in_convex_matches_brute_force():
    rng = np.random.default_rng(3)
    regions = [random_region(rng) for _ in range(10)]
    for k in range(2000):
        region = regions[k % 10]
        q = rng.uniform(-7, 7, 2)
        assert point_in_convex(region, q) == brute_force_in_convex(region.vertices, q)


def test_ray_distance_matches_bisection():
    rng = np.random.default_rng(4)
    for _ in range(500):
        region = random_region(rng)
        start = rng.uniform(-0.2, 0.2, 2)
        if not point_in_convex(region, start):
            continue
        theta = rng.uniform(0, 2 * math.pi)
        assert ray_exit_distance(region, start, theta) == pytest.approx(
            bisection_ray_distance(region.vertices, start, theta), abs=1e-6
        )


def test_ray_from_outside_raises():
    with pytest.raises(StartOutsideRegion):
        ray_polygon_distance(square(), (5.0, 0.0), 0.0)


def test_square_ray_hits_edge():
    point, dist = ray_polygon_distance(square(), (0.0, 0.0), 0.0)
    assert dist == pytest.approx(2.0)
    assert np.allclose(point, (2.0, 0.0))


def test_erosion_moves_edges_inward():
    out = erode_convex(square(2.0), 0.5)
    assert out.area == pytest.approx(9.0)
    assert erode_convex(square(2.0), 2.5) is None


@given(st.floats(0.01, 1.0))
def test_erosion_keeps_margin(margin):
    rng = np.random.default_rng(int(margin * 1e6))
    raw = random_region(rng)
    eroded = erode_convex(raw, margin)
    if eroded is None:
        return
    normals, offsets = half_planes(raw.vertices)
    depth = offsets[None, :] - eroded.vertices @ normals.T
    assert np.min(depth) >= margin - 1e-7


def test_region_roundtrip_json():
    region = random_region(np.random.default_rng(5))
    back = ConvexRegion.from_json(region.to_json())
    assert np.array_equal(back.vertices, region.vertices)
