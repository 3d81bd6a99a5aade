import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import point_in_convex_polygon, point_rect_distance_sampled
from tunnelplan.geometry import (
    Bounds,
    DegenerateGeometryError,
    HalfspaceCoeffs,
    ObstacleMap,
    Rect,
    line_coeffs,
    min_clearance,
    oriented_g,
    point_rect_distance,
    pose_collision_free,
    poses_collision_free,
    rect_clear,
    rect_contains,
)
from tunnelplan.model import DiscGeometry, VehicleParams, disc_centers

G = DiscGeometry.from_vehicle(VehicleParams())
BIG = Bounds(-100, -100, 100, 100)
UNIT = Rect.from_vertices([(0, 0), (1, 0), (1, 1), (0, 1)])
EMPTY = ObstacleMap(np.empty((0, 2)), BIG)


def omap(*pts):
    return ObstacleMap(np.array(pts, dtype=float).reshape(-1, 2), BIG)


def random_rect(rng, span=5.0):
    origin = rng.uniform(-span, span, 2)
    ext = rng.uniform(0.05, 3.0, 4)
    return Rect.from_frame(origin, rng.uniform(-math.pi, math.pi), rng.uniform(0, 3), ext)


# -- line coefficients and orientation ------------------------------------------------


@pytest.mark.parametrize(
    "p1, p2, expected",
    [((0, 0), (1, 0), (0, -1, 0)), ((0, 0), (0, 1), (1, 0, 0)), ((1, 1), (3, 2), (1, -2, 1))],
)
def test_line_coeffs_examples(p1, p2, expected):
    abc = line_coeffs(p1, p2)
    assert abc == pytest.approx(expected)
    for p in (p1, p2):
        assert abc[0] * p[0] + abc[1] * p[1] + abc[2] == pytest.approx(0.0)


def test_line_coeffs_degenerate():
    with pytest.raises(DegenerateGeometryError):
        line_coeffs((1, 2), (1, 2))


def test_oriented_g_examples():
    line = line_coeffs((0, 0), (1, 0))
    assert oriented_g((0.5, -1), line, (0.5, -1)) < 0
    assert oriented_g((0, 1), line, (0.5, -1)) > 0
    for h in UNIT.halfspaces:
        assert h.g((0.5, 0.5)) < 0
    with pytest.raises(DegenerateGeometryError):
        oriented_g((0, 1), line, (3, 0))


@given(
    st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    st.floats(1e-3, 1e3),
)
def test_oriented_g_sign_invariant_under_positive_scaling(s, gc, k):
    line = line_coeffs((0, 0), (1, 0.3))
    if abs(line[0] * gc[0] + line[1] * gc[1] + line[2]) < 1e-6:
        return
    scaled = tuple(k * c for c in line)
    assert np.sign(oriented_g(s, line, gc)) == np.sign(oriented_g(s, scaled, gc))


def test_rect_center_is_strictly_inside():
    rng = np.random.default_rng(0)
    for _ in range(200):
        r = random_rect(rng)
        assert len(r.halfspaces) == 4
        assert all(h.g(r.center) < 0 for h in r.halfspaces)
        assert all(math.hypot(h.a, h.b) > 0 for h in r.halfspaces)


def test_clockwise_vertices_rejected():
    with pytest.raises(DegenerateGeometryError):
        Rect.from_vertices([(0, 0), (0, 1), (1, 1), (1, 0)])


def test_halfspace_coeffs_orientation():
    h = HalfspaceCoeffs.from_edge((0, 0), (1, 0), (0.5, 0.5))
    assert h.g((0.5, 0.5)) < 0 and h.g((0.5, -0.5)) > 0
    assert h.oriented() == pytest.approx((0, -1, 0))  # -y < 0 inside


# -- containment ----------------------------------------------------------------------


@pytest.mark.parametrize("point, inside", [((0.5, 0.5), True), ((1.5, 0.5), False), ((1.0, 0.5), True)])
def test_rect_contains_examples(point, inside):
    assert rect_contains(point, UNIT) is inside


def test_rect_contains_matches_polygon_oracle():
    rng = np.random.default_rng(1)
    n_rect, per_rect = 1000, 100  # 1e5 pairs
    for _ in range(n_rect):
        r = random_rect(rng)
        lo, hi = r.vertices.min(axis=0) - 0.5, r.vertices.max(axis=0) + 0.5
        pts = rng.uniform(lo, hi, (per_rect, 2))
        coeffs = r.coeff_array
        ours = np.all(pts @ coeffs[:, :2].T + coeffs[:, 2] <= 0, axis=1)
        for p, got in zip(pts, ours):
            assert got == point_in_convex_polygon(p, r.vertices)
    # the scalar predicate agrees with the vectorised halfspace form
    for p in pts[:20]:
        assert rect_contains(p, r) == point_in_convex_polygon(p, r.vertices)


# -- distances and clearance ----------------------------------------------------------


def test_point_rect_distance_examples():
    d = point_rect_distance([(0.5, 0.5), (2, 0.5), (1.5, 0.5), (2, 2), (-3, 0.2)], UNIT)
    assert d == pytest.approx([0.0, 1.0, 0.5, math.sqrt(2), 3.0])


def test_point_rect_distance_matches_sampling_oracle():
    rng = np.random.default_rng(2)
    for _ in range(100):
        r = random_rect(rng)
        pts = rng.uniform(-10, 10, (10, 2))
        exact = point_rect_distance(pts, r)
        for p, d in zip(pts, exact):
            if point_in_convex_polygon(p, r.vertices):
                assert d == 0.0
            else:
                # dense boundary sampling overestimates by at most half a sample spacing
                assert point_rect_distance_sampled(p, r.vertices, 1e-3) == pytest.approx(d, abs=1e-3)


def test_rect_clear_examples():
    assert rect_clear(UNIT, EMPTY, 0.6021)
    assert not rect_clear(UNIT, omap((0.5, 0.5)), 1e-6)
    assert rect_clear(UNIT, omap((2, 0.5)), 0.6021)
    assert not rect_clear(UNIT, omap((1.5, 0.5)), 0.6021)


def test_tunnel_safety_lemma_brute_force():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(300):
        r = random_rect(rng)
        obs = rng.uniform(-12, 12, (rng.integers(1, 30), 2))
        m = ObstacleMap(obs, BIG)
        if not rect_clear(r, m, G.radius):
            continue
        checked += 1
        lo, hi = r.vertices.min(axis=0), r.vertices.max(axis=0)
        pts = rng.uniform(lo, hi, (400, 2))
        pts = pts[[rect_contains(p, r) for p in pts]]
        pts = np.vstack([pts, r.vertices])
        assert min_clearance(pts, m).min() >= G.radius - 1e-12
    assert checked > 50


# -- pose collision -------------------------------------------------------------------


def test_pose_collision_examples():
    assert pose_collision_free((3, 4, 1), G, EMPTY)
    assert not pose_collision_free((0, 0, 0), G, omap((0.95, 0)))
    assert pose_collision_free((0, 0, 0), G, omap((0.95, 10)))
    # exactly R_c away counts as free
    assert pose_collision_free((0, 0, 0), G, omap((0.95 + G.radius, 0)))


def test_pose_collision_matches_brute_force():
    rng = np.random.default_rng(4)
    obs = rng.uniform(-8, 8, (60, 2))
    m = ObstacleMap(obs, BIG, cell_size=1.0)
    poses = np.column_stack([rng.uniform(-9, 9, (500, 2)), rng.uniform(-math.pi, math.pi, 500)])
    vec = poses_collision_free(poses, G, m)
    for pose, got in zip(poses, vec):
        f, r = disc_centers(pose, G)
        d = min(np.hypot(*(obs - f).T).min(), np.hypot(*(obs - r).T).min())
        assert got == (d >= G.radius)
    assert 0 < vec.sum() < len(vec)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_pose_collision_monotone_under_removal(seed):
    rng = np.random.default_rng(seed)
    obs = rng.uniform(-4, 4, (20, 2))
    pose = (*rng.uniform(-4, 4, 2), rng.uniform(-math.pi, math.pi))
    full = pose_collision_free(pose, G, ObstacleMap(obs, BIG))
    keep = rng.random(len(obs)) < 0.5
    sub = pose_collision_free(pose, G, ObstacleMap(obs[keep], BIG))
    assert not (full and not sub)


# -- obstacle map ---------------------------------------------------------------------


def test_obstacle_map_rejects_points_outside_bounds():
    with pytest.raises(ValueError, match="outside"):
        ObstacleMap([(11, 0)], Bounds(-10, -10, 10, 10))
    with pytest.raises(ValueError):
        ObstacleMap([], Bounds(0, 0, 0, 1))


def test_obstacle_map_is_read_only():
    m = omap((1, 2))
    with pytest.raises(ValueError):
        m.points[0, 0] = 5.0


def test_spatial_hash_box_query_is_superset():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-50, 50, (3000, 2))
    m = ObstacleMap(pts, BIG, cell_size=1.0)
    for _ in range(50):
        lo = rng.uniform(-50, 40, 2)
        hi = lo + rng.uniform(0, 10, 2)
        got = set(m.indices_in_box(lo[0], lo[1], hi[0], hi[1]).tolist())
        want = set(np.flatnonzero(np.all((pts >= lo) & (pts <= hi), axis=1)).tolist())
        assert want <= got


def test_min_clearance():
    m = omap((0, 0), (3, 4))
    assert min_clearance(np.array([[3, 0], [3, 5]]), m) == pytest.approx([3, 1])
    assert np.isinf(min_clearance(np.zeros((1, 2)), EMPTY)).all()
