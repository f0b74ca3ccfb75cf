"""Geometry primitives: areas, clipping, IoU, min-area rect, rotated-box
reconstruction.  Derived expectations use independent oracles (Monte-Carlo
point sampling, direct rotation matrices)."""

import math

import numpy as np
import pytest

from textdet.errors import NonConvexInput, ZeroArea
from textdet.geometry import (
    convex_hull,
    convex_intersection_area,
    is_convex,
    min_area_rect,
    normalize_angle,
    polygon_area,
    quad_edge_lengths,
    quad_iou,
    rbox_to_quad,
    rotation_matrix,
    signed_area,
)

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def mc_intersection_area(a, b, rng, samples=1_000_000):
    """Monte-Carlo point-sampling oracle for the area of a ∩ b."""
    both = np.concatenate([a, b])
    lo = both.min(axis=0)
    hi = both.max(axis=0)
    pts = rng.uniform(lo, hi, size=(samples, 2))

    def inside(quad, p):
        q = quad if signed_area(quad) > 0 else quad[::-1]
        ok = np.ones(len(p), dtype=bool)
        for i in range(4):
            e = q[(i + 1) % 4] - q[i]
            ok &= e[0] * (p[:, 1] - q[i, 1]) - e[1] * (p[:, 0] - q[i, 0]) >= 0
        return ok

    frac = np.mean(inside(a, pts) & inside(b, pts))
    box_area = np.prod(hi - lo)
    return frac * box_area


class TestArea:
    def test_unit_square(self):
        assert polygon_area(UNIT_SQUARE) == 1.0

    def test_square_side_10(self):
        assert polygon_area(UNIT_SQUARE * 10) == 100.0

    def test_clockwise_positive_signed_area(self):
        # screen-clockwise under y-down gives a positive shoelace sum
        assert signed_area(UNIT_SQUARE) > 0
        assert signed_area(UNIT_SQUARE[::-1]) < 0

    def test_degenerate_is_zero(self):
        line = np.array([[0, 0], [1, 1], [2, 2], [3, 3]], dtype=float)
        assert polygon_area(line) == 0.0

    def test_edge_lengths(self):
        assert np.allclose(quad_edge_lengths(UNIT_SQUARE * 3), 3.0)


class TestConvexity:
    def test_square_is_convex(self):
        assert is_convex(UNIT_SQUARE)

    def test_reflex_vertex(self):
        dart = np.array([[0, 0], [4, 0], [1, 1], [0, 4]], dtype=float)
        assert not is_convex(dart)

    def test_nonconvex_input_rejected(self):
        dart = np.array([[0, 0], [4, 0], [1, 1], [0, 4]], dtype=float)
        with pytest.raises(NonConvexInput):
            convex_intersection_area(dart, UNIT_SQUARE)


class TestIntersection:
    def test_identical_squares(self):
        assert convex_intersection_area(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)

    def test_half_offset_squares(self):
        shifted = UNIT_SQUARE + 0.5
        assert convex_intersection_area(UNIT_SQUARE, shifted) == pytest.approx(0.25)

    def test_half_offset_against_monte_carlo(self, rng):
        shifted = UNIT_SQUARE + 0.5
        mc = mc_intersection_area(UNIT_SQUARE, shifted, rng)
        assert convex_intersection_area(UNIT_SQUARE, shifted) == pytest.approx(mc, abs=1e-2)

    def test_disjoint(self):
        assert convex_intersection_area(UNIT_SQUARE, UNIT_SQUARE + 5.0) == 0.0

    def test_random_rotated_pairs_against_monte_carlo(self, rng):
        from conftest import random_rotated_rect

        for _ in range(5):
            a = random_rotated_rect(rng, image_size=64, min_side=10, max_side=30)
            b = random_rotated_rect(rng, image_size=64, min_side=10, max_side=30)
            mc = mc_intersection_area(a, b, rng, samples=400_000)
            exact = convex_intersection_area(a, b)
            assert exact == pytest.approx(mc, abs=0.05 * max(1.0, exact))

    def test_orientation_insensitive(self):
        shifted = UNIT_SQUARE + 0.5
        a = convex_intersection_area(UNIT_SQUARE[::-1], shifted)
        assert a == pytest.approx(0.25)


class TestIoU:
    def test_half_offset_value(self):
        assert quad_iou(UNIT_SQUARE, UNIT_SQUARE + 0.5) == pytest.approx(
            0.25 / 1.75, abs=1e-12
        )

    def test_self(self):
        assert quad_iou(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)

    def test_zero_area_rejected(self):
        line = np.array([[0, 0], [1, 0], [2, 0], [3, 0]], dtype=float)
        with pytest.raises(ZeroArea):
            quad_iou(line, UNIT_SQUARE)


class TestHullAndMinRect:
    def test_hull_of_square_plus_interior(self):
        pts = np.concatenate([UNIT_SQUARE, [[0.5, 0.5]]])
        hull = convex_hull(pts)
        assert len(hull) == 4
        assert polygon_area(hull) == pytest.approx(1.0)

    def test_min_area_rect_of_axis_square(self):
        r = min_area_rect(UNIT_SQUARE * 10)
        assert r.area == pytest.approx(100.0)
        assert abs(r.theta) < 1e-12

    def test_min_area_rect_of_rotated_rect(self, rng):
        from conftest import random_rotated_rect

        for _ in range(20):
            q = random_rotated_rect(rng)
            r = min_area_rect(q)
            # min-area rect of a rectangle is itself
            assert r.area == pytest.approx(polygon_area(q), rel=1e-9)
            assert quad_iou(r.quad, q) == pytest.approx(1.0, abs=1e-9)

    def test_angle_normalized(self, rng):
        from conftest import random_rotated_rect

        for _ in range(20):
            q = random_rotated_rect(rng)
            r = min_area_rect(q)
            assert -math.pi / 4 <= r.theta < math.pi / 4


class TestRotation:
    def test_rotation_matrix_quarter_turn(self):
        r = rotation_matrix(math.pi / 2)
        assert np.allclose(r @ [1, 0], [0, 1], atol=1e-15)

    def test_normalize_angle_folds(self):
        assert normalize_angle(math.pi / 2) == pytest.approx(0.0)
        assert normalize_angle(math.pi / 4) == pytest.approx(-math.pi / 4)
        assert normalize_angle(0.1) == pytest.approx(0.1)


class TestRboxToQuad:
    def test_axis_aligned(self):
        q = rbox_to_quad((5.0, 5.0), (1, 2, 3, 4), 0.0)
        assert np.allclose(q, [[1, 4], [7, 4], [7, 8], [1, 8]])

    def test_unit_distances_rotated_45(self):
        s2 = math.sqrt(2.0)
        q = rbox_to_quad((0.0, 0.0), (1, 1, 1, 1), math.pi / 4)
        assert np.allclose(q, [[0, -s2], [s2, 0], [0, s2], [-s2, 0]], atol=1e-12)

    def test_matches_rotation_matrix_oracle(self, rng):
        for _ in range(20):
            d = rng.uniform(0.5, 10.0, size=4)
            theta = rng.uniform(-math.pi / 4, math.pi / 4)
            origin = rng.uniform(-5, 5, size=2)
            base = rbox_to_quad((0.0, 0.0), d, 0.0)
            expected = base @ rotation_matrix(theta).T + origin
            assert np.allclose(rbox_to_quad(origin, d, theta), expected, atol=1e-12)

    def test_negative_distance_rejected(self):
        from textdet.errors import NegativeDistance

        with pytest.raises(NegativeDistance):
            rbox_to_quad((0, 0), (1, -1, 1, 1), 0.0)

    def test_round_trip_with_min_area_rect(self, rng):
        from conftest import random_rotated_rect

        for _ in range(20):
            q = random_rotated_rect(rng)
            r = min_area_rect(q)
            center = q.mean(axis=0)
            rot = rotation_matrix(-r.theta)
            local = r.quad @ rot.T
            c = center @ rot.T
            d = (c[1] - local[:, 1].min(), local[:, 0].max() - c[0],
                 local[:, 1].max() - c[1], c[0] - local[:, 0].min())
            rebuilt = rbox_to_quad(center, d, r.theta)
            assert quad_iou(rebuilt, q) == pytest.approx(1.0, abs=1e-9)
