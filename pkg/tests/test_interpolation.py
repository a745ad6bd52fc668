"""Exponent diagram: region labels, vertex triples, barycentric solves."""

import numpy as np
import pytest

from rieszlab.interpolation import (
    RegionLabel,
    ReciprocalPoint,
    barycentric_solve,
    classify_region,
    combine,
    interpolated_constant,
    strong_type_constant,
    triangulate_square,
    vertex_triples,
)


class TestClassifyRegion:
    def test_square_center(self):
        s = 0.5
        mid = (1 + s) / 2
        assert classify_region(mid, mid, 0.5, 1) is RegionLabel.INTERIOR_SQUARE

    def test_square_corner_is_boundary(self):
        assert classify_region(0.5, 0.5, 0.5, 1) is RegionLabel.BOUNDARY_SQUARE

    def test_outside(self):
        assert classify_region(0.01, 0.01, 0.5, 1) is RegionLabel.OUTSIDE

    def test_pentagon_only(self):
        assert classify_region(0.2, 0.9, 0.5, 1) is RegionLabel.INTERIOR_PENTAGON_ONLY

    def test_hand_labeled_points(self):
        s = 0.5
        cases = {
            (0.75, 0.75): RegionLabel.INTERIOR_SQUARE,
            (s, s): RegionLabel.BOUNDARY_SQUARE,
            (1.0, 1.0): RegionLabel.BOUNDARY_SQUARE,
            (s, 0.8): RegionLabel.BOUNDARY_SQUARE,
            (0.75, 1.0): RegionLabel.BOUNDARY_SQUARE,
            (0.3, 0.3): RegionLabel.INTERIOR_PENTAGON_ONLY,
            (0.9, 0.3): RegionLabel.INTERIOR_PENTAGON_ONLY,
            (0.2, 0.2): RegionLabel.OUTSIDE,
            (1.1, 0.5): RegionLabel.OUTSIDE,
            (0.5, -0.1): RegionLabel.OUTSIDE,
        }
        for (x, y), want in cases.items():
            assert classify_region(x, y, 0.5, 1) is want, (x, y)

    def test_partition_of_sampled_plane(self):
        # every sampled point receives exactly one label (total function)
        for x in np.linspace(0.0, 1.2, 61):
            for y in np.linspace(0.0, 1.2, 61):
                assert classify_region(float(x), float(y), 1.0, 2) in RegionLabel


class TestVertexTriples:
    def test_first_vertex_r_value(self):
        v = vertex_triples(0.5, 1)[0]
        assert v.inv_p == v.inv_q == 1.0
        assert 1.0 / v.inv_r == pytest.approx(2 / 3, rel=1e-15)

    def test_fourth_vertex_r_value(self):
        v = vertex_triples(0.5, 1)[3]
        assert 1.0 / v.inv_r == pytest.approx(2.0, rel=1e-15)

    def test_all_scaling_consistent(self):
        for alpha, dim in ((0.5, 1), (1.0, 2), (1.5, 2), (0.3, 3)):
            for v in vertex_triples(alpha, dim):
                assert abs(v.scaling_defect(alpha, dim)) <= 1e-15


class TestBarycentricSolve:
    def test_centroid(self):
        v1, v2, v3, _ = vertex_triples(0.5, 1)
        target = combine((1 / 3, 1 / 3, 1 / 3), (v1, v2, v3))
        thetas = barycentric_solve(target, v1, v2, v3)
        assert thetas == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-14)

    def test_roundtrip_and_induced_r(self):
        # target (5/6, 5/6) in the first three vertices: equal weights,
        # induced 1/r = 7/6 consistent with 5/6 + 5/6 = 7/6 + 1/2
        v1, v2, v3, _ = vertex_triples(0.5, 1)
        target = ReciprocalPoint(5 / 6, 5 / 6, 5 / 6 + 5 / 6 - 0.5)
        thetas = barycentric_solve(target, v1, v2, v3)
        back = combine(thetas, (v1, v2, v3))
        assert back.inv_p == pytest.approx(target.inv_p, abs=1e-12)
        assert back.inv_q == pytest.approx(target.inv_q, abs=1e-12)
        assert back.inv_r == pytest.approx(7 / 6, abs=1e-12)
        assert back.scaling_consistent(0.5, 1)

    def test_collinear_rejected(self):
        a = ReciprocalPoint(0.0, 0.0, 0.0)
        b = ReciprocalPoint(0.5, 0.5, 0.0)
        c = ReciprocalPoint(1.0, 1.0, 0.0)
        with pytest.raises(ValueError, match="collinear"):
            barycentric_solve(ReciprocalPoint(0.4, 0.5, 0.0), a, b, c)

    def test_outside_rejected(self):
        v1, v2, v3, _ = vertex_triples(0.5, 1)
        with pytest.raises(ValueError, match="not strictly inside"):
            barycentric_solve(ReciprocalPoint(0.51, 0.51, 0.52), v1, v2, v3)

    def test_affine_invariance_of_scaling(self):
        # any convex combination of consistent triples stays consistent
        rng = np.random.default_rng(0)
        verts = vertex_triples(1.0, 2)
        for _ in range(50):
            w = rng.dirichlet(np.ones(4))
            pt = combine(w, verts)
            assert abs(pt.scaling_defect(1.0, 2)) <= 1e-12


class TestTriangulateSquare:
    def test_near_vertex_selection(self):
        verts = vertex_triples(0.5, 1)
        tri = triangulate_square(verts)
        # near v2 = (1, alpha/d): second corner of the first triangle
        assert tri.select(0.98, 0.52) == 0
        # near v3 = (alpha/d, 1): second triangle
        assert tri.select(0.52, 0.98) == 1

    def test_diagonal_tie_goes_first(self):
        verts = vertex_triples(0.5, 1)
        tri = triangulate_square(verts)
        assert tri.select(5 / 6, 5 / 6) == 0

    def test_selector_total_on_interior_samples(self):
        rng = np.random.default_rng(1)
        verts = vertex_triples(0.5, 1)
        tri = triangulate_square(verts)
        s = 0.5
        for _ in range(1000):
            x = s + (1 - s) * rng.random()
            y = s + (1 - s) * rng.random()
            assert tri.select(x, y) in (0, 1)


class TestInterpolatedConstant:
    def test_equal_constants(self):
        assert interpolated_constant(3.0, 3.0, 3.0, (0.2, 0.3, 0.5)) == pytest.approx(3.0)

    def test_vertex_limit(self):
        assert interpolated_constant(7.0, 2.0, 9.0, (1.0, 0.0, 0.0)) == pytest.approx(7.0)

    def test_log_linearity(self):
        base = interpolated_constant(2.0, 5.0, 11.0, (0.5, 0.25, 0.25))
        scaled = interpolated_constant(6.0, 15.0, 33.0, (0.5, 0.25, 0.25))
        assert scaled == pytest.approx(3.0 * base, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            interpolated_constant(0.0, 1.0, 1.0, (0.5, 0.25, 0.25))


class TestStrongTypeConstant:
    def test_diagonal_target_uses_first_three_vertices(self):
        value, report = strong_type_constant(5 / 6, 5 / 6, 0.5, 1, (8.0, 2.0, 2.0, 4.0))
        assert report["vertices"] == (0, 1, 2)
        assert report["thetas"] == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-12)
        assert value == pytest.approx((8.0 * 2.0 * 2.0) ** (1 / 3), rel=1e-12)
        assert report["side_condition_ok"]

    def test_structural_factor_scales(self):
        v1, _ = strong_type_constant(5 / 6, 5 / 6, 0.5, 1, (1.0, 1.0, 1.0, 1.0))
        v2, _ = strong_type_constant(5 / 6, 5 / 6, 0.5, 1, (1.0, 1.0, 1.0, 1.0), structural_factor=4.0)
        assert v2 == pytest.approx(4.0 * v1)

    def test_rejects_boundary_target(self):
        with pytest.raises(ValueError, match="not interior"):
            strong_type_constant(0.5, 0.7, 0.5, 1, (1.0, 1.0, 1.0, 1.0))

    def test_off_diagonal_interior_point(self):
        value, report = strong_type_constant(0.9, 0.6, 0.5, 1, (2.0, 3.0, 5.0, 7.0))
        assert value > 0
        back = combine(report["thetas"], tuple(vertex_triples(0.5, 1)[i] for i in report["vertices"]))
        assert back.inv_p == pytest.approx(0.9, abs=1e-12)
        assert back.inv_q == pytest.approx(0.6, abs=1e-12)
