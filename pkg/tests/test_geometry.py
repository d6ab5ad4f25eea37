import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from bridgefuse import geometry, kernels
from bridgefuse.errors import DegenerateGeometryError, FormatError, UsageError
from bridgefuse.geometry import Polygon, RegionSet
from bridgefuse.records import Modality

from conftest import fp
from oracles import gift_wrap_area

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def square(x0, y0, side=1.0):
    ring = np.array([(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)], dtype=float)
    return RegionSet((Polygon(ring),))


def segment_distance(px, py, edges):
    x1, y1, x2, y2 = (edges[:, i][None, :] for i in range(4))
    dx, dy = x2 - x1, y2 - y1
    t = np.clip(((px[:, None] - x1) * dx + (py[:, None] - y1) * dy) / (dx * dx + dy * dy), 0, 1)
    return np.hypot(px[:, None] - (x1 + t * dx), py[:, None] - (y1 + t * dy)).min(axis=1)


def random_cloud(rng, n=None):
    n = n or int(rng.integers(8, 60))
    centre = rng.uniform(0, 3, size=2)
    return centre + rng.normal(scale=rng.uniform(0.3, 1.2), size=(n, 2))


point_sets = st.lists(
    st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=3, max_size=40, unique=True
)


def non_collinear(pts):
    a = np.asarray(pts, dtype=float)
    c = a - a.mean(axis=0)
    return np.linalg.svd(c, compute_uv=False)[-1] > 1e-6 * max(1.0, np.abs(c).max())


class TestAlphaShape:
    def test_unit_square_large_alpha(self):
        r = geometry.alpha_shape(SQUARE, 100.0)
        assert len(r.polygons) == 1
        assert r.area == pytest.approx(1.0, abs=1e-9)

    def test_unit_square_small_alpha_is_empty(self):
        assert geometry.alpha_shape(SQUARE, 0.1).is_empty

    def test_c_shape(self):
        pitch = 1.0
        pts = [(x * pitch, y * pitch) for x in range(6) for y in range(7) if not (x >= 2 and 2 <= y <= 4)]
        r = geometry.alpha_shape(pts, 1.5 * pitch)
        assert r.area < gift_wrap_area(pts)
        xs, ys = np.array(pts).T
        assert r.contains(xs, ys).all()

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateGeometryError):
            geometry.alpha_shape([(0, 0), (1, 1)], 1.0)
        with pytest.raises(DegenerateGeometryError):
            geometry.alpha_shape([(0, 0), (1, 1), (2, 2), (3, 3)], 1.0)
        with pytest.raises(DegenerateGeometryError):
            geometry.alpha_shape([(0, 0), (0, 0), (1, 1)], 1.0)
        with pytest.raises(UsageError):
            geometry.alpha_shape(SQUARE, 0.0)

    def test_orientation_and_closure(self, rng):
        r = geometry.alpha_shape(random_cloud(rng, 80), 0.6)
        for poly in r.polygons:
            assert geometry._ring_area(poly.exterior) > 0
            for hole in poly.holes:
                assert geometry._ring_area(hole) < 0
            assert not np.array_equal(poly.exterior[0], poly.exterior[-1])
            assert poly.to_shapely().is_valid

    def test_deterministic_under_input_order(self, rng):
        pts = random_cloud(rng, 50)
        a = geometry.region_to_wkt(geometry.alpha_shape(pts, 0.8))
        b = geometry.region_to_wkt(geometry.alpha_shape(pts[rng.permutation(50)], 0.8))
        assert a == b

    def test_boundary_edges_of_two_triangles(self):
        tris = np.array([[0, 1, 2], [1, 3, 2]])
        edges = geometry.boundary_edges(tris).tolist()
        assert edges == [[0, 1], [0, 2], [1, 3], [2, 3]]

    @given(point_sets)
    def test_convex_hull_limit(self, pts):
        assume(non_collinear(pts))
        hull = gift_wrap_area(pts)
        assert geometry.alpha_shape(pts, math.inf).area == pytest.approx(hull, rel=1e-9, abs=1e-9)
        # any alpha at or above the largest Delaunay circumradius keeps every triangle
        p, tris = geometry.alpha_triangles(pts, math.inf)
        rmax = float(kernels.circumradius(p, tris).max())
        assume(math.isfinite(rmax))
        assert geometry.alpha_shape(pts, rmax).area == pytest.approx(hull, rel=1e-9, abs=1e-9)

    @given(point_sets, st.floats(0.05, 40), st.floats(0.0, 40))
    def test_monotone_in_alpha(self, pts, a1, da):
        assume(non_collinear(pts))
        small = geometry.alpha_shape(pts, a1).area
        large = geometry.alpha_shape(pts, a1 + da).area
        assert small <= large + 1e-9 * max(1.0, large)


class TestIntersection:
    def test_identical_squares(self):
        r = geometry.intersect_regions(square(0, 0), square(0, 0))
        assert r.area == pytest.approx(1.0, abs=1e-9)

    def test_disjoint(self):
        assert geometry.intersect_regions(square(0, 0), square(2, 2)).is_empty

    def test_offset_squares(self, rng):
        r = geometry.intersect_regions(square(0, 0), square(0.5, 0.5))
        assert r.area == pytest.approx(0.25, abs=1e-9)
        n = 200_000
        px, py = rng.uniform(-0.25, 1.75, size=(2, n))
        hits = square(0, 0).contains(px, py) & square(0.5, 0.5).contains(px, py)
        p = hits.mean()
        est = p * 4.0
        sigma = 4.0 * math.sqrt(p * (1 - p) / n)
        assert abs(est - 0.25) <= 3 * sigma

    def test_empty_inputs(self):
        assert geometry.intersect_regions(RegionSet(), square(0, 0)).is_empty

    def test_alpha_is_min(self):
        a = RegionSet(square(0, 0).polygons, 2.0)
        b = RegionSet(square(0, 0).polygons, 0.5)
        assert geometry.intersect_regions(a, b).alpha == 0.5

    def test_containment_matches_operands(self, rng):
        for _ in range(8):
            a = geometry.alpha_shape(random_cloud(rng), rng.uniform(0.4, 2.0))
            b = geometry.alpha_shape(random_cloud(rng), rng.uniform(0.4, 2.0))
            r = geometry.intersect_regions(a, b)
            assert r.area <= min(a.area, b.area) + 1e-9
            px, py = rng.uniform(-2, 6, size=(2, 10_000))
            edges = np.vstack([e for e in (a.edges(), b.edges(), r.edges()) if e.shape[0]])
            far = segment_distance(px, py, edges) > 1e-9
            got = r.contains(px, py)[far]
            want = (a.contains(px, py) & b.contains(px, py))[far]
            np.testing.assert_array_equal(got, want)


class TestContainmentKernel:
    def test_boundary_inclusive(self):
        s = square(0, 0)
        assert s.contains([0.0, 1.0, 0.5, 0.5], [0.5, 0.5, 0.0, 1.0]).all()
        assert not s.contains([1.0 + 1e-6], [0.5])[0]

    def test_hole(self):
        outer = np.array([(0, 0), (4, 0), (4, 4), (0, 4)], dtype=float)
        hole = np.array([(1, 1), (1, 3), (3, 3), (3, 1)], dtype=float)
        r = RegionSet((Polygon(outer, (hole,)),))
        assert r.area == pytest.approx(12.0)
        np.testing.assert_array_equal(r.contains([0.5, 2.0, 3.5], [0.5, 2.0, 3.5]), [True, False, True])

    def test_paths_agree(self, rng):
        r = geometry.alpha_shape(random_cloud(rng, 60), 0.7)
        px, py = rng.uniform(-2, 6, size=(2, 5000))
        e = r.edges()
        np.testing.assert_array_equal(
            kernels.points_in_edges_nb(px, py, e, 1e-9), kernels.points_in_edges_np(px, py, e, 1e-9)
        )

    def test_circumradius_paths_agree(self, rng):
        pts = rng.normal(size=(40, 2))
        tris = np.array([rng.choice(40, 3, replace=False) for _ in range(60)], dtype=np.int64)
        tris[0] = [0, 0, 1]  # zero area
        a = kernels.circumradius_nb(pts, tris)
        b = kernels.circumradius_np(pts, tris)
        assert math.isinf(a[0]) and math.isinf(b[0])
        np.testing.assert_allclose(a[1:], b[1:], rtol=1e-12)

    def test_circumradius_hand_value(self):
        pts = np.array([(0, 0), (1, 0), (0, 1)], dtype=float)
        r = kernels.circumradius(pts, np.array([[0, 1, 2]], dtype=np.int64))
        assert r[0] == pytest.approx(math.sqrt(2) / 2)


class TestLanes:
    def test_three_lanes(self):
        assert geometry.lane_layout(0, 30, 3).boundaries.tolist() == [0, 10, 20, 30]

    def test_one_lane(self):
        assert geometry.lane_layout(0, 30, 1).boundaries.tolist() == [0, 30]

    @pytest.mark.parametrize("args", [(5, 5, 2), (0, 10, 0), (0, 10, 1.5), (10, 0, 2)])
    def test_invalid(self, args):
        with pytest.raises(UsageError):
            geometry.lane_layout(*args)

    def test_boundary_goes_to_lower_lane(self):
        lanes = geometry.lane_layout(0, 30, 3)
        assert lanes.lane_of([0, 5, 10, 10.0001, 20, 30]).tolist() == [0, 0, 0, 1, 1, 2]

    @given(st.floats(-100, 100), st.floats(0.1, 100), st.integers(1, 12))
    def test_uniform_and_increasing(self, y0, span, n):
        b = geometry.lane_layout(y0, y0 + span, n).boundaries
        assert np.all(np.diff(b) > 0)
        np.testing.assert_allclose(np.diff(b), span / n, rtol=1e-9)


class TestFuse:
    def _rect_points(self, mod, x0, x1, y0, y1, step=0.5, offset=0.0):
        xs = np.arange(x0 + offset, x1 + 1e-9, step)
        ys = np.arange(y0 + offset, y1 + 1e-9, step)
        return [fp(x, y, 1.0, mod) for x in xs for y in ys]

    def test_shared_defect(self):
        ie = self._rect_points(Modality.IE, 2, 6, 2, 5)
        usw = self._rect_points(Modality.USW, 2, 6, 2, 5, offset=0.25)
        lanes = geometry.lane_layout(0, 10, 4)
        out = geometry.fuse(ie, usw, 0.5, lanes)
        assert not out.region.is_empty
        assert set(out.usw_points) == set(usw)
        inner = [p for p in ie if 2.25 <= p.x <= 5.75 and 2.25 <= p.y <= 4.75]
        assert set(inner) <= set(out.ie_points)
        assert sum(out.lane_counts) == len(out.points)
        assert out.diagnostics == []

    def test_disjoint_lanes_give_empty(self):
        ie = self._rect_points(Modality.IE, 1, 3, 0.5, 2)
        usw = self._rect_points(Modality.USW, 7, 9, 7, 9)
        out = geometry.fuse(ie, usw, 0.5, geometry.lane_layout(0, 10, 4))
        assert out.region.is_empty and out.points == []
        assert out.diagnostics

    def test_degenerate_side_never_raises(self):
        ie = [fp(0, 0, 1), fp(1, 1, 1)]
        usw = self._rect_points(Modality.USW, 0, 2, 0, 2)
        out = geometry.fuse(ie, usw, 0.5, geometry.lane_layout(0, 2, 1))
        assert out.points == [] and "degenerate" in out.diagnostics[0]
        assert geometry.fuse([], [], 0.5, geometry.lane_layout(0, 2, 1)).points == []

    def test_cluster_straddling_lane_boundary(self):
        ie = self._rect_points(Modality.IE, 2, 4, 4, 6)
        usw = self._rect_points(Modality.USW, 2, 4, 4, 6)
        out = geometry.fuse(ie, usw, 0.5, geometry.lane_layout(0, 10, 2))
        assert out.lane_counts[0] > 0 and out.lane_counts[1] > 0
        assert sum(out.lane_counts) == len(out.points)

    @given(
        st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=3, max_size=25, unique=True),
        st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=3, max_size=25, unique=True),
        st.data(),
    )
    def test_subset_and_removal(self, ie_xy, usw_xy, data):
        lanes = geometry.lane_layout(0, 10, 3)
        ie = [fp(x, y, 1.0) for x, y in ie_xy]
        usw = [fp(x, y, 1.0, Modality.USW) for x, y in usw_xy]
        for alpha in (1.5, math.inf):
            out = geometry.fuse(ie, usw, alpha, lanes)
            assert set(out.points) <= set(ie) | set(usw)
            assert sum(out.lane_counts) == len(out.points)
            if out.points:
                assert out.region.contains([p.x for p in out.points], [p.y for p in out.points]).all()
        # removal monotonicity holds for the hull limit (see README on finite alpha)
        full = geometry.fuse(ie, usw, math.inf, lanes)
        drop = data.draw(st.integers(0, len(ie) - 1))
        smaller = geometry.fuse(ie[:drop] + ie[drop + 1 :], usw, math.inf, lanes)
        assert set(smaller.points) <= set(full.points)


class TestWkt:
    def test_round_trip(self, rng, tmp_path):
        r = geometry.alpha_shape(random_cloud(rng, 80), 0.6)
        text = geometry.region_to_wkt(r)
        back = geometry.region_from_wkt(text)
        assert back.area == pytest.approx(r.area, rel=1e-12)
        assert geometry.region_to_wkt(back) == text
        geometry.write_region_wkt(r, tmp_path / "r.wkt")
        assert (tmp_path / "r.wkt").read_text() == text

    def test_format(self):
        assert geometry.region_to_wkt(square(0, 0)) == "POLYGON((0.0 0.0, 1.0 0.0, 1.0 1.0, 0.0 1.0, 0.0 0.0))\n"
        assert geometry.region_to_wkt(RegionSet()) == ""

    def test_rejects_non_polygon(self):
        with pytest.raises(FormatError):
            geometry.region_from_wkt("POINT(1 2)\n")
        with pytest.raises(FormatError):
            geometry.region_from_wkt("POLYGON((1 2, oops))\n")
