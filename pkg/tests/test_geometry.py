"""Geometry oracles and invariants.

Expected vertex positions come from an independent rotation-matrix
construction; perimeter and disk guarantees are checked against sums of
oracle vertex distances rather than the formulas under test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polydegrade.errors import ConfigurationError, ValidationError
from polydegrade.geometry import (
    CORNER,
    EDGE,
    NONE,
    DegradationSpec,
    Disk,
    Point,
    PolygonSpec,
    degradation_radius,
    edge_midpoints,
    erasure_disks,
    perimeter,
    polygon_vertices,
    sample_polygon,
    side_length,
)

TWO_PI = 2.0 * math.pi


def oracle_vertices(spec: PolygonSpec) -> list[tuple[float, float]]:
    """Independent construction: rotate (circumradius, 0) by explicit 2x2 matrices."""
    out = []
    for k in range(spec.n_sides):
        angle = spec.rotation + TWO_PI * k / spec.n_sides
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        x, y = rot @ np.array([spec.circumradius, 0.0])
        out.append((spec.center.x + x, spec.center.y + y))
    return out


def arc_positions(spec: PolygonSpec, disks: list[Disk]) -> list[float]:
    """Arc-length coordinate of each disk center along the outline path.

    Asserts that every center sits exactly on a vertex or an edge midpoint
    of the independently constructed polygon.
    """
    verts = oracle_vertices(spec)
    n = len(verts)
    side = math.hypot(verts[1][0] - verts[0][0], verts[1][1] - verts[0][1])
    positions = []
    for disk in disks:
        best = None
        for k, (vx, vy) in enumerate(verts):
            if math.hypot(disk.center.x - vx, disk.center.y - vy) < 1e-9:
                best = k * side
                break
            mx = (vx + verts[(k + 1) % n][0]) / 2.0
            my = (vy + verts[(k + 1) % n][1]) / 2.0
            if math.hypot(disk.center.x - mx, disk.center.y - my) < 1e-9:
                best = (k + 0.5) * side
                break
        assert best is not None, "disk center is neither a vertex nor an edge midpoint"
        positions.append(best)
    return positions


def random_spec(rng: np.random.Generator, n_sides: int | None = None) -> PolygonSpec:
    n = int(n_sides if n_sides is not None else rng.integers(3, 9))
    return sample_polygon(rng, n, 224.0, 28.0)


spec_params = st.tuples(
    st.integers(3, 12),
    st.floats(-200.0, 200.0),
    st.floats(-200.0, 200.0),
    st.floats(0.5, 300.0),
    st.floats(0.0, TWO_PI, exclude_max=True),
)


def build_spec(params) -> PolygonSpec:
    n, cx, cy, r, theta = params
    return PolygonSpec(n, Point(cx, cy), r, theta)


class TestVertices:
    def test_unit_square_hits_the_axes(self):
        spec = PolygonSpec(4, Point(0.0, 0.0), 1.0, 0.0)
        verts = polygon_vertices(spec)
        expected = [(1, 0), (0, 1), (-1, 0), (0, -1)]
        for v, (ex, ey) in zip(verts, expected):
            assert v.x == pytest.approx(ex, abs=1e-12)
            assert v.y == pytest.approx(ey, abs=1e-12)

    def test_rotated_equilateral_triangle(self):
        spec = PolygonSpec(3, Point(0.0, 0.0), 1.0, math.pi / 2)
        verts = polygon_vertices(spec)
        root3 = math.sqrt(3.0)
        expected = [(0, 1), (-root3 / 2, -0.5), (root3 / 2, -0.5)]
        for v, (ex, ey) in zip(verts, expected):
            assert v.x == pytest.approx(ex, abs=1e-12)
            assert v.y == pytest.approx(ey, abs=1e-12)

    def test_pentagon_matches_rotation_matrix_oracle(self):
        spec = PolygonSpec(5, Point(112.0, 112.0), 80.0, 0.7)
        verts = polygon_vertices(spec)
        assert len(verts) == 5
        for v, (ex, ey) in zip(verts, oracle_vertices(spec)):
            assert v.x == pytest.approx(ex, abs=1e-9)
            assert v.y == pytest.approx(ey, abs=1e-9)

    @given(spec_params)
    @settings(max_examples=60)
    def test_always_matches_oracle(self, params):
        spec = build_spec(params)
        for v, (ex, ey) in zip(polygon_vertices(spec), oracle_vertices(spec)):
            assert math.hypot(v.x - ex, v.y - ey) < 1e-9

    def test_cyclic_symmetry_under_step_rotation(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            spec = random_spec(rng)
            step = TWO_PI / spec.n_sides
            rotated = PolygonSpec(
                spec.n_sides,
                spec.center,
                spec.circumradius,
                (spec.rotation + step) % TWO_PI,
                spec.stroke_width,
            )
            base = polygon_vertices(spec)
            shifted = polygon_vertices(rotated)
            for k in range(spec.n_sides):
                expect = base[(k + 1) % spec.n_sides]
                assert math.hypot(shifted[k].x - expect.x, shifted[k].y - expect.y) < 1e-9


class TestMidpoints:
    def test_unit_square_midpoints(self):
        spec = PolygonSpec(4, Point(0.0, 0.0), 1.0, 0.0)
        mids = edge_midpoints(spec)
        expected = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)]
        for m, (ex, ey) in zip(mids, expected):
            assert m.x == pytest.approx(ex, abs=1e-12)
            assert m.y == pytest.approx(ey, abs=1e-12)

    @given(spec_params)
    @settings(max_examples=40)
    def test_count_matches_vertex_count(self, params):
        spec = build_spec(params)
        assert len(edge_midpoints(spec)) == len(polygon_vertices(spec)) == spec.n_sides

    def test_hexagon_midpoints_average_oracle_vertices(self):
        spec = PolygonSpec(6, Point(100.0, 100.0), 50.0, 0.3)
        mids = edge_midpoints(spec)
        assert len(mids) == 6
        oracle = oracle_vertices(spec)
        for k, m in enumerate(mids):
            ox = (oracle[k][0] + oracle[(k + 1) % 6][0]) / 2.0
            oy = (oracle[k][1] + oracle[(k + 1) % 6][1]) / 2.0
            assert math.hypot(m.x - ox, m.y - oy) < 1e-9


class TestPerimeter:
    def test_hexagon_side_equals_radius(self):
        spec = PolygonSpec(6, Point(0.0, 0.0), 10.0, 0.0)
        assert perimeter(spec) == pytest.approx(60.0, abs=1e-9)

    def test_square_with_sqrt2_radius(self):
        spec = PolygonSpec(4, Point(0.0, 0.0), math.sqrt(2.0), 0.0)
        assert perimeter(spec) == pytest.approx(8.0, abs=1e-9)

    def test_triangle_unit_radius(self):
        spec = PolygonSpec(3, Point(0.0, 0.0), 1.0, 0.0)
        assert perimeter(spec) == pytest.approx(3.0 * math.sqrt(3.0), abs=1e-9)

    @given(spec_params)
    @settings(max_examples=60)
    def test_matches_sum_of_oracle_vertex_distances(self, params):
        spec = build_spec(params)
        oracle = oracle_vertices(spec)
        total = sum(
            math.hypot(
                oracle[k][0] - oracle[(k + 1) % spec.n_sides][0],
                oracle[k][1] - oracle[(k + 1) % spec.n_sides][1],
            )
            for k in range(spec.n_sides)
        )
        assert perimeter(spec) == pytest.approx(total, rel=1e-9)


class TestDegradationRadius:
    def test_zero_proportion_gives_zero(self):
        assert degradation_radius(0.0, 5, 500.0) == 0.0

    def test_half_proportion_pentagon(self):
        assert degradation_radius(0.5, 5, 500.0) == pytest.approx(25.0, abs=1e-12)

    def test_heavy_proportion_triangle(self):
        assert degradation_radius(0.7, 3, 300.0) == pytest.approx(35.0, abs=1e-12)

    @pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5, math.nan])
    def test_rejects_out_of_domain_proportions(self, bad):
        with pytest.raises(ValidationError):
            degradation_radius(bad, 5, 500.0)

    def test_rejects_bad_perimeter_and_sides(self):
        with pytest.raises(ValidationError):
            degradation_radius(0.5, 2, 500.0)
        with pytest.raises(ValidationError):
            degradation_radius(0.5, 5, 0.0)


class TestErasureDisks:
    def test_none_kind_yields_no_disks(self):
        spec = PolygonSpec(5, Point(50.0, 50.0), 20.0, 1.0)
        assert erasure_disks(spec, DegradationSpec(NONE, 0.0)) == []

    def test_square_corner_disks_have_expected_radius(self):
        spec = PolygonSpec(4, Point(0.0, 0.0), math.sqrt(2.0), 0.0)
        disks = erasure_disks(spec, DegradationSpec(CORNER, 0.5))
        assert len(disks) == 4
        verts = polygon_vertices(spec)
        for disk, vertex in zip(disks, verts):
            assert disk.radius == pytest.approx(0.5, abs=1e-12)  # 0.5 * 8 / (2 * 4)
            assert disk.center == vertex

    def test_edge_disks_sit_on_midpoints(self):
        spec = PolygonSpec(6, Point(100.0, 100.0), 40.0, 0.25)
        disks = erasure_disks(spec, DegradationSpec(EDGE, 0.3))
        assert [d.center for d in disks] == edge_midpoints(spec)

    def test_edge_disks_keep_distance_from_vertices_even_at_extreme_proportion(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            spec = random_spec(rng)
            disks = erasure_disks(spec, DegradationSpec(EDGE, 0.99))
            half_side = side_length(spec) / 2.0
            for disk in disks:
                for vertex in polygon_vertices(spec):
                    gap = math.hypot(disk.center.x - vertex.x, disk.center.y - vertex.y) - disk.radius
                    assert gap >= half_side - disk.radius - 1e-9
                    assert gap > 0.0

    @given(spec_params, st.floats(0.0, 1.0, exclude_max=True))
    @settings(max_examples=150)
    def test_disk_diameters_sum_to_proportion_of_perimeter(self, params, proportion):
        spec = build_spec(params)
        for kind in (CORNER, EDGE):
            disks = erasure_disks(spec, DegradationSpec(kind, proportion))
            total = sum(2.0 * d.radius for d in disks)
            target = proportion * perimeter(spec)
            assert abs(total - target) <= 1e-9 * max(1.0, target)

    @given(spec_params, st.floats(0.0, 1.0, exclude_max=True))
    @settings(max_examples=150)
    def test_corner_disks_pairwise_disjoint_as_regions(self, params, proportion):
        spec = build_spec(params)
        disks = erasure_disks(spec, DegradationSpec(CORNER, proportion))
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                dist = math.hypot(
                    disks[i].center.x - disks[j].center.x,
                    disks[i].center.y - disks[j].center.y,
                )
                assert dist > disks[i].radius + disks[j].radius - 1e-9

    @given(spec_params, st.floats(0.0, 1.0, exclude_max=True))
    @settings(max_examples=150)
    def test_erased_perimeter_runs_pairwise_disjoint(self, params, proportion):
        # Each disk removes a 2r stretch of outline centred on its arc
        # position; those stretches must never overlap below full erasure.
        spec = build_spec(params)
        for kind in (CORNER, EDGE):
            disks = erasure_disks(spec, DegradationSpec(kind, proportion))
            positions = sorted(arc_positions(spec, disks))
            total = perimeter(spec)
            for i, s in enumerate(positions):
                nxt = positions[(i + 1) % len(positions)]
                gap = (nxt - s) % total if i + 1 < len(positions) else total - s + positions[0]
                assert gap > 2.0 * disks[0].radius - 1e-9

    def test_edge_disk_regions_may_touch_at_high_proportion(self):
        # As 2-D regions, adjacent edge disks intersect once the proportion
        # passes cos(pi/n); the erased outline runs stay disjoint regardless.
        spec = PolygonSpec(3, Point(0.0, 0.0), 1.0, 0.0)
        disks = erasure_disks(spec, DegradationSpec(EDGE, 0.6))
        d01 = math.hypot(
            disks[0].center.x - disks[1].center.x, disks[0].center.y - disks[1].center.y
        )
        assert d01 < disks[0].radius + disks[1].radius  # regions overlap...
        assert side_length(spec) > 2.0 * disks[0].radius  # ...but runs do not


class TestSamplePolygon:
    def test_same_seed_same_spec(self):
        a = sample_polygon(np.random.default_rng(42), 5, 224.0, 28.0)
        b = sample_polygon(np.random.default_rng(42), 5, 224.0, 28.0)
        assert a == b

    def test_degenerate_admissible_set_pins_center_and_radius(self):
        r_min = (224.0 - 2.0) / 2.0
        spec = sample_polygon(np.random.default_rng(0), 4, 224.0, r_min)
        assert spec.center.x == pytest.approx(112.0, abs=1e-9)
        assert spec.center.y == pytest.approx(112.0, abs=1e-9)
        assert spec.circumradius == pytest.approx(r_min, abs=1e-9)

    def test_infeasible_r_min_is_a_configuration_error(self):
        with pytest.raises(ConfigurationError):
            sample_polygon(np.random.default_rng(0), 4, 224.0, 112.0)

    def test_samples_respect_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            spec = random_spec(rng)
            assert spec.fits_canvas(224.0)
            assert spec.circumradius >= 28.0 - 1e-9
            assert 0.0 <= spec.rotation < TWO_PI

    def test_center_uniform_over_admissible_square(self):
        from scipy import stats

        rng = np.random.default_rng(2024)
        n = 10_000
        xs = np.empty(n)
        ys = np.empty(n)
        for i in range(n):
            spec = sample_polygon(rng, 5, 224.0, 28.0)
            xs[i], ys[i] = spec.center.x, spec.center.y
        lo, hi = 29.0, 195.0
        bins = np.linspace(lo, hi, 9)
        counts, _, _ = np.histogram2d(xs, ys, bins=[bins, bins])
        _, p_value = stats.chisquare(counts.ravel())
        assert p_value > 0.01


class TestValidation:
    def test_rejects_degenerate_polygons(self):
        with pytest.raises(ValidationError):
            PolygonSpec(2, Point(0.0, 0.0), 1.0, 0.0)
        with pytest.raises(ValidationError):
            PolygonSpec(4, Point(0.0, 0.0), -1.0, 0.0)
        with pytest.raises(ValidationError):
            PolygonSpec(4, Point(0.0, 0.0), 1.0, TWO_PI)
        with pytest.raises(ValidationError):
            PolygonSpec(4, Point(0.0, 0.0), 1.0, 0.0, stroke_width=0.0)
        with pytest.raises(ValidationError):
            Point(math.inf, 0.0)

    def test_rejects_bad_degradations(self):
        with pytest.raises(ValidationError):
            DegradationSpec("blur", 0.5)
        with pytest.raises(ValidationError):
            DegradationSpec(CORNER, 1.0)
        with pytest.raises(ValidationError):
            DegradationSpec(EDGE, -0.01)
        with pytest.raises(ValidationError):
            DegradationSpec(NONE, 0.5)

    def test_rejects_negative_disk(self):
        with pytest.raises(ValidationError):
            Disk(Point(0.0, 0.0), -1.0)

    def test_canvas_fit_check(self):
        spec = PolygonSpec(4, Point(10.0, 10.0), 20.0, 0.0)
        assert not spec.fits_canvas(224.0)
        with pytest.raises(ValidationError):
            spec.require_fits(224.0)
