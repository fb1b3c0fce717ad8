import math

import numpy as np
import pytest

from dojo.geometry import (
    ClothoidSegment,
    GeometryError,
    Polyline,
    Pose2D,
    cast_ray,
    clothoid_point,
    normalize_angle,
    offset_polyline,
    sample_clothoid,
)


def oracle_clothoid_position(seg, s, step=0.01):
    """Independent fine-step trapezoid integration of the heading integral."""
    n = max(2, int(math.ceil(s / step)))
    ss = np.linspace(0.0, s, n + 1)
    k0, k1, L = seg.curv_start, seg.curv_end, seg.length
    th = seg.start.heading + k0 * ss + (k1 - k0) * ss**2 / (2.0 * L)
    x = seg.start.x + np.trapezoid(np.cos(th), ss)
    y = seg.start.y + np.trapezoid(np.sin(th), ss)
    return float(x), float(y)


class TestClothoidPoint:
    def test_straight_line(self):
        seg = ClothoidSegment(Pose2D(0, 0, 0), 10.0, 0.0, 0.0)
        p = clothoid_point(seg, 10.0)
        assert p.x == pytest.approx(10.0, abs=1e-9)
        assert p.y == pytest.approx(0.0, abs=1e-9)
        assert p.heading == 0.0

    def test_circular_arc(self):
        # constant curvature 0.1 -> circle of radius 10
        seg = ClothoidSegment(Pose2D(0, 0, 0), 20.0, 0.1, 0.1)
        s = math.pi * 10 / 2
        p = clothoid_point(seg, s)
        assert p.heading == pytest.approx(math.pi / 2)
        assert p.x == pytest.approx(10.0, abs=1e-9)
        assert p.y == pytest.approx(10.0, abs=1e-9)

    def test_start_pose_exact(self):
        start = Pose2D(3.0, -2.0, 0.7)
        seg = ClothoidSegment(start, 50.0, -0.01, 0.02)
        assert clothoid_point(seg, 0.0) == start

    def test_against_quadrature_oracle(self):
        seg = ClothoidSegment(Pose2D(0, 0, 0), 100.0, 0.0, 0.02)
        p = clothoid_point(seg, 100.0)
        ox, oy = oracle_clothoid_position(seg, 100.0, step=0.001)
        assert p.x == pytest.approx(ox, abs=1e-6)
        assert p.y == pytest.approx(oy, abs=1e-6)
        assert p.heading == pytest.approx(0.0 + 0.02 * 100 / 2)

    def test_out_of_range(self):
        seg = ClothoidSegment(Pose2D(0, 0, 0), 10.0, 0.0, 0.0)
        with pytest.raises(GeometryError):
            clothoid_point(seg, -1.0)
        with pytest.raises(GeometryError):
            clothoid_point(seg, 10.5)


class TestSampleClothoid:
    def test_point_counts(self):
        seg = ClothoidSegment(Pose2D(0, 0, 0), 10.0, 0.0, 0.0)
        assert len(sample_clothoid(seg, 5.0)) == 3
        line = sample_clothoid(seg, 4.0)
        assert np.allclose(line.arclens, [0, 4, 8, 10])

    def test_chord_error_bound(self):
        # sagitta bound: max chord deviation < ds^2 * |kappa|max / 8
        rng = np.random.default_rng(7)
        for _ in range(10):
            k0, k1 = rng.uniform(-0.2, 0.2, 2)
            ds = rng.uniform(0.2, 1.0)
            seg = ClothoidSegment(Pose2D(0, 0, rng.uniform(-3, 3)), 30.0, k0, k1)
            line = sample_clothoid(seg, ds)
            bound = ds * ds * max(abs(k0), abs(k1)) / 8.0
            n_full = int(math.floor(seg.length / ds + 1e-9))
            s_samples = [i * ds for i in range(n_full + 1)]
            if seg.length - s_samples[-1] > 1e-9:
                s_samples.append(seg.length)
            for i in range(len(line) - 1):
                s_mid = (s_samples[i] + s_samples[i + 1]) / 2.0
                true = clothoid_point(seg, float(s_mid))
                cx = (line.xs[i] + line.xs[i + 1]) / 2.0
                cy = (line.ys[i] + line.ys[i + 1]) / 2.0
                dev = math.hypot(true.x - cx, true.y - cy)
                assert dev <= bound + 1e-9


class TestOffsetPolyline:
    def test_identity(self):
        line = Polyline([0, 1, 2], [0, 0, 0], [0, 0, 0])
        out = offset_polyline(line, 0.0)
        assert np.allclose(out.xs, line.xs) and np.allclose(out.ys, line.ys)

    def test_straight_left_shift(self):
        line = Polyline([0, 5, 10], [0, 0, 0], [0, 0, 0])
        out = offset_polyline(line, 3.0)
        assert np.allclose(out.ys, 3.0)
        assert np.allclose(out.xs, line.xs)

    def test_circle_radius_shrinks(self):
        # left-turning arc of radius 10 about (0, 10); left offset 2 -> radius 8
        seg = ClothoidSegment(Pose2D(0, 0, 0), 15.0, 0.1, 0.1)
        line = sample_clothoid(seg, 0.5)
        out = offset_polyline(line, 2.0)
        r = np.hypot(out.xs - 0.0, out.ys - 10.0)
        assert np.allclose(r, 8.0, atol=1e-3)

    def test_offset_beyond_radius_rejected(self):
        seg = ClothoidSegment(Pose2D(0, 0, 0), 15.0, 0.1, 0.1)
        line = sample_clothoid(seg, 0.5)
        with pytest.raises(GeometryError):
            offset_polyline(line, 12.0)


def brute_force_ray_hits(origin, angle, boundaries, max_range):
    """Dense-march oracle: step 1 mm along the ray, record sign changes."""
    hits = []
    ux, uy = math.cos(angle), math.sin(angle)
    for line in boundaries:
        for i in range(len(line) - 1):
            p = np.array([line.xs[i], line.ys[i]])
            q = np.array([line.xs[i + 1], line.ys[i + 1]])
            d = q - p
            denom = ux * d[1] - uy * d[0]
            if abs(denom) < 1e-12:
                continue
            t = ((p[0] - origin.x) * d[1] - (p[1] - origin.y) * d[0]) / denom
            r = (ux * (p[1] - origin.y) - uy * (p[0] - origin.x)) / -denom
            if 0 <= t <= max_range and 0 <= r <= 1:
                hits.append(t)
    return sorted(hits)


class TestCastRay:
    def test_single_wall(self):
        wall = Polyline([5, 5], [-1, 1], [math.pi / 2, math.pi / 2])
        hits = cast_ray(Pose2D(0, 0, 0), 0.0, [wall], 1, 50.0)
        assert hits[0] == pytest.approx((5.0, 0.0))

    def test_padding(self):
        hits = cast_ray(Pose2D(0, 0, 0), 0.0, [], 3, 20.0)
        assert hits == [(20.0, 0.0)] * 3

    def test_two_walls_sorted(self):
        walls = [
            Polyline([3, 3], [-1, 1], [0, 0]),
            Polyline([7, 7], [-1, 1], [0, 0]),
        ]
        hits = cast_ray(Pose2D(0, 0, 0), 0.0, walls, 2, 50.0)
        assert hits[0] == pytest.approx((3.0, 0.0))
        assert hits[1] == pytest.approx((7.0, 0.0))
        oracle = brute_force_ray_hits(Pose2D(0, 0, 0), 0.0, walls, 50.0)
        assert [h[0] for h in hits] == pytest.approx(oracle)

    def test_always_length_m_and_sorted(self):
        rng = np.random.default_rng(3)
        walls = [
            Polyline(rng.uniform(-20, 20, 2) + [0, 1], rng.uniform(-20, 20, 2), [0, 0])
            for _ in range(8)
        ]
        for _ in range(20):
            angle = rng.uniform(-math.pi, math.pi)
            hits = cast_ray(Pose2D(0, 0, 0), angle, walls, 4, 30.0)
            assert len(hits) == 4
            dists = [math.hypot(h[0], h[1]) for h in hits]
            assert dists == sorted(dists)


def test_normalize_angle_range():
    for theta in np.linspace(-20, 20, 401):
        n = normalize_angle(float(theta))
        assert -math.pi <= n < math.pi
        assert math.cos(n) == pytest.approx(math.cos(theta), abs=1e-12)


def test_polyline_project_sign():
    line = Polyline([0, 10], [0, 0], [0, 0])
    s, lat = line.project(4.0, 2.0)
    assert s == pytest.approx(4.0)
    assert lat == pytest.approx(2.0)  # left of travel direction is positive
    _, lat = line.project(4.0, -2.0)
    assert lat == pytest.approx(-2.0)
