"""Planar curve primitives: clothoids, polylines, offsets and ray casting.

Everything downstream (road generation, observers, controllers) is built on
these. All functions are pure and operate on immutable inputs.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# 8-point Gauss-Legendre nodes/weights on [0, 1]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = (_GL_NODES + 1.0) / 2.0
_GL_WEIGHTS = _GL_WEIGHTS / 2.0


class GeometryError(ValueError):
    """Raised on invalid geometric inputs (out-of-range arc length, bad offset)."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    def forward(self) -> tuple[float, float]:
        return math.cos(self.heading), math.sin(self.heading)

    def to_local(self, px: float, py: float) -> tuple[float, float]:
        """Express a world point in this pose's frame (x forward, y left)."""
        dx, dy = px - self.x, py - self.y
        c, s = math.cos(self.heading), math.sin(self.heading)
        return c * dx + s * dy, -s * dx + c * dy


@dataclass(frozen=True)
class ClothoidSegment:
    """Curve whose curvature varies linearly from curv_start to curv_end over length."""

    start: Pose2D
    length: float
    curv_start: float
    curv_end: float

    def __post_init__(self):
        if self.length <= 0.0:
            raise GeometryError(f"clothoid length must be > 0, got {self.length}")

    def curvature(self, s: float) -> float:
        return self.curv_start + (self.curv_end - self.curv_start) * s / self.length

    def heading(self, s: float) -> float:
        k0, k1, L = self.curv_start, self.curv_end, self.length
        return normalize_angle(self.start.heading + k0 * s + (k1 - k0) * s * s / (2.0 * L))


class Polyline:
    """Ordered pose sequence with cumulative arc lengths (chord lengths)."""

    __slots__ = (
        "xs", "ys", "headings", "arclens",
        "_dx", "_dy", "_seg2",
        "_xl", "_yl", "_hl", "_al", "_len",
    )

    def __init__(self, xs, ys, headings):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        headings = np.asarray(headings, dtype=float)
        if len(xs) < 2:
            raise GeometryError("polyline needs >= 2 points")
        dx = np.diff(xs)
        dy = np.diff(ys)
        seg2 = dx * dx + dy * dy
        if np.any(seg2 <= 0.0):
            raise GeometryError("polyline arc lengths must be strictly increasing")
        self.xs = xs
        self.ys = ys
        self.headings = headings
        self._dx = dx
        self._dy = dy
        self._seg2 = seg2
        self.arclens = np.concatenate(([0.0], np.cumsum(np.sqrt(seg2))))
        # plain-list mirrors keep per-call lookups off the numpy scalar path
        self._xl = self.xs.tolist()
        self._yl = self.ys.tolist()
        self._hl = self.headings.tolist()
        self._al = self.arclens.tolist()
        self._len = self._al[-1]

    @classmethod
    def from_poses(cls, poses: Sequence[Pose2D]) -> "Polyline":
        return cls([p.x for p in poses], [p.y for p in poses], [p.heading for p in poses])

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def length(self) -> float:
        return self._len

    def pose(self, i: int) -> Pose2D:
        return Pose2D(self._xl[i], self._yl[i], self._hl[i])

    def poses(self) -> list[Pose2D]:
        return [self.pose(i) for i in range(len(self))]

    def start(self) -> Pose2D:
        return self.pose(0)

    def end(self) -> Pose2D:
        return self.pose(len(self) - 1)

    def interpolate(self, s: float) -> Pose2D:
        """Pose at arc length s (clamped to the line's extent)."""
        al = self._al
        if s <= 0.0:
            s = 0.0
        elif s >= self._len:
            s = self._len
        i = bisect_right(al, s) - 1
        if i > len(al) - 2:
            i = len(al) - 2
        elif i < 0:
            i = 0
        t = (s - al[i]) / (al[i + 1] - al[i])
        xl, yl, hl = self._xl, self._yl, self._hl
        x = xl[i] + t * (xl[i + 1] - xl[i])
        y = yl[i] + t * (yl[i + 1] - yl[i])
        h0, h1 = hl[i], hl[i + 1]
        h = h0 + t * normalize_angle(h1 - h0)
        return Pose2D(x, y, h)

    def project(self, px: float, py: float) -> tuple[float, float]:
        """Project a point; returns (arc length, signed lateral offset).

        Offset is positive when the point lies left of the line's direction.
        """
        dx, dy, seg2 = self._dx, self._dy, self._seg2
        t = ((px - self.xs[:-1]) * dx + (py - self.ys[:-1]) * dy) / seg2
        t = np.clip(t, 0.0, 1.0)
        cx = self.xs[:-1] + t * dx
        cy = self.ys[:-1] + t * dy
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        i = int(np.argmin(d2))
        seg_len = math.sqrt(seg2[i])
        s = float(self.arclens[i] + t[i] * seg_len)
        # sign from the cross product of segment direction and point offset
        cross = dx[i] * (py - cy[i]) - dy[i] * (px - cx[i])
        lateral = math.copysign(math.sqrt(float(d2[i])), cross)
        return s, lateral

    def reversed(self) -> "Polyline":
        h = (np.asarray(self.headings)[::-1] + math.pi + math.pi) % TWO_PI - math.pi
        return Polyline(self.xs[::-1].copy(), self.ys[::-1].copy(), h)


def _clothoid_positions(seg: ClothoidSegment, s_values: np.ndarray) -> np.ndarray:
    """Positions at sorted arc lengths, via per-interval Gauss-Legendre quadrature.

    Each integration sub-interval is <= 1 m.
    """
    k0, k1, L = seg.curv_start, seg.curv_end, seg.length
    th0 = seg.start.heading

    # subinterval edges (each <= 1 m), remembering which sample each ends at
    edges = [0.0]
    owner = np.empty(len(s_values), dtype=int)
    prev = 0.0
    for idx, s in enumerate(s_values):
        span = s - prev
        if span > 0.0:
            n_sub = max(1, int(math.ceil(span / 1.0)))
            step = span / n_sub
            edges.extend(prev + step * (i + 1) for i in range(n_sub))
        owner[idx] = len(edges) - 1
        prev = s
    e = np.asarray(edges)
    a, widths = e[:-1], np.diff(e)
    nodes = a[:, None] + widths[:, None] * _GL_NODES[None, :]
    th = th0 + k0 * nodes + (k1 - k0) * nodes * nodes / (2.0 * L)
    wts = widths[:, None] * _GL_WEIGHTS[None, :]
    dx = np.sum(wts * np.cos(th), axis=1)
    dy = np.sum(wts * np.sin(th), axis=1)
    cx = seg.start.x + np.concatenate(([0.0], np.cumsum(dx)))
    cy = seg.start.y + np.concatenate(([0.0], np.cumsum(dy)))
    return np.column_stack([cx[owner], cy[owner]])


def clothoid_point(seg: ClothoidSegment, s: float) -> Pose2D:
    """Pose at arc length s along a clothoid segment."""
    if s < 0.0 or s > seg.length:
        raise GeometryError(f"arc length {s} outside [0, {seg.length}]")
    if s == 0.0:
        return seg.start
    pos = _clothoid_positions(seg, np.array([s]))[0]
    return Pose2D(float(pos[0]), float(pos[1]), seg.heading(s))


def sample_clothoid(seg: ClothoidSegment, ds: float) -> Polyline:
    """Sample at arc lengths {0, ds, 2ds, ...}, always including the endpoint."""
    if ds <= 0.0:
        raise GeometryError(f"sampling step must be > 0, got {ds}")
    n = int(math.floor(seg.length / ds + 1e-9))
    s_values = [i * ds for i in range(n + 1)]
    if seg.length - s_values[-1] > 1e-9:
        s_values.append(seg.length)
    else:
        s_values[-1] = seg.length
    s_arr = np.array(s_values[1:])
    positions = _clothoid_positions(seg, s_arr)
    xs = np.concatenate(([seg.start.x], positions[:, 0]))
    ys = np.concatenate(([seg.start.y], positions[:, 1]))
    s_all = np.asarray(s_values)
    k0, k1 = seg.curv_start, seg.curv_end
    raw = seg.start.heading + k0 * s_all + (k1 - k0) * s_all * s_all / (2.0 * seg.length)
    headings = (raw + math.pi) % TWO_PI - math.pi
    return Polyline(xs, ys, headings)


def offset_polyline(line: Polyline, d: float) -> Polyline:
    """Displace every point by d along its local left normal.

    Rejects offsets that exceed the local radius of curvature or that fold the
    line back on itself.
    """
    if d == 0.0:
        return Polyline(line.xs.copy(), line.ys.copy(), line.headings.copy())
    # local curvature estimate from heading increments
    dh = (np.diff(line.headings) + math.pi) % TWO_PI - math.pi
    ds = np.diff(line.arclens)
    kappa = dh / ds
    if np.any(np.abs(d * kappa) >= 1.0):
        raise GeometryError(f"offset {d} exceeds local radius of curvature")
    nx = -np.sin(line.headings)
    ny = np.cos(line.headings)
    xs = line.xs + d * nx
    ys = line.ys + d * ny
    # fold-back check: offset segments must not reverse direction
    sdx, sdy = np.diff(xs), np.diff(ys)
    odx, ody = np.diff(line.xs), np.diff(line.ys)
    if np.any(sdx * odx + sdy * ody <= 0.0):
        raise GeometryError("offset polyline self-intersects")
    return Polyline(xs, ys, line.headings.copy())


def cast_ray(
    origin: Pose2D,
    angle: float,
    boundaries: Sequence[Polyline],
    max_hits: int,
    max_range: float,
) -> list[tuple[float, float]]:
    """Intersect a ray with boundary polylines.

    Returns exactly max_hits points sorted by distance, padded with points at
    max_range along the ray.
    """
    if max_hits < 1:
        raise GeometryError("max_hits must be >= 1")
    if max_range <= 0.0:
        raise GeometryError("max_range must be > 0")
    ux, uy = math.cos(angle), math.sin(angle)
    distances: list[float] = []
    for line in boundaries:
        ts = _ray_polyline_ts(origin.x, origin.y, ux, uy, line.xs, line.ys)
        distances.extend(ts)
    distances = sorted(t for t in distances if 0.0 <= t <= max_range)[:max_hits]
    while len(distances) < max_hits:
        distances.append(max_range)
    return [(origin.x + t * ux, origin.y + t * uy) for t in distances]


def _ray_polyline_ts(ox, oy, ux, uy, xs, ys):
    """Ray parameters t of intersections with one polyline's segments."""
    px, py = xs[:-1], ys[:-1]
    dx, dy = np.diff(xs), np.diff(ys)
    denom = ux * dy - uy * dx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((px - ox) * dy - (py - oy) * dx) / denom
        r = (ux * (py - oy) - uy * (px - ox)) / -denom
    valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (r >= 0.0) & (r <= 1.0)
    return t[valid].tolist()


def segments_intersect(line_a: Polyline, line_b: Polyline) -> bool:
    """True if any segment of line_a crosses any segment of line_b."""
    ax, ay = line_a.xs, line_a.ys
    bx, by = line_b.xs, line_b.ys
    p1x, p1y = ax[:-1], ay[:-1]
    d1x, d1y = np.diff(ax), np.diff(ay)
    p2x, p2y = bx[:-1], by[:-1]
    d2x, d2y = np.diff(bx), np.diff(by)
    # pairwise solve p1 + t d1 = p2 + u d2
    denom = d1x[:, None] * d2y[None, :] - d1y[:, None] * d2x[None, :]
    rx = p2x[None, :] - p1x[:, None]
    ry = p2y[None, :] - p1y[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rx * d2y[None, :] - ry * d2x[None, :]) / denom
        u = (rx * d1y[:, None] - ry * d1x[:, None]) / denom
    hit = (np.abs(denom) > 1e-12) & (t > 1e-9) & (t < 1 - 1e-9) & (u > 1e-9) & (u < 1 - 1e-9)
    return bool(np.any(hit))
