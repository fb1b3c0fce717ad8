"""Oriented-rectangle collision tests for vehicle footprints."""

from __future__ import annotations

import math


def rect_corners(x: float, y: float, heading: float, length: float, width: float):
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = length / 2.0, width / 2.0
    return [
        (x + c * hl - s * hw, y + s * hl + c * hw),
        (x + c * hl + s * hw, y + s * hl - c * hw),
        (x - c * hl + s * hw, y - s * hl - c * hw),
        (x - c * hl - s * hw, y - s * hl + c * hw),
    ]


def _project(corners, ax: float, ay: float) -> tuple[float, float]:
    dots = [cx * ax + cy * ay for cx, cy in corners]
    return min(dots), max(dots)


def rects_overlap(a, b) -> bool:
    """Separating-axis test between two convex quads given as corner lists."""
    for rect in (a, b):
        for i in range(4):
            x1, y1 = rect[i]
            x2, y2 = rect[(i + 1) % 4]
            ax, ay = y2 - y1, x1 - x2  # edge normal
            amin, amax = _project(a, ax, ay)
            bmin, bmax = _project(b, ax, ay)
            if amax < bmin or bmax < amin:
                return False
    return True


def boxes_collide(
    pose_a: tuple[float, float, float], dims_a: tuple[float, float],
    pose_b: tuple[float, float, float], dims_b: tuple[float, float],
) -> bool:
    """pose = (x, y, heading), dims = (length, width); cheap distance pre-check."""
    dx = pose_a[0] - pose_b[0]
    dy = pose_a[1] - pose_b[1]
    reach = (dims_a[0] + dims_a[1] + dims_b[0] + dims_b[1]) / 2.0
    if dx * dx + dy * dy > reach * reach:
        return False
    return rects_overlap(
        rect_corners(*pose_a, *dims_a),
        rect_corners(*pose_b, *dims_b),
    )
