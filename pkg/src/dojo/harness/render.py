"""Top-down rendering of maps and recorded episodes."""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Polygon

from dojo.env import EpisodeConfig, build_route_line
from dojo.roadgen import KIND_INTERNAL, RoadNetwork, generate_map
from dojo.traffic import rect_corners


def draw_network(ax, network: RoadNetwork) -> None:
    """Road surface, lane centerlines and boundary rings."""
    area = network.drivable_area()
    polys = list(area.geoms) if area.geom_type == "MultiPolygon" else [area]
    for poly in polys:
        ax.add_patch(Polygon(np.asarray(poly.exterior.coords), closed=True,
                             facecolor="0.85", edgecolor="none", zorder=0))
        for ring in poly.interiors:
            ax.add_patch(Polygon(np.asarray(ring.coords), closed=True,
                                 facecolor="white", edgecolor="none", zorder=1))
    for lane in network.lanes.values():
        style = ":" if lane.kind == KIND_INTERNAL else "--"
        ax.plot(lane.centerline.xs, lane.centerline.ys, style,
                color="0.6", linewidth=0.6, zorder=2)
    for b in network.boundaries:
        ax.plot(b.xs, b.ys, "-", color="0.3", linewidth=1.0, zorder=3)
    ax.set_aspect("equal")
    ax.set_axis_off()


def render_map(network: RoadNetwork, out_path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 8))
    draw_network(ax, network)
    fig.savefig(out_path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _draw_box(ax, x, y, heading, length, width, color, zorder=5):
    corners = rect_corners(x, y, heading, length, width)
    ax.add_patch(Polygon(corners, closed=True, facecolor=color,
                         edgecolor="black", linewidth=0.4, zorder=zorder))


def load_log(path: str | Path) -> list[dict]:
    with open(path) as f:
        records = [json.loads(line) for line in f if line.strip()]
    if not records or "config_hash" not in records[0]:
        raise ValueError(f"{path}: not an episode log (missing header)")
    return records


def render_episode(
    log_path: str | Path,
    out_dir: str | Path,
    network: RoadNetwork | None = None,
    config: EpisodeConfig | None = None,
) -> list[Path]:
    """One PNG frame per log record: header state plus every step."""
    records = load_log(log_path)
    header = records[0]
    if config is not None and config.hash() != header["config_hash"]:
        raise ValueError(
            f"config hash mismatch: log has {header['config_hash']}, "
            f"config is {config.hash()}"
        )
    if network is None:
        network = generate_map(header["scenario"], header["map_seed"])
    route_line = build_route_line(network, header["route"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    xs = [header["ego"][0]] + [r["ego"][0] for r in records[1:]]
    ys = [header["ego"][1]] + [r["ego"][1] for r in records[1:]]
    pad = 40.0
    extent = (min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad)

    paths = []
    for i, rec in enumerate(records):
        fig, ax = plt.subplots(figsize=(8, 8))
        draw_network(ax, network)
        ax.plot(route_line.xs, route_line.ys, "-", color="tab:blue",
                linewidth=1.2, alpha=0.7, zorder=4)
        for s in header["checkpoints"]:
            p = route_line.interpolate(min(s, route_line.length))
            ax.plot(p.x, p.y, "o", color="tab:blue", markersize=4, zorder=4)
        end = route_line.end()
        ax.plot(end.x, end.y, "*", color="tab:green", markersize=12, zorder=4)
        for vx, vy, vh, _ in rec["vehicles"].values():
            _draw_box(ax, vx, vy, vh, 4.6, 1.8, "tab:orange")
        ex, ey, eh, _ = rec["ego"]
        _draw_box(ax, ex, ey, eh, 4.508, 1.61, "tab:red", zorder=6)
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        path = out / f"frame_{i:04d}.png"
        fig.savefig(path, dpi=90)
        plt.close(fig)
        paths.append(path)
    return paths
