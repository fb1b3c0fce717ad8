"""Observation catalog: per-observer fragments, merging, and frame stacking.

Each observer is a pure function over a SceneView snapshot. The builder
composes the enabled observers into one flat vector (plus an optional
birds-eye image) and a FrameStack keeps the last k merged frames.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from dojo.actions import SEMANTIC_ACTIONS, SemanticState, allowed_semantic_actions
from dojo.ego import EgoState, VehicleParams
from dojo.geometry import Polyline, Pose2D, cast_ray, normalize_angle
from dojo.roadgen import RoadNetwork, extract_boundaries

# normalization scales shared by the vector observers
VEHICLE_LENGTH_SCALE = 12.0  # m
VEHICLE_WIDTH_SCALE = 4.0  # m
NAV_POSITION_SCALE = 100.0  # m
NAV_SPACING = 10.0  # m between navigation waypoints along the route

SIGNAL_STATES = ("red", "yellow", "green")


@dataclass(frozen=True)
class VehicleView:
    """Pose and dimensions of one non-ego vehicle."""

    pose: Pose2D
    speed: float
    length: float
    width: float


@dataclass
class SceneView:
    """Read-only snapshot of everything the observers may look at."""

    network: RoadNetwork
    ego: EgoState
    params: VehicleParams
    v_max: float
    semantic: SemanticState
    vehicles: list[VehicleView]
    route: Polyline
    route_s: float  # ego arc position along the route
    signal: str | None = None  # upcoming signal state, None when unsignalized


@functools.lru_cache(maxsize=32)
def road_boundaries(network: RoadNetwork) -> tuple[Polyline, ...]:
    """Drivable-area boundary rings, cached per network instance."""
    return tuple(extract_boundaries(network.drivable_area()))


@functools.lru_cache(maxsize=32)
def _boundary_segments(network: RoadNetwork):
    """All boundary segments concatenated: (px, py, dx, dy) arrays."""
    px, py, dx, dy = [], [], [], []
    for line in road_boundaries(network):
        px.append(line.xs[:-1])
        py.append(line.ys[:-1])
        dx.append(np.diff(line.xs))
        dy.append(np.diff(line.ys))
    return (
        np.concatenate(px),
        np.concatenate(py),
        np.concatenate(dx),
        np.concatenate(dy),
    )


def _clip(values) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)


def obs_ego_state(view: SceneView) -> np.ndarray:
    """Six ego features, each normalized to [-1, 1].

    [v / v_max, accel, steering, yaw rate, lateral lane offset, heading
    error to the lane tangent]. At rest, centered and aligned, all six
    entries are zero.
    """
    ego, p = view.ego, view.params
    a = ego.accel / (p.accel_max if ego.accel >= 0 else -p.accel_min)
    yaw_rate = ego.speed * math.tan(ego.steering) / p.wheelbase
    yaw_scale = view.v_max * math.tan(p.steer_max) / p.wheelbase
    lane = view.network.lanes[view.semantic.lane_id]
    s, lat = lane.centerline.project(ego.x, ego.y)
    tangent = lane.centerline.interpolate(s).heading
    return _clip([
        ego.speed / view.v_max,
        a,
        ego.steering / p.steer_max,
        yaw_rate / yaw_scale,
        lat / (lane.width / 2.0),
        normalize_angle(tangent - ego.heading) / math.pi,
    ])


def obs_traffic_state(view: SceneView, radius: float, n: int) -> np.ndarray:
    """The n nearest vehicles within radius, 6 features each, zero padded.

    Per vehicle: ego-frame x and y (normalized by radius), relative
    heading, speed, length, width.
    """
    if n < 1 or radius <= 0.0:
        raise ValueError("need n >= 1 and radius > 0")
    pose = view.ego.pose
    ranked = []
    for veh in view.vehicles:
        d = math.hypot(veh.pose.x - pose.x, veh.pose.y - pose.y)
        if d <= radius:
            ranked.append((d, veh))
    ranked.sort(key=lambda item: item[0])
    out = np.zeros(6 * n)
    for i, (_, veh) in enumerate(ranked[:n]):
        lx, ly = pose.to_local(veh.pose.x, veh.pose.y)
        out[6 * i : 6 * i + 6] = [
            lx / radius,
            ly / radius,
            normalize_angle(veh.pose.heading - pose.heading) / math.pi,
            veh.speed / view.v_max,
            veh.length / VEHICLE_LENGTH_SCALE,
            veh.width / VEHICLE_WIDTH_SCALE,
        ]
    return _clip(out)


def obs_road_shape(
    view: SceneView, n_rays: int, m_hits: int, max_range: float
) -> np.ndarray:
    """Ego-frame boundary hit points for n rays spanning [-pi, pi).

    Each ray contributes m (x, y) pairs normalized by max_range; rays that
    leave the drivable area unobstructed pad at max_range.
    """
    if n_rays < 1 or m_hits < 1:
        raise ValueError("need n_rays >= 1 and m_hits >= 1")
    pose = view.ego.pose
    px, py, dx, dy = _boundary_segments(view.network)
    rel = -math.pi + 2.0 * math.pi * np.arange(n_rays) / n_rays
    ux = np.cos(pose.heading + rel)
    uy = np.sin(pose.heading + rel)
    rx = px - pose.x
    ry = py - pose.y
    num_t = rx * dy - ry * dx  # ray independent
    denom = ux[:, None] * dy[None, :] - uy[:, None] * dx[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num_t[None, :] / denom
        r = (ux[:, None] * ry[None, :] - uy[:, None] * rx[None, :]) / -denom
    valid = (
        (np.abs(denom) > 1e-12)
        & (t >= 0.0) & (t <= max_range)
        & (r >= 0.0) & (r <= 1.0)
    )
    t = np.where(valid, t, max_range)
    t.sort(axis=1)
    if t.shape[1] < m_hits:
        pad = np.full((n_rays, m_hits - t.shape[1]), max_range)
        t = np.concatenate([t, pad], axis=1)
    # a hit at parameter t sits at (t cos a, t sin a) in the ego frame
    out = np.empty((n_rays, m_hits, 2))
    out[:, :, 0] = t[:, :m_hits] * np.cos(rel)[:, None]
    out[:, :, 1] = t[:, :m_hits] * np.sin(rel)[:, None]
    return _clip(out.ravel() / max_range)


def obs_navigation(view: SceneView, n: int, spacing: float = NAV_SPACING) -> np.ndarray:
    """Next n route points: ego-frame position, relative heading, remaining
    route distance. The goal point repeats once the route runs out."""
    if n < 1:
        raise ValueError("need n >= 1")
    pose = view.ego.pose
    total = view.route.length
    s = spacing * math.ceil(max(view.route_s - 1e-6, 0.0) / spacing)
    out = np.empty(4 * n)
    for i in range(n):
        s_i = min(s + i * spacing, total)
        ref = view.route.interpolate(s_i)
        lx, ly = pose.to_local(ref.x, ref.y)
        out[4 * i : 4 * i + 4] = [
            lx / NAV_POSITION_SCALE,
            ly / NAV_POSITION_SCALE,
            normalize_angle(ref.heading - pose.heading) / math.pi,
            (total - s_i) / max(total, 1e-9),
        ]
    return _clip(out)


def obs_traffic_light(view: SceneView) -> np.ndarray:
    """One-hot {red, yellow, green}; unsignalized roads read as green."""
    state = view.signal if view.signal is not None else "green"
    if state not in SIGNAL_STATES:
        raise ValueError(f"unknown signal state {state!r}")
    out = np.zeros(3)
    out[SIGNAL_STATES.index(state)] = 1.0
    return out


def obs_road_options(view: SceneView) -> np.ndarray:
    """Availability mask over the 5 semantic actions (1 = not a no-op)."""
    mask = allowed_semantic_actions(view.semantic, view.network, view.v_max)
    return np.array([1.0 if m else 0.0 for m in mask])


def obs_birds_eye(view: SceneView, h: int, w: int, scale: float) -> np.ndarray:
    """Ego-centered, ego-aligned binary raster, 3 x h x w.

    Channel 0: drivable area. Channel 1: route ahead plus the ego
    footprint. Channel 2: other vehicles' footprints. Pixel (i, j) covers
    the ego-frame point x = (h/2 - i - 1/2) * scale (forward),
    y = (w/2 - j - 1/2) * scale (left).
    """
    if h < 8 or w < 8:
        raise ValueError("image must be at least 8 x 8")
    if scale <= 0.0:
        raise ValueError("scale must be > 0")
    pose = view.ego.pose
    fx = (h / 2.0 - np.arange(h) - 0.5) * scale
    fy = (w / 2.0 - np.arange(w) - 0.5) * scale
    gx, gy = np.meshgrid(fx, fy, indexing="ij")
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    wx = pose.x + c * gx - s * gy
    wy = pose.y + s * gx + c * gy

    img = np.zeros((3, h, w))
    img[0] = shapely.contains_xy(view.network.drivable_area(), wx, wy)

    # route ahead, drawn as ~1.5 px thick dots sampled every half pixel
    half_diag = scale * math.hypot(h, w) / 2.0
    s0, s1 = view.route_s, min(view.route_s + half_diag, view.route.length)
    for sr in np.arange(s0, s1 + 1e-9, 0.5 * scale):
        ref = view.route.interpolate(min(sr, view.route.length))
        lx, ly = pose.to_local(ref.x, ref.y)
        i = int(h / 2.0 - lx / scale)
        j = int(w / 2.0 - ly / scale)
        img[1, max(i - 1, 0) : i + 1, max(j - 1, 0) : j + 1] = 1.0

    boxes = [_footprint(pose, view.params.length, view.params.width)]
    img[1][shapely.contains_xy(boxes[0], wx, wy)] = 1.0
    for veh in view.vehicles:
        lx, ly = pose.to_local(veh.pose.x, veh.pose.y)
        if abs(lx) > half_diag + veh.length or abs(ly) > half_diag + veh.length:
            continue
        box = _footprint(veh.pose, veh.length, veh.width)
        img[2][shapely.contains_xy(box, wx, wy)] = 1.0
    return img


def _footprint(pose: Pose2D, length: float, width: float):
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    hl, hw = length / 2.0, width / 2.0
    corners = [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)]
    return shapely.Polygon(
        [(pose.x + c * dx - s * dy, pose.y + s * dx + c * dy) for dx, dy in corners]
    )


@dataclass(frozen=True)
class ObservationFragment:
    observer: str
    payload: np.ndarray
    shape: tuple[int, ...]

    def __post_init__(self):
        if self.payload.size != int(np.prod(self.shape)):
            raise ValueError("payload length does not match declared shape")
        if not np.all(np.isfinite(self.payload)):
            raise ValueError("payload must be finite")


@dataclass(frozen=True)
class Observation:
    vector: np.ndarray  # k stacked merged vectors, oldest first
    image: np.ndarray | None  # (3k, h, w) when birds-eye is enabled
    k: int


VECTOR_OBSERVERS = (
    "ego_state",
    "traffic_state",
    "road_shape",
    "navigation",
    "traffic_light",
    "road_options",
)


@dataclass(frozen=True)
class ObservationSpec:
    """Enabled observers and their parameters."""

    observers: tuple[str, ...] = VECTOR_OBSERVERS
    n_vehicles: int = 4
    radius: float = 50.0
    n_rays: int = 8
    m_hits: int = 2
    ray_range: float = 50.0
    n_waypoints: int = 3
    image_h: int = 64
    image_w: int = 64
    image_scale: float = 1.0  # m per pixel
    stack: int = 5

    def __post_init__(self):
        known = set(VECTOR_OBSERVERS) | {"birds_eye"}
        for name in self.observers:
            if name not in known:
                raise ValueError(f"unknown observer {name!r}")
        if min(self.n_vehicles, self.n_rays, self.m_hits, self.n_waypoints) < 1:
            raise ValueError("observer counts must be >= 1")
        if self.radius <= 0.0 or self.ray_range <= 0.0:
            raise ValueError("radius must be > 0")
        if self.stack < 1:
            raise ValueError("stack depth must be >= 1")

    def fragment_sizes(self) -> dict[str, int]:
        sizes = {
            "ego_state": 6,
            "traffic_state": 6 * self.n_vehicles,
            "road_shape": 2 * self.n_rays * self.m_hits,
            "navigation": 4 * self.n_waypoints,
            "traffic_light": 3,
            "road_options": 5,
        }
        return {n: sizes[n] for n in self.observers if n != "birds_eye"}

    @property
    def vector_size(self) -> int:
        return sum(self.fragment_sizes().values())

    @property
    def has_image(self) -> bool:
        return "birds_eye" in self.observers

    def manifest(self) -> dict:
        """Machine-readable layout so external consumers can parse shapes."""
        out = {
            "observers": list(self.observers),
            "fragments": self.fragment_sizes(),
            "vector_size": self.vector_size,
            "stack": self.stack,
            "stacked_vector_size": self.stack * self.vector_size,
            "semantic_actions": list(SEMANTIC_ACTIONS),
        }
        if self.has_image:
            out["image_shape"] = [3 * self.stack, self.image_h, self.image_w]
        return out

    def fragments(self, view: SceneView) -> list[ObservationFragment]:
        """Run every enabled observer against the view."""
        out = []
        for name in self.observers:
            if name == "ego_state":
                payload = obs_ego_state(view)
            elif name == "traffic_state":
                payload = obs_traffic_state(view, self.radius, self.n_vehicles)
            elif name == "road_shape":
                payload = obs_road_shape(view, self.n_rays, self.m_hits, self.ray_range)
            elif name == "navigation":
                payload = obs_navigation(view, self.n_waypoints)
            elif name == "traffic_light":
                payload = obs_traffic_light(view)
            elif name == "road_options":
                payload = obs_road_options(view)
            else:
                payload = obs_birds_eye(view, self.image_h, self.image_w, self.image_scale)
            out.append(ObservationFragment(name, payload, payload.shape))
        return out


def merge(fragments: list[ObservationFragment]) -> tuple[np.ndarray, np.ndarray | None]:
    """Concatenate vector fragments in declared order; pass the image through."""
    vectors, image = [], None
    for f in fragments:
        if f.observer == "birds_eye":
            image = f.payload
        else:
            vectors.append(f.payload)
    vec = np.concatenate(vectors) if vectors else np.zeros(0)
    return vec, image


def merge_and_stack(frames: list[list[ObservationFragment]], k: int = 5) -> Observation:
    """Merge per-step fragment lists (oldest first) and stack the last k.

    Histories shorter than k are left-padded by repeating the first frame,
    so the post-reset stack is k copies of frame 0.
    """
    if not frames or k < 1:
        raise ValueError("need at least one frame and k >= 1")
    merged = [merge(f) for f in frames[-k:]]
    merged = [merged[0]] * (k - len(merged)) + merged
    sizes = {m[0].shape for m in merged}
    if len(sizes) != 1:
        raise ValueError("inconsistent fragment shapes across frames")
    vec = np.concatenate([m[0] for m in merged])
    images = [m[1] for m in merged]
    image = np.concatenate(images, axis=0) if images[0] is not None else None
    return Observation(vec, image, k)


class FrameStack:
    """Keeps the most recent k merged frames between environment steps."""

    def __init__(self, spec: ObservationSpec):
        self.spec = spec
        self._frames: list[list[ObservationFragment]] = []

    def reset(self) -> None:
        self._frames.clear()

    def push(self, view: SceneView) -> Observation:
        self._frames.append(self.spec.fragments(view))
        del self._frames[: -self.spec.stack]
        return merge_and_stack(self._frames, self.spec.stack)
