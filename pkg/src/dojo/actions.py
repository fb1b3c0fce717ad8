"""Action spaces: continuous/discrete control, semantic actions, Stanley tracking.

Semantic actions mutate a SemanticState (lane assignment + target speed);
the low-level layer turns lane paths or explicit waypoint plans into control
commands (Stanley) or TPS targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from dojo.ego import EgoState, VehicleParams
from dojo.geometry import Polyline, Pose2D, normalize_angle
from dojo.roadgen import RoadNetwork

NOOP = "noop"
FASTER = "faster"
SLOWER = "slower"
LANE_LEFT = "lane_left"
LANE_RIGHT = "lane_right"
SEMANTIC_ACTIONS = (NOOP, FASTER, SLOWER, LANE_LEFT, LANE_RIGHT)

DEFAULT_DELTA_V = 1.0  # m/s per faster/slower action


@dataclass(frozen=True)
class ControlAction:
    steer_velocity: float  # normalized [-1, 1], scaled to +-steer_rate_max
    pedal: float  # [-1, 1]; positive -> [0, a_max], negative -> [a_min, 0]

    def __post_init__(self):
        if not (-1.0 <= self.steer_velocity <= 1.0 and -1.0 <= self.pedal <= 1.0):
            raise ValueError("control components must lie in [-1, 1]")

    def physical(self, params: VehicleParams) -> tuple[float, float]:
        """Denormalize to (steer velocity rad/s, acceleration m/s^2)."""
        sv = self.steer_velocity * params.steer_rate_max
        a = self.pedal * (params.accel_max if self.pedal >= 0 else -params.accel_min)
        return sv, a


@dataclass(frozen=True)
class SemanticState:
    lane_id: str
    branch_idx: int  # chosen outgoing branch at the upcoming junction
    target_speed: float


def discretize_controls(levels: int = 5) -> list[ControlAction]:
    """Joint table of levels^2 actions with equidistant per-axis values."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    axis = np.linspace(-1.0, 1.0, levels)
    return [
        ControlAction(float(sv), float(pedal)) for sv in axis for pedal in axis
    ]


def _branching(network: RoadNetwork, lane_id: str) -> list[str]:
    return network.lanes[lane_id].successors


def allowed_semantic_actions(
    s: SemanticState, network: RoadNetwork, v_max: float
) -> list[bool]:
    """Mask over SEMANTIC_ACTIONS; an action is allowed iff it changes state.

    noop is always reported allowed.
    """
    lane = network.lanes[s.lane_id]
    branches = _branching(network, s.lane_id)
    lateral_left = len(branches) > 1 or lane.left_id is not None
    lateral_right = len(branches) > 1 or lane.right_id is not None
    return [
        True,
        s.target_speed < v_max,
        s.target_speed > 0.0,
        lateral_left,
        lateral_right,
    ]


def apply_semantic(
    a: str,
    s: SemanticState,
    network: RoadNetwork,
    dv: float = DEFAULT_DELTA_V,
    v_max: float = 36.111,
) -> SemanticState:
    """Total mapping (a_t, l_t, v_t) -> (l_t+1, v_t+1); illegal actions are no-ops."""
    if a not in SEMANTIC_ACTIONS:
        raise ValueError(f"unknown semantic action {a!r}")
    if a == NOOP:
        return s
    if a == FASTER:
        return replace(s, target_speed=min(s.target_speed + dv, v_max))
    if a == SLOWER:
        return replace(s, target_speed=max(s.target_speed - dv, 0.0))
    lane = network.lanes[s.lane_id]
    branches = _branching(network, s.lane_id)
    if len(branches) > 1:
        # junction upcoming: cycle the chosen outgoing branch
        step = -1 if a == LANE_LEFT else 1
        return replace(s, branch_idx=(s.branch_idx + step) % len(branches))
    target = lane.left_id if a == LANE_LEFT else lane.right_id
    if target is None:
        return s
    return replace(s, lane_id=target, branch_idx=0)


@dataclass(frozen=True)
class StanleyGains:
    # cross-track gain; values much above ~1 limit-cycle against the slow
    # steering-rate actuator at the 200 ms control period
    k: float = 0.8
    v_soft: float = 1.0  # m/s, low-speed softening
    servo: float = 4.0  # steering-angle servo gain, 1/s
    speed: float = 1.0  # proportional speed-control gain, 1/s
    # attenuate the steering target above this speed: the yaw-loop gain grows
    # with v while actuator rate and sampling period stay fixed
    v_sched: float = 8.0  # m/s


def stanley_steering_angle(
    ego: EgoState, path: Polyline, gains: StanleyGains
) -> float:
    """Target steering angle from heading error and signed cross-track error.

    Positive cross-track error means the ego is left of the path, so the
    correction steers right (negative).
    """
    s, e = path.project(ego.x, ego.y)
    ref = path.interpolate(s)
    theta_e = normalize_angle(ref.heading - ego.heading)
    delta = theta_e - math.atan(gains.k * e / (ego.speed + gains.v_soft))
    return delta * min(1.0, gains.v_sched / (ego.speed + 0.1))


def stanley_control(
    ego: EgoState,
    path: Polyline,
    v_target: float,
    params: VehicleParams,
    gains: StanleyGains | None = None,
) -> ControlAction:
    gains = gains or StanleyGains()
    delta_t = stanley_steering_angle(ego, path, gains)
    delta_t = min(max(delta_t, -params.steer_max), params.steer_max)
    sv = gains.servo * (delta_t - ego.steering) / params.steer_rate_max
    a = gains.speed * (v_target - ego.speed)
    pedal = a / params.accel_max if a >= 0 else a / -params.accel_min
    return ControlAction(
        min(max(sv, -1.0), 1.0),
        min(max(pedal, -1.0), 1.0),
    )


@dataclass
class TrackingPlan:
    """Explicit waypoint plan that replaces the semantic lane-path source."""

    waypoints: list[Pose2D]
    speeds: list[float]
    index: int = 0
    reach_tolerance: float = 2.0  # m

    @property
    def exhausted(self) -> bool:
        return self.index >= len(self.waypoints)

    def current(self) -> tuple[Pose2D, float]:
        i = min(self.index, len(self.waypoints) - 1)
        return self.waypoints[i], self.speeds[i]

    def advance(self, x: float, y: float) -> None:
        """Move past waypoints already reached by the given position."""
        while self.index < len(self.waypoints):
            wp = self.waypoints[self.index]
            if math.hypot(wp.x - x, wp.y - y) > self.reach_tolerance:
                break
            self.index += 1

    def as_polyline(self) -> Polyline:
        xs = np.array([w.x for w in self.waypoints])
        ys = np.array([w.y for w in self.waypoints])
        if len(xs) == 1:
            xs = np.array([xs[0], xs[0] + 1e-6])
            ys = np.array([ys[0], ys[0]])
        h = np.arctan2(np.diff(ys, append=ys[-1]), np.diff(xs, append=xs[-1]))
        if len(h) > 1:
            h[-1] = h[-2]
        return Polyline(xs, ys, h)


def set_waypoints(waypoints, speeds) -> TrackingPlan:
    """Build a tracking plan from waypoint poses and per-waypoint speeds."""
    waypoints = list(waypoints)
    speeds = list(speeds)
    if not waypoints:
        raise ValueError("at least one waypoint required")
    if len(speeds) != len(waypoints):
        raise ValueError("speeds must match waypoints one-to-one")
    return TrackingPlan(waypoints, speeds)
