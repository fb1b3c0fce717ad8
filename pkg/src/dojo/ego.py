"""Ego-vehicle motion models: kinematic single-track and target-position-speed.

Both steppers are pure functions; more elaborate models (drift, multi-body)
can plug in through the same (state, control, params, dt) -> state signature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources

import yaml

from dojo.geometry import Pose2D, normalize_angle


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    heading: float
    speed: float
    steering: float
    accel: float = 0.0  # last applied acceleration

    @property
    def pose(self) -> Pose2D:
        return Pose2D(self.x, self.y, self.heading)


@dataclass(frozen=True)
class VehicleParams:
    name: str
    wheelbase: float
    length: float
    width: float
    steer_max: float
    steer_rate_max: float
    accel_min: float
    accel_max: float
    v_max: float


def load_presets() -> dict[str, VehicleParams]:
    text = resources.files("dojo.data").joinpath("vehicle_params.yaml").read_text()
    raw = yaml.safe_load(text)
    return {name: VehicleParams(name=name, **vals) for name, vals in raw.items()}


_PRESETS: dict[str, VehicleParams] | None = None


def get_preset(name: str) -> VehicleParams:
    global _PRESETS
    if _PRESETS is None:
        _PRESETS = load_presets()
    return _PRESETS[name]


def _clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def step_kinematic_single_track(
    state: EgoState,
    steer_velocity: float,
    accel: float,
    params: VehicleParams,
    dt: float,
) -> EgoState:
    """Kinematic bicycle step: RK4 with internal sub-steps of at most 50 ms.

    Inputs are clamped to the parameter limits before integration; speed and
    steering angle are clamped back into their ranges afterwards.
    """
    sv = _clamp(steer_velocity, -params.steer_rate_max, params.steer_rate_max)
    a = _clamp(accel, params.accel_min, params.accel_max)
    wb = params.wheelbase

    def deriv(x, y, psi, v, delta):
        return (
            v * math.cos(psi),
            v * math.sin(psi),
            v * math.tan(delta) / wb,
            a,
            sv,
        )

    n_sub = max(1, int(math.ceil(dt / 0.05 - 1e-9)))
    h = dt / n_sub
    s0 = (state.x, state.y, state.heading, state.speed, state.steering)
    for _ in range(n_sub):
        k1 = deriv(*s0)
        k2 = deriv(*(s + h / 2 * k for s, k in zip(s0, k1)))
        k3 = deriv(*(s + h / 2 * k for s, k in zip(s0, k2)))
        k4 = deriv(*(s + h * k for s, k in zip(s0, k3)))
        s0 = tuple(
            s + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            for s, a1, a2, a3, a4 in zip(s0, k1, k2, k3, k4)
        )
    x, y, psi, v, delta = s0
    return EgoState(
        x=x,
        y=y,
        heading=normalize_angle(psi),
        speed=_clamp(v, 0.0, params.v_max),
        steering=_clamp(delta, -params.steer_max, params.steer_max),
        accel=a,
    )


def step_tps(
    state: EgoState,
    waypoint: Pose2D,
    target_speed: float,
    dt: float,
) -> EgoState:
    """Interpolate position and heading toward a waypoint at the commanded speed.

    Moves min(v*dt, remaining distance) along the straight connector; heading
    turns toward the connector direction by the covered distance fraction
    (shortest arc). Never overshoots the waypoint.
    """
    if target_speed < 0.0:
        raise ValueError("target speed must be >= 0")
    dist = math.hypot(waypoint.x - state.x, waypoint.y - state.y)
    if target_speed == 0.0 or dist < 1e-12:
        return replace(state, speed=target_speed, accel=0.0, steering=0.0)
    step = min(target_speed * dt, dist)
    frac = step / dist
    direction = math.atan2(waypoint.y - state.y, waypoint.x - state.x)
    heading = normalize_angle(state.heading + frac * normalize_angle(direction - state.heading))
    return EgoState(
        x=state.x + frac * (waypoint.x - state.x),
        y=state.y + frac * (waypoint.y - state.y),
        heading=heading,
        speed=target_speed,
        steering=0.0,
        accel=(target_speed - state.speed) / dt,
    )
