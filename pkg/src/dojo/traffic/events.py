"""Randomized traffic events around the ego vehicle.

Two event kinds: emergency-brake triggers for vehicles inside the forward
cone of the ego, and softer multiplicative desired-speed variations for
vehicles inside a radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from dojo.geometry import Pose2D


@dataclass(frozen=True)
class EventConfig:
    cone_half_angle: float = math.radians(15.0)
    cone_range: float = 40.0
    brake_prob: float = 0.01  # per vehicle per environment step
    brake_duration: float = 2.0
    variation_radius: float = 60.0
    variation_prob: float = 0.02
    variation_amplitude: float = 0.2
    variation_duration: float = 5.0


def apply_traffic_events(ego_pose: Pose2D, world, rng, cfg: EventConfig) -> dict[int, dict]:
    """Roll event triggers and write overrides onto the affected agents.

    Returns {agent_id: override} for everything applied this step.
    """
    overrides: dict[int, dict] = {}
    for aid in sorted(world.agents):
        agent = world.agents[aid]
        x, y = world.position_of(agent)
        lx, ly = ego_pose.to_local(x, y)
        dist = math.hypot(lx, ly)
        in_cone = (
            0.0 < lx
            and dist <= cfg.cone_range
            and abs(math.atan2(ly, lx)) <= cfg.cone_half_angle
        )
        if in_cone and cfg.brake_prob > 0 and rng.random() < cfg.brake_prob:
            agent.brake_timer = cfg.brake_duration
            overrides[aid] = {"kind": "emergency_brake", "duration": cfg.brake_duration}
            continue
        if (
            dist <= cfg.variation_radius
            and agent.offset_timer <= 0
            and cfg.variation_prob > 0
            and rng.random() < cfg.variation_prob
        ):
            offset = 1.0 + rng.uniform(-cfg.variation_amplitude, cfg.variation_amplitude)
            agent.speed_offset = offset
            agent.offset_timer = cfg.variation_duration
            overrides[aid] = {"kind": "speed_variation", "offset": offset}
    return overrides
