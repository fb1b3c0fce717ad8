"""Car-following acceleration law (IDM with EIDM-style extensions applied by the caller)."""

from __future__ import annotations

import math

from dojo.traffic.personality import DrivingPersonality


def desired_speed(lane_limit: float, p: DrivingPersonality) -> float:
    return min(p.speed_factor * lane_limit, p.desired_max_speed)


def idm_acceleration(
    v: float,
    v_desired: float,
    gap: float | None,
    dv: float,
    p: DrivingPersonality,
) -> float:
    """IDM acceleration, bounded to [-emergency_decel, accel].

    v_desired is the lane speed limit; the effective free speed is
    speed_factor * limit capped by desired_max_speed. dv is the closing
    speed toward the leader (positive when approaching).
    """
    v0 = desired_speed(v_desired, p)
    if v0 <= 1e-9:
        a = -p.decel if v > 0 else 0.0
        return max(a, -p.emergency_decel)
    r = v / v0
    if p.delta == 4.0:
        rr = r * r
        acc = 1.0 - rr * rr
    else:
        acc = 1.0 - r**p.delta
    if gap is not None:
        if gap <= 0:
            return -p.emergency_decel
        # dynamic part floored at 0: an opening gap never adds thrust
        dyn = max(0.0, v * p.tau + v * dv / (2.0 * math.sqrt(p.accel * p.decel)))
        s_star = p.min_gap + dyn
        acc -= (s_star / gap) ** 2
    a = p.accel * acc
    if a < -p.emergency_decel:
        return -p.emergency_decel
    if a > p.accel:
        return p.accel
    return a


def braking_to_target(v: float, v_target: float, dist: float) -> float:
    """Constant deceleration that reaches v_target after dist meters (<= 0)."""
    if v <= v_target:
        return 0.0
    return (v_target * v_target - v * v) / (2.0 * max(dist, 0.1))
