"""Two-criterion (safety + incentive) lane-change decisions."""

from __future__ import annotations

from dataclasses import dataclass

from dojo.traffic.idm import idm_acceleration
from dojo.traffic.personality import DrivingPersonality

KEEP = "keep"
LEFT = "left"
RIGHT = "right"

INCENTIVE_THRESHOLD = 0.3  # m/s^2, scaled down by lc_speed_gain
KEEP_RIGHT_BIAS = 0.1  # m/s^2 per unit lc_keep_right


@dataclass
class LaneView:
    """What an agent sees in one lane: nearest leader and follower."""

    limit: float
    leader_gap: float | None = None
    leader_dv: float = 0.0
    follower_gap: float | None = None
    follower_speed: float = 0.0
    follower_p: DrivingPersonality | None = None
    mandatory: bool = False


def _safe(v: float, view: LaneView, p: DrivingPersonality) -> bool:
    margin = max(1.0, 0.5 * p.min_gap)
    if view.leader_gap is not None:
        if view.leader_gap < margin:
            return False
        own = idm_acceleration(v, view.limit, view.leader_gap, view.leader_dv, p)
        own_bound = -0.9 * p.emergency_decel if view.mandatory else -p.decel
        if own < own_bound:
            return False
    if view.follower_gap is None:
        return True
    if view.follower_gap < margin:
        return False
    fp = view.follower_p or p
    induced = idm_acceleration(
        view.follower_speed, view.limit, view.follower_gap,
        view.follower_speed - v, fp,
    )
    return induced >= -fp.decel


def lane_change_decision(
    agent, neighbors: dict[str, LaneView], p: DrivingPersonality
) -> str:
    """Pick keep/left/right from lane views.

    Route-mandatory changes skip the incentive test but never the safety
    test. Discretionary changes need a speed-gain incentive above a
    threshold shrunk by lc_speed_gain, with a keep-right bias and a
    politeness penalty for hard-braking the new follower.
    """
    v = agent.speed
    cur = neighbors[KEEP]
    a_cur = idm_acceleration(v, cur.limit, cur.leader_gap, cur.leader_dv, p)

    best, best_score = KEEP, 0.0
    for side in (LEFT, RIGHT):
        view = neighbors.get(side)
        if view is None or not _safe(v, view, p):
            continue
        if view.mandatory:
            return side
        a_new = idm_acceleration(v, view.limit, view.leader_gap, view.leader_dv, p)
        incentive = a_new - a_cur
        incentive += KEEP_RIGHT_BIAS * p.lc_keep_right * (1 if side == RIGHT else -1)
        if view.follower_gap is not None:
            fp = view.follower_p or p
            induced = idm_acceleration(
                view.follower_speed, view.limit, view.follower_gap,
                view.follower_speed - v, fp,
            )
            incentive -= p.lc_cooperative * max(0.0, -induced - 0.5)
        threshold = INCENTIVE_THRESHOLD / max(p.lc_speed_gain, 1e-6)
        if incentive > threshold and incentive > best_score:
            best, best_score = side, incentive
    return best
