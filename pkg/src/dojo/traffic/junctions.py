"""Right-of-way arbitration at junctions."""

from __future__ import annotations

from dataclasses import dataclass

from dojo.roadgen import Junction

PROCEED = "proceed"
YIELD = "yield"


@dataclass
class Approach:
    """One agent's relation to a junction at decision time."""

    agent: object  # VehicleAgent
    connection: str  # internal lane the agent takes (or is on)
    dist: float  # meters to the junction entry; <= 0 when inside
    inside: bool = False
    committed: bool = False


def conflict_types(junction: Junction, lanes) -> dict[frozenset, str]:
    """Classify each conflict pair as 'merge' (shared end point) or 'cross'."""
    import math

    out = {}
    for a, b in junction.conflicts:
        ea = lanes[a].centerline.end()
        eb = lanes[b].centerline.end()
        kind = "merge" if math.hypot(ea.x - eb.x, ea.y - eb.y) < 0.5 else "cross"
        out[frozenset((a, b))] = kind
    return out

def junction_arbitration(
    junction: Junction,
    approaches: list[Approach],
    rng,
    ctypes: dict[frozenset, str] | None = None,
    ignore_prob_override: float | None = None,
    lengths: dict[str, float] | None = None,
) -> dict[int, str]:
    """Per-agent proceed/yield decision.

    Agents inside the junction or already committed always proceed. Others
    are processed nearest-first: an agent yields when a conflicting crossing
    connection is occupied or claimed, or when a higher-priority foe will
    arrive within its accepted gap. Slow foes may be probabilistically
    overlooked (jm_ignore_foe_prob / jm_ignore_foe_speed), which is what
    makes junction conflicts possible at all.
    """
    if ctypes is None:
        ctypes = {frozenset(pair): "cross" for pair in junction.conflicts}
    conflict_map: dict[str, list[str]] = {}
    for a, b in junction.conflicts:
        conflict_map.setdefault(a, []).append(b)
        conflict_map.setdefault(b, []).append(a)

    result: dict[int, str] = {}
    pending = []
    for ap in approaches:
        if ap.inside or ap.committed:
            result[ap.agent.id] = PROCEED
        else:
            pending.append(ap)
    pending.sort(key=lambda ap: (ap.dist, ap.agent.id))

    by_connection: dict[str, list[Approach]] = {}
    for ap in approaches:
        by_connection.setdefault(ap.connection, []).append(ap)

    for ap in pending:
        p = ap.agent.personality
        blocked = False
        for c2 in conflict_map.get(ap.connection, ()):
            kind = ctypes[frozenset((ap.connection, c2))]
            prob = p.jm_ignore_foe_prob if ignore_prob_override is None else ignore_prob_override
            for other in by_connection.get(c2, ()):
                if (
                    prob > 0.0
                    and other.agent.speed < p.jm_ignore_foe_speed
                    and rng.random() < prob
                ):
                    continue  # foe overlooked
                if other.inside or other.committed or result.get(other.agent.id) == PROCEED:
                    if kind == "cross":
                        blocked = True
                        break
                    # merge ordering follows distance to the merge point:
                    # whoever is closer leads and the other falls in behind
                    # via car-following against a virtual leader
                    if lengths is not None:
                        my_d = ap.dist + lengths[ap.connection]
                        foe_d = other.dist + lengths[c2]
                        if my_d >= foe_d:
                            # foe leads; entering is only safe if we do not
                            # catch it inside the merge zone
                            t_me = my_d / max(ap.agent.speed, 0.5)
                            t_foe = foe_d / max(other.agent.speed, 0.5)
                            if t_me < t_foe:
                                blocked = True
                                break
                        else:
                            # we would lead; the committed foe must be able
                            # to fall in behind without harsh braking
                            gap = (
                                foe_d - my_d
                                - other.agent.half_length - ap.agent.half_length
                            )
                            dv = other.agent.speed - ap.agent.speed
                            if gap < 2.0 or (
                                dv > 0.0 and dv * dv / (2.0 * max(gap, 0.1)) > 3.0
                            ):
                                blocked = True
                                break
                    continue
                if result.get(other.agent.id) == YIELD:
                    continue
                if junction.priority[c2] >= junction.priority[ap.connection]:
                    continue  # foe yields to us
                t_foe = other.dist / max(other.agent.speed, 0.5)
                window = p.jm_gap_accept if kind == "merge" else p.jm_cross_gap
                if t_foe >= window:
                    continue
                blocked = True
                break
            if blocked:
                break
        result[ap.agent.id] = YIELD if blocked else PROCEED
    return result
