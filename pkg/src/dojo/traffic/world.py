"""Traffic world: agent state, initial seeding, and the sub-stepped update loop.

The update order per step is: junction arbitration and lane-change decisions
(once per call), optional inflow, then 50 ms sub-steps of car-following
integration with lane transitions along each agent's route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dojo.geometry import Pose2D
from dojo.roadgen import KIND_INTERNAL, RoadNetwork
from dojo.traffic.collision import boxes_collide
from dojo.traffic.idm import braking_to_target, desired_speed, idm_acceleration
from dojo.traffic.junctions import (
    PROCEED,
    YIELD,
    Approach,
    conflict_types,
    junction_arbitration,
)
from dojo.traffic.lane_change import KEEP, LaneView, lane_change_decision
from dojo.traffic.personality import DrivingPersonality, sample_personalities
from dojo.traffic.routing import (
    exits_reachable,
    exits_reachable_by_successors,
    plan_route,
    route_lane_changes,
    siblings,
)

SUBSTEP = 0.1  # s, internal integration resolution
LEADER_HORIZON = 80.0  # m, forward search range for leaders across lanes
DIVERGE_SEPARATION = 3.0  # m, lateral centerline distance at which branches clear
CREEP_MAX = 2.0  # m, how far impatient agents may roll past the stop line


def _diverge_clearance(mine, sib, sep: float = DIVERGE_SEPARATION) -> float:
    """Arc length along ``sib`` until it is laterally clear of ``mine``."""
    s = 0.0
    while s < sib.length:
        p = sib.interpolate(s)
        _, lat = mine.project(p.x, p.y)
        if abs(lat) > sep:
            return s
        s += 2.0
    return sib.length


@dataclass(frozen=True)
class TrafficConfig:
    spacing: float = 30.0
    inflow: bool = True
    inflow_prob: float = 0.6  # per entry lane per step, while below target density
    sigma_scale: float = 1.0  # global multiplier on perception-error sigmas
    ignore_prob_override: float | None = None  # force jm_ignore_foe_prob
    lc_cooldown: float = 3.0  # s between discretionary lane changes


@dataclass
class VehicleAgent:
    id: int
    personality: DrivingPersonality
    personality_idx: int
    lane_id: str
    s: float
    speed: float
    exit_id: str
    route: list[str]
    route_idx: int = 0
    accel: float = 0.0
    committed_junction: str | None = None
    junction_state: str | None = None
    wait_time: float = 0.0
    brake_timer: float = 0.0
    speed_offset: float = 1.0
    offset_timer: float = 0.0
    lc_cooldown: float = 0.0
    # car-following context, rebuilt once per step and advanced incrementally
    # through the substeps (exact for agents following along their routes)
    cf_leader: "VehicleAgent | None" = None
    cf_gap: float = math.inf
    merge_leader: "VehicleAgent | None" = None
    merge_gap: float = math.inf
    # strongest upcoming speed-limit drop on the route, refreshed per step:
    # target speed and the s coordinate (current lane frame) where it starts
    slow_v: float = math.inf
    slow_mark: float = 0.0

    @property
    def half_length(self) -> float:
        return self.personality.length / 2.0


class TrafficWorld:
    def __init__(
        self,
        network: RoadNetwork,
        personalities: list[DrivingPersonality],
        config: TrafficConfig | None = None,
        rng=None,
    ):
        self.network = network
        self.personalities = personalities
        self.config = config or TrafficConfig()
        self._sigma_scale = self.config.sigma_scale
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.agents: dict[int, VehicleAgent] = {}
        # phantom obstacle (e.g. an externally controlled ego vehicle): seen
        # by leader searches and arbitration, never integrated or removed
        self.ego: VehicleAgent | None = None
        self.target_count = 0
        self._next_id = 0
        self._step_idx = 0
        self.reach_full = exits_reachable(network)
        self.reach_succ = exits_reachable_by_successors(network)
        self._incoming_j: dict[str, str] = {}
        self._internal_j: dict[str, str] = {}
        self._ctypes: dict[str, dict] = {}
        for jid, j in network.junctions.items():
            for inc in j.incoming:
                self._incoming_j[inc] = jid
            for lid in j.internal:
                self._internal_j[lid] = jid
            self._ctypes[jid] = conflict_types(j, network.lanes)
        self._claims: dict[str, dict[int, str]] = {jid: {} for jid in network.junctions}
        self._internal_len = {
            lid: network.lanes[lid].length for lid in self._internal_j
        }
        # lanes fanning out from a shared predecessor overlap near the split;
        # measure how far along each sibling the centerlines stay within
        # reach, since ramps separate far more gradually than turn connections
        self._diverge_sibs: dict[str, list[tuple[str, float]]] = {}
        self._sib_clear: dict[tuple[str, str], float] = {}
        for lid, lane in network.lanes.items():
            sibs = set()
            for pred in lane.predecessors:
                sibs.update(network.lanes[pred].successors)
            sibs.discard(lid)
            if not sibs:
                continue
            entries = []
            for sl in sorted(sibs):
                clear = _diverge_clearance(
                    lane.centerline, network.lanes[sl].centerline
                )
                entries.append((sl, clear))
                self._sib_clear[(lid, sl)] = clear
            self._diverge_sibs[lid] = entries
        self._entry_lanes = sorted(
            lid
            for lid, lane in network.lanes.items()
            if not lane.predecessors and lane.kind != KIND_INTERNAL
        )

    # -- bookkeeping ---------------------------------------------------

    def add_agent(
        self,
        lane_id: str,
        s: float,
        speed: float,
        personality_idx: int,
        exit_id: str,
        route: list[str],
    ) -> VehicleAgent:
        agent = VehicleAgent(
            id=self._next_id,
            personality=self.personalities[personality_idx],
            personality_idx=personality_idx,
            lane_id=lane_id,
            s=s,
            speed=speed,
            exit_id=exit_id,
            route=route,
        )
        self.agents[agent.id] = agent
        self._next_id += 1
        return agent

    def pose_of(self, agent: VehicleAgent) -> Pose2D:
        line = self.network.lanes[agent.lane_id].centerline
        return line.interpolate(min(max(agent.s, 0.0), line.length))

    def position_of(self, agent: VehicleAgent) -> tuple[float, float]:
        pose = self.pose_of(agent)
        return pose.x, pose.y

    def _occupancy(self) -> dict[str, list[VehicleAgent]]:
        occ: dict[str, list[VehicleAgent]] = {}
        for agent in self.agents.values():
            occ.setdefault(agent.lane_id, []).append(agent)
        if self.ego is not None:
            occ.setdefault(self.ego.lane_id, []).append(self.ego)
        for lst in occ.values():
            lst.sort(key=lambda a: (a.s, a.id))
        return occ

    def _route_next(self, agent: VehicleAgent) -> str | None:
        if agent.route_idx + 1 < len(agent.route):
            return agent.route[agent.route_idx + 1]
        return None

    def _reroute_ahead(self, agent: VehicleAgent) -> bool:
        """Replan through a successor of the agent's current lane."""
        lane = self.network.lanes[agent.lane_id]
        succs = [sid for sid in lane.successors if self.reach_full[sid]]
        if not succs:
            return False
        sid = succs[int(self.rng.integers(len(succs)))]
        exits = sorted(self.reach_full[sid])
        agent.exit_id = exits[int(self.rng.integers(len(exits)))]
        tail = plan_route(self.network, sid, agent.exit_id)
        if tail is None:
            return False
        agent.route = [agent.lane_id] + tail
        agent.route_idx = 0
        return True

    def collisions(self) -> list[tuple[int, int]]:
        """Bounding-box overlaps among non-ego agents."""
        if len(self.agents) < 2:
            return []
        ids = sorted(self.agents)
        entries = []
        for aid in ids:
            agent = self.agents[aid]
            pose = self.pose_of(agent)
            p = agent.personality
            entries.append((aid, (pose.x, pose.y, pose.heading), (p.length, p.width)))
        xs = np.array([e[1][0] for e in entries])
        ys = np.array([e[1][1] for e in entries])
        reach = np.array([(e[2][0] + e[2][1]) / 2.0 for e in entries])
        d2 = (xs[:, None] - xs) ** 2 + (ys[:, None] - ys) ** 2
        close = d2 <= (reach[:, None] + reach[None, :]) ** 2
        hits = []
        for i, j in zip(*np.nonzero(np.triu(close, k=1))):
            _, pa, da = entries[i]
            _, pb, db = entries[j]
            if boxes_collide(pa, da, pb, db):
                hits.append((entries[i][0], entries[j][0]))
        return hits

    # -- stepping ------------------------------------------------------

    def step(self, dt: float) -> "TrafficWorld":
        if dt <= 0:
            raise ValueError("dt must be > 0")
        n = max(1, round(dt / SUBSTEP))
        h = dt / n
        self._step_idx += 1
        self._decide(dt)
        if self.config.inflow and self.target_count:
            self._inflow()
        for _ in range(n):
            self._substep(h)
        return self

    def _decide(self, dt: float) -> None:
        occ = self._occupancy()
        lanes = self.network.lanes
        approaches: dict[str, list[Approach]] = {}
        for agent in self.agents.values():
            agent.junction_state = None
            lane = lanes[agent.lane_id]
            if lane.kind == KIND_INTERNAL:
                jid = self._internal_j[agent.lane_id]
                agent.junction_state = PROCEED
                approaches.setdefault(jid, []).append(
                    Approach(agent, agent.lane_id, -agent.s, inside=True)
                )
                continue
            jid = self._incoming_j.get(agent.lane_id)
            if jid is None:
                continue
            nxt = self._route_next(agent)
            dist = lane.length - agent.s - agent.half_length
            if nxt is None or self._internal_j.get(nxt) != jid:
                # a pending lane change that has run out of room must be
                # abandoned here, otherwise the agent would reach the
                # junction without ever being arbitrated
                if dist < max(20.0, agent.speed * 2.0) and self._reroute_ahead(agent):
                    nxt = self._route_next(agent)
                if nxt is None or self._internal_j.get(nxt) != jid:
                    continue
            if dist < max(30.0, agent.speed * 4.0):
                approaches.setdefault(jid, []).append(
                    Approach(
                        agent, nxt, dist, committed=agent.committed_junction == jid
                    )
                )
        ego = self.ego
        if ego is not None:
            lane = lanes[ego.lane_id]
            if lane.kind == KIND_INTERNAL:
                jid = self._internal_j[ego.lane_id]
                approaches.setdefault(jid, []).append(
                    Approach(ego, ego.lane_id, -ego.s, inside=True)
                )
            else:
                jid = self._incoming_j.get(ego.lane_id)
                nxt = self._route_next(ego)
                if jid is not None and nxt is not None and self._internal_j.get(nxt) == jid:
                    dist = lane.length - ego.s - ego.half_length
                    if dist < max(30.0, ego.speed * 4.0):
                        approaches.setdefault(jid, []).append(
                            Approach(
                                ego, nxt, dist,
                                committed=dist < max(12.0, ego.speed * 1.2),
                            )
                        )
        for jid in sorted(approaches):
            junction = self.network.junctions[jid]
            res = junction_arbitration(
                junction,
                approaches[jid],
                self.rng,
                self._ctypes[jid],
                self.config.ignore_prob_override,
                self._internal_len,
            )
            for ap in approaches[jid]:
                if ap.inside or ap.agent.id < 0:
                    continue  # phantom obstacles influence others only
                agent = ap.agent
                if res[agent.id] == PROCEED:
                    agent.junction_state = PROCEED
                    if (
                        agent.committed_junction is None
                        and ap.dist < max(12.0, agent.speed * 1.2)
                    ):
                        agent.committed_junction = jid
                        self._claims[jid][agent.id] = ap.connection
                else:
                    agent.junction_state = YIELD

        for aid in sorted(self.agents):
            agent = self.agents[aid]
            agent.lc_cooldown = max(0.0, agent.lc_cooldown - dt)
            if agent.junction_state is not None:
                continue
            self._maybe_change_lane(agent, occ)

        # rebuild the car-following context once per step; substeps advance
        # the stored gaps incrementally
        for agent in self.agents.values():
            found = self._find_leader(agent, occ)
            if found is None:
                agent.cf_leader, agent.cf_gap = None, math.inf
            else:
                agent.cf_gap, agent.cf_leader = found
            agent.merge_leader, agent.merge_gap = None, math.inf
            if (
                lanes[agent.lane_id].kind == KIND_INTERNAL
                or agent.committed_junction is not None
            ):
                self._merge_context(agent, occ)
            self._speed_preview(agent)

    def _speed_preview(self, agent: VehicleAgent) -> None:
        """Record the strongest upcoming speed-limit drop along the route."""
        lanes = self.network.lanes
        p = agent.personality
        v = agent.speed
        agent.slow_v = math.inf
        look = max(20.0, v * p.t_preview)
        d = lanes[agent.lane_id].length - agent.s
        prev, idx, hops = agent.lane_id, agent.route_idx + 1, 0
        best = 0.0
        while idx < len(agent.route) and d < look and hops < 2:
            nl = agent.route[idx]
            if nl not in lanes[prev].successors:
                break
            vn = desired_speed(lanes[nl].speed_limit, p)
            if vn < v:
                a_req = braking_to_target(v, 0.97 * vn, d)
                if a_req < best:
                    best = a_req
                    agent.slow_v = 0.97 * vn
                    agent.slow_mark = agent.s + d
            d += lanes[nl].length
            prev, idx, hops = nl, idx + 1, hops + 1

    def _lane_view(
        self, agent: VehicleAgent, sid: str, s_t: float, occ, mandatory: bool = False
    ) -> LaneView:
        """What the agent would see at position s_t on lane sid."""
        view = LaneView(limit=self.network.lanes[sid].speed_limit, mandatory=mandatory)
        lead = self._nearest_ahead(sid, s_t, agent.half_length, occ)
        if lead is not None:
            view.leader_gap, leader = lead
            view.leader_dv = agent.speed - leader.speed
        behind = self._nearest_behind(sid, s_t, agent.half_length, occ)
        if behind is not None:
            view.follower_gap, follower = behind
            view.follower_speed = follower.speed
            view.follower_p = follower.personality
        # vehicles on a branch still overlapping the target lane count too
        for sl, clear in self._diverge_sibs.get(sid, ()):
            for other in occ.get(sl, ()):
                if other.s - other.half_length > clear:
                    continue
                gap = abs(other.s - s_t) - other.half_length - agent.half_length
                if other.s >= s_t:
                    if view.leader_gap is None or gap < view.leader_gap:
                        view.leader_gap = gap
                        view.leader_dv = agent.speed - other.speed
                elif view.follower_gap is None or gap < view.follower_gap:
                    view.follower_gap = gap
                    view.follower_speed = other.speed
                    view.follower_p = other.personality
        return view

    def _maybe_change_lane(self, agent: VehicleAgent, occ) -> None:
        lanes = self.network.lanes
        lane = lanes[agent.lane_id]
        if lane.left_id is None and lane.right_id is None:
            return
        nxt = self._route_next(agent)
        mandatory_target = nxt if nxt in (lane.left_id, lane.right_id) else None
        if mandatory_target is None and agent.lc_cooldown > 0.0:
            return
        # discretionary changes are only evaluated every third step, staggered
        # by agent id, to keep the decision pass cheap
        if mandatory_target is None and (self._step_idx + agent.id) % 3:
            return

        views: dict[str, LaneView] = {}
        found = self._find_leader(agent, occ)
        if found is None:
            views[KEEP] = LaneView(limit=lane.speed_limit)
        else:
            gap, leader = found
            views[KEEP] = LaneView(
                limit=lane.speed_limit, leader_gap=gap, leader_dv=agent.speed - leader.speed
            )
        # sibling lanes run parallel, so length-ratio scaling of the agent's s
        # is a close stand-in for its projection onto the target; the exact
        # projection is only computed once a change is actually taken
        candidates: dict[str, str] = {}
        for side, sid in (("left", lane.left_id), ("right", lane.right_id)):
            if sid is None or lanes[sid].kind == KIND_INTERNAL:
                continue
            target = lanes[sid]
            s_t = agent.s * target.length / lane.length
            if s_t < 1.0 or s_t > target.length - 2.0:
                continue
            if any(lanes[x].kind == KIND_INTERNAL for x in target.successors) and (
                target.length - s_t < max(15.0, agent.speed * 1.5)
            ):
                continue  # too close to the junction to be arbitrated after moving
            views[side] = self._lane_view(
                agent, sid, s_t, occ, mandatory=sid == mandatory_target
            )
            candidates[side] = sid

        decision = lane_change_decision(agent, views, agent.personality)
        if decision == KEEP or decision not in candidates:
            return
        sid = candidates[decision]
        target = lanes[sid]
        pose = self.pose_of(agent)
        s_t, _ = target.centerline.project(pose.x, pose.y)
        if s_t < 1.0 or s_t > target.length - 2.0:
            return
        if any(lanes[x].kind == KIND_INTERNAL for x in target.successors) and (
            target.length - s_t < max(15.0, agent.speed * 1.5)
        ):
            return
        # the candidate views used approximate coordinates; re-check the
        # chosen side at the exact projection before moving
        exact = {
            KEEP: views[KEEP],
            decision: self._lane_view(
                agent, sid, s_t, occ, mandatory=sid == mandatory_target
            ),
        }
        if lane_change_decision(agent, exact, agent.personality) != decision:
            return
        occ.setdefault(agent.lane_id, [])
        if agent in occ[agent.lane_id]:
            occ[agent.lane_id].remove(agent)
        agent.lane_id = sid
        agent.s = s_t
        if agent.exit_id in self.reach_full[sid]:
            route = plan_route(self.network, sid, agent.exit_id)
        else:
            exits = sorted(self.reach_full[sid])
            if not exits:
                return
            agent.exit_id = exits[int(self.rng.integers(len(exits)))]
            route = plan_route(self.network, sid, agent.exit_id)
        agent.route = route
        agent.route_idx = 0
        agent.lc_cooldown = self.config.lc_cooldown
        occ.setdefault(sid, []).append(agent)
        occ[sid].sort(key=lambda a: (a.s, a.id))

    def _inflow(self) -> None:
        lanes = self.network.lanes
        occ = self._occupancy()
        for lid in self._entry_lanes:
            if len(self.agents) >= self.target_count:
                break
            if self.rng.random() >= self.config.inflow_prob:
                continue
            pidx = int(self.rng.integers(len(self.personalities)))
            p = self.personalities[pidx]
            exits = sorted(self.reach_full[lid])
            if not exits:
                continue
            exit_id = exits[int(self.rng.integers(len(exits)))]
            u = float(self.rng.random())
            lane = lanes[lid]
            spawn_s = p.length / 2.0 + 0.5
            v_cap = min(lane.speed_limit, desired_speed(lane.speed_limit, p))
            ahead = occ.get(lid, [])
            if ahead:
                first = ahead[0]
                gap = first.s - first.half_length - spawn_s - p.length / 2.0
                if gap < max(10.0, p.min_gap + 5.0):
                    continue
                v_safe = math.sqrt(max(0.0, p.decel * (gap - p.min_gap)))
                v_cap = min(v_cap, v_safe, first.speed + 2.0)
            route = plan_route(self.network, lid, exit_id)
            if route is None:
                continue
            # bias away from crawling spawns so the entry zone clears quickly
            agent = self.add_agent(
                lid, spawn_s, (0.3 + 0.7 * u) * v_cap, pidx, exit_id, route
            )
            if ahead:
                agent.cf_leader = ahead[0]
                agent.cf_gap = gap

    def _substep(self, h: float) -> None:
        ags = list(self.agents.values())
        accs = [self._acceleration(a, h) for a in ags]
        removals: list[int] = []
        for agent, a in zip(ags, accs):
            agent.accel = a
            v = agent.speed + a * h
            agent.speed = v if v > 0.0 else 0.0
            agent.s += agent.speed * h
            if agent.brake_timer > 0.0:
                agent.brake_timer -= h
            if agent.offset_timer > 0.0:
                agent.offset_timer -= h
                if agent.offset_timer <= 0.0:
                    agent.speed_offset = 1.0
            if agent.junction_state == YIELD:
                agent.wait_time += h
            self._advance_lane(agent, removals)
        # advance stored gaps with the freshly integrated speeds; exact for
        # followers and leaders progressing along connected lanes
        for agent in self.agents.values():
            if agent.cf_leader is not None:
                agent.cf_gap += h * (agent.cf_leader.speed - agent.speed)
            if agent.merge_leader is not None:
                agent.merge_gap += h * (agent.merge_leader.speed - agent.speed)
        for aid in removals:
            self._release(self.agents[aid])
            del self.agents[aid]

    def _acceleration(self, agent: VehicleAgent, h: float) -> float:
        p = agent.personality
        lane = self.network.lanes[agent.lane_id]
        limit = lane.speed_limit * agent.speed_offset
        v = agent.speed
        k = self._sigma_scale * p.sigma_error

        leader = agent.cf_leader
        if leader is None or agent.cf_gap > LEADER_HORIZON:
            # free flow, inlined from idm_acceleration
            v0 = p.speed_factor * limit
            if v0 > p.desired_max_speed:
                v0 = p.desired_max_speed
            if v0 <= 1e-9:
                a = -p.decel if v > 0 else 0.0
            else:
                r = v / v0
                if p.delta == 4.0:
                    rr = r * r
                    a = p.accel * (1.0 - rr * rr)
                else:
                    a = p.accel * (1.0 - r**p.delta)
        else:
            gap = agent.cf_gap
            dv = v - leader.speed
            if k > 0.0:
                gap = gap * max(0.3, 1.0 + k * p.sigma_gap * self.rng.normal())
                dv += k * p.sigma_leader * max(1.0, v) * self.rng.normal()
            a = idm_acceleration(v, limit, max(gap, 0.05), dv, p)
        if k > 0.0:
            a += k * p.sigma_free * p.accel * self.rng.normal()

        if agent.junction_state == YIELD:
            stop = lane.length - agent.s - agent.half_length - p.jm_stopline_gap
            creep = min(
                CREEP_MAX,
                CREEP_MAX
                * agent.wait_time
                * p.impatience
                / max(p.jm_ignore_keep_clear_time, 0.1),
            )
            wall_gap = max(stop + creep + p.min_gap, 0.05)
            a = min(a, idm_acceleration(v, limit, wall_gap, v, p))

        if agent.merge_leader is not None:
            a = min(
                a,
                idm_acceleration(
                    v, limit, max(agent.merge_gap, 0.05),
                    v - agent.merge_leader.speed, p,
                ),
            )

        # slow down ahead of lower speed limits on the route
        if agent.slow_v < v:
            a_req = braking_to_target(v, agent.slow_v, agent.slow_mark - agent.s)
            if a_req < a:
                a = max(a_req, -p.emergency_decel)

        if agent.brake_timer > 0.0:
            a = -p.emergency_decel
        elif a > agent.accel:
            # accelerations build up over the reaction time; braking is instant
            alpha = min(1.0, h / max(p.t_reaction, h))
            a = agent.accel + alpha * (a - agent.accel)
        if a < -p.emergency_decel:
            return -p.emergency_decel
        if a > p.accel:
            return p.accel
        return a

    def _find_leader(self, agent: VehicleAgent, occ):
        """Nearest leader on the agent's lane or further along its route."""
        lanes = self.network.lanes
        sib_best = None
        for sl, clear in self._diverge_sibs.get(agent.lane_id, ()):
            for other in occ.get(sl, ()):
                if other.s - other.half_length > clear:
                    continue  # laterally clear of the shared split
                if other.s > agent.s or (other.s == agent.s and other.id > agent.id):
                    gap = other.s - agent.s - other.half_length - agent.half_length
                    if sib_best is None or gap < sib_best[0]:
                        sib_best = (gap, other)
        for other in occ.get(agent.lane_id, ()):
            if other.s > agent.s or (other.s == agent.s and other.id > agent.id):
                gap = other.s - agent.s - other.half_length - agent.half_length
                if sib_best is not None and sib_best[0] < gap:
                    return sib_best
                return gap, other
        if sib_best is not None:
            return sib_best
        dist = lanes[agent.lane_id].length - agent.s
        prev, idx = agent.lane_id, agent.route_idx + 1
        while idx < len(agent.route) and dist < LEADER_HORIZON:
            nl = agent.route[idx]
            if nl not in lanes[prev].successors:
                break
            best = None
            for sl in lanes[prev].successors:
                ahead = occ.get(sl)
                if not ahead:
                    continue
                other = ahead[0]
                if sl != nl and other.s - other.half_length > self._sib_clear.get(
                    (nl, sl), 0.0
                ):
                    continue  # other branch, already laterally clear of the split
                gap = dist + other.s - other.half_length - agent.half_length
                if best is None or gap < best[0]:
                    best = (gap, other)
            if best is not None:
                return best
            dist += lanes[nl].length
            prev, idx = nl, idx + 1
        return None

    def _nearest_ahead(self, lane_id: str, s: float, half_length: float, occ, depth: int = 2):
        """Nearest vehicle ahead of position s, searching across successors."""
        lanes = self.network.lanes
        for other in occ.get(lane_id, ()):
            if other.s >= s:
                return other.s - s - other.half_length - half_length, other
        best = None
        if depth > 0:
            dist = lanes[lane_id].length - s
            if dist < LEADER_HORIZON:
                for sl in lanes[lane_id].successors:
                    found = self._nearest_ahead(sl, 0.0, half_length, occ, depth - 1)
                    if found is not None:
                        gap = dist + found[0]
                        if best is None or gap < best[0]:
                            best = (gap, found[1])
        return best

    def _nearest_behind(self, lane_id: str, s: float, half_length: float, occ, depth: int = 2):
        """Nearest vehicle behind position s, searching across predecessors."""
        lanes = self.network.lanes
        behind = [o for o in occ.get(lane_id, ()) if o.s < s]
        if behind:
            other = behind[-1]
            return s - other.s - other.half_length - half_length, other
        best = None
        if depth > 0 and s < LEADER_HORIZON:
            for pl in lanes[lane_id].predecessors:
                found = self._nearest_behind(
                    pl, lanes[pl].length, half_length, occ, depth - 1
                )
                if found is not None:
                    gap = s + found[0]
                    if best is None or gap < best[0]:
                        best = (gap, found[1])
        return best

    def _merge_context(self, agent: VehicleAgent, occ) -> None:
        """Store the nearest foe ahead on a merging connection as a virtual leader."""
        lanes = self.network.lanes
        lane = lanes[agent.lane_id]
        if lane.kind == KIND_INTERNAL:
            jid = self._internal_j[agent.lane_id]
            conn = agent.lane_id
            my_d = lane.length - agent.s
        else:
            jid = agent.committed_junction
            conn = self._claims[jid].get(agent.id)
            if conn is None:
                return
            my_d = (lane.length - agent.s) + lanes[conn].length
        junction = self.network.junctions[jid]
        ctypes = self._ctypes[jid]
        for c2 in junction.conflicts_of(conn):
            if ctypes[frozenset((conn, c2))] != "merge":
                continue
            foes = list(occ.get(c2, ()))
            for aid2, cc in self._claims[jid].items():
                if cc == c2 and aid2 != agent.id:
                    foe = self.agents.get(aid2)
                    if foe is not None and foe.lane_id != c2:
                        foes.append(foe)
            for foe in foes:
                if foe.lane_id == c2:
                    foe_d = lanes[c2].length - foe.s
                else:
                    foe_d = (lanes[foe.lane_id].length - foe.s) + lanes[c2].length
                if (foe_d, foe.id) >= (my_d, agent.id):
                    continue
                gap = my_d - foe_d - foe.half_length - agent.half_length
                if gap < agent.merge_gap:
                    agent.merge_gap = gap
                    agent.merge_leader = foe

    def _advance_lane(self, agent: VehicleAgent, removals: list[int]) -> None:
        lanes = self.network.lanes
        while True:
            lane = lanes[agent.lane_id]
            if agent.s <= lane.length:
                return
            nxt = self._route_next(agent)
            if nxt is None:
                removals.append(agent.id)
                return
            if nxt in lane.successors:
                if lane.kind == KIND_INTERNAL:
                    self._release(agent)
                agent.s -= lane.length
                agent.slow_mark -= lane.length
                agent.lane_id = nxt
                agent.route_idx += 1
            else:
                # missed a required lane change: reroute via some successor
                succs = [sid for sid in lane.successors if self.reach_full[sid]]
                if not succs:
                    removals.append(agent.id)
                    return
                sid = succs[int(self.rng.integers(len(succs)))]
                exits = sorted(self.reach_full[sid])
                agent.exit_id = exits[int(self.rng.integers(len(exits)))]
                agent.s -= lane.length
                agent.lane_id = sid
                agent.route = plan_route(self.network, sid, agent.exit_id)
                agent.route_idx = 0
                agent.slow_v = math.inf
            if lanes[agent.lane_id].kind == KIND_INTERNAL:
                jid = self._internal_j[agent.lane_id]
                agent.committed_junction = jid
                agent.junction_state = PROCEED
                self._claims[jid][agent.id] = agent.lane_id
            elif lane.kind == KIND_INTERNAL:
                agent.junction_state = None
                agent.wait_time = 0.0

    def _release(self, agent: VehicleAgent) -> None:
        if agent.committed_junction is not None:
            self._claims[agent.committed_junction].pop(agent.id, None)
            agent.committed_junction = None
        agent.wait_time = 0.0


def step_traffic(world: TrafficWorld, network: RoadNetwork, dt: float) -> TrafficWorld:
    assert network is world.network
    return world.step(dt)


def seed_initial_traffic(
    network: RoadNetwork,
    rng,
    spacing: float = 30.0,
    personalities: list[DrivingPersonality] | None = None,
    config: TrafficConfig | None = None,
) -> TrafficWorld:
    """Place vehicles on every non-junction-internal lane at ~spacing intervals.

    Each vehicle gets a uniformly drawn personality, a random reachable exit,
    the sibling lane minimizing required lane changes ("best" lane), and a
    random initial speed in [0, effective lane limit].
    """
    if personalities is None:
        personalities = sample_personalities(rng)
    world = TrafficWorld(network, personalities, config, rng)
    placed: dict[str, list[float]] = {}
    for lid, lane in network.lanes.items():
        if lane.kind == KIND_INTERNAL:
            continue
        n = int(lane.length // spacing)
        if n < 1:
            continue
        margin = (lane.length - (n - 1) * spacing) / 2.0
        sib_ids = siblings(network, lid)
        home = sib_ids.index(lid)
        for i in range(n):
            s = margin + i * spacing
            pidx = int(rng.integers(len(personalities)))
            p = personalities[pidx]
            exits = sorted(world.reach_full[lid])
            if not exits:
                continue
            exit_id = exits[int(rng.integers(len(exits)))]
            best, best_key, best_route = lid, None, None
            for k, sid in enumerate(sib_ids):
                route = plan_route(network, sid, exit_id)
                if route is None:
                    continue
                key = (route_lane_changes(network, route), abs(k - home), k)
                if best_key is None or key < best_key:
                    best, best_key, best_route = sid, key, route
            def free(lane_id: str) -> bool:
                if s > network.lanes[lane_id].length - 2.0:
                    return False
                if any(abs(s - s0) < spacing / 2.0 for s0 in placed.get(lane_id, ())):
                    return False
                # near a split, lanes overlap their siblings laterally
                for sl, clear in world._diverge_sibs.get(lane_id, ()):
                    if s > world._sib_clear.get((sl, lane_id), 0.0):
                        continue
                    if any(
                        s0 <= clear and abs(s - s0) < spacing / 2.0
                        for s0 in placed.get(sl, ())
                    ):
                        return False
                return True

            if best != lid and not free(best):
                best = lid
                best_route = plan_route(network, lid, exit_id)
            if best_route is None or not free(best):
                continue
            limit = network.lanes[best].speed_limit
            cap = min(limit, desired_speed(limit, p))
            if len(best_route) > 1 and network.lanes[best_route[1]].kind == KIND_INTERNAL:
                # must be able to stop at the junction entry if told to yield
                brake_d = max(network.lanes[best].length - s - 2.0, 0.0)
                cap = min(cap, math.sqrt(2.0 * 3.5 * brake_d))
            speed = float(rng.random()) * cap
            world.add_agent(best, s, speed, pidx, exit_id, best_route)
            placed.setdefault(best, []).append(s)
    # cap initial speeds so every follower can comfortably brake behind its
    # leader; iterate to a fixed point since caps propagate down the chain
    occ = world._occupancy()
    for _ in range(30):
        changed = False
        for agent in world.agents.values():
            found = world._find_leader(agent, occ)
            if found is None:
                continue
            gap, leader = found
            p = agent.personality
            margin = p.min_gap + 1.0
            if gap <= margin:
                v_max = min(leader.speed, 1.0)
            else:
                v_max = math.sqrt(leader.speed**2 + 1.8 * p.decel * (gap - margin))
            if agent.speed > v_max:
                agent.speed = v_max
                changed = True
        if not changed:
            break
    world.target_count = len(world.agents)
    return world
