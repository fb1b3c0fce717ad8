"""Episode lifecycle: seed derivation, reset, 200 ms stepping, and reward.

One DrivingEnv instance is one logical state machine. All randomness flows
from a single master seed through derive_seeds, so the same master seed and
action sequence always reproduce the same episode, bit for bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import yaml

from dojo.actions import (
    SEMANTIC_ACTIONS,
    ControlAction,
    SemanticState,
    apply_semantic,
    discretize_controls,
    stanley_control,
)
from dojo.ego import EgoState, get_preset, step_kinematic_single_track, step_tps
from dojo.geometry import Polyline, Pose2D
from dojo.observers import FrameStack, Observation, ObservationSpec, SceneView, VehicleView
from dojo.roadgen import KIND_INTERNAL, KIND_NORMAL, RoadNetwork, generate_map
from dojo.traffic import (
    EventConfig,
    TrafficConfig,
    TrafficWorld,
    VehicleAgent,
    apply_traffic_events,
    boxes_collide,
    plan_route,
    sample_personalities,
    seed_initial_traffic,
)

URBAN_V_MAX = 13.889  # m/s
HIGHWAY_V_MAX = 36.111  # m/s

REASONS = ("running", "goal", "crash", "off_route", "off_road", "timeout")

_SEED_HIGH = 2**63


@lru_cache(maxsize=64)
def _personalities_for(traffic_seed: int):
    """Constellations drawn on a child stream, cacheable across resets."""
    return sample_personalities(np.random.default_rng([traffic_seed, 0]))


@dataclass
class SeedTree:
    """Derives one (map_seed, traffic_seed) pair per reset from a master seed.

    With constraints set, seeds come from finite pools whose contents depend
    on both constraint values; unconstrained resets draw fresh pairs.
    """

    master_seed: int
    num_maps: int | None = None
    num_traffic: int | None = None
    counter: int = 0

    def advance(self) -> tuple[int, int]:
        pair = derive_seeds(self)
        self.counter += 1
        return pair


def derive_seeds(tree: SeedTree) -> tuple[int, int]:
    """Pure function of (master seed, counter, constraints)."""
    rng = np.random.default_rng(tree.master_seed)
    c = tree.counter
    nm, nt = tree.num_maps, tree.num_traffic
    if nm is None and nt is None:
        pairs = rng.integers(0, _SEED_HIGH, size=(c + 1, 2))
        return int(pairs[-1, 0]), int(pairs[-1, 1])
    if nm is not None and nt is not None:
        # interleaved layout [map_i, traffic_i_0 .. traffic_i_{nt-1}] makes
        # every pool entry depend on both constraint values
        pool = rng.integers(0, _SEED_HIGH, size=nm * (1 + nt))
        mi = c % nm
        ti = (c // nm) % nt
        return int(pool[mi * (1 + nt)]), int(pool[mi * (1 + nt) + 1 + ti])
    if nm is not None:
        maps = rng.integers(0, _SEED_HIGH, size=nm)
        fresh = rng.integers(0, _SEED_HIGH, size=c + 1)
        return int(maps[c % nm]), int(fresh[-1])
    # unlimited maps, nt traffic scenarios per map
    mi = c // nt
    pool = rng.integers(0, _SEED_HIGH, size=(mi + 1, 1 + nt))
    return int(pool[mi, 0]), int(pool[mi, 1 + (c % nt)])


@dataclass(frozen=True)
class EpisodeConfig:
    scenario: str = "intersection"
    dt: float = 0.2
    max_steps: int = 500
    v_max: float | None = None  # default picked from the scenario kind
    action_space: str = "semantic"  # semantic | continuous | discrete
    dynamics: str = "kinematic_single_track"  # or tps (semantic only)
    vehicle: str = "bmw_320i"
    num_maps: int | None = None
    num_traffic: int | None = None
    traffic_spacing: float = 30.0
    sigma_scale: float = 1.0
    inflow: bool = True
    events: bool = True
    signals: bool = False
    sub_goal_spacing: float = 50.0
    off_route_tolerance: float = 5.0
    goal_tolerance: float = 3.0
    delta_v: float = 1.0
    observation: ObservationSpec = field(default_factory=ObservationSpec)

    def __post_init__(self):
        for name in ("dt", "traffic_spacing", "sigma_scale", "sub_goal_spacing",
                     "off_route_tolerance", "goal_tolerance", "delta_v"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)):
                raise ValueError(f"{name} must be numeric, got {value!r}")
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.action_space not in ("semantic", "continuous", "discrete"):
            raise ValueError(f"unknown action space {self.action_space!r}")
        if self.dynamics not in ("kinematic_single_track", "tps"):
            raise ValueError(f"unknown dynamics model {self.dynamics!r}")
        if self.dynamics == "tps" and self.action_space != "semantic":
            raise ValueError("tps dynamics requires the semantic action space")

    @property
    def speed_cap(self) -> float:
        if self.v_max is not None:
            return self.v_max
        return HIGHWAY_V_MAX if self.scenario.startswith("highway") else URBAN_V_MAX

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["observation"] = dataclasses.asdict(self.observation)
        out["observation"]["observers"] = list(self.observation.observers)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "EpisodeConfig":
        raw = dict(raw)
        obs = raw.pop("observation", None)
        if obs is not None:
            obs = dict(obs)
            if "observers" in obs:
                obs["observers"] = tuple(obs["observers"])
            raw["observation"] = ObservationSpec(**obs)
        return cls(**raw)

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_episode_config(path) -> EpisodeConfig:
    with open(path) as f:
        return EpisodeConfig.from_dict(yaml.safe_load(f) or {})


def compute_reward(reason: str, sub_goal: bool, speed: float, v_max: float) -> float:
    """Sparse goal/crash terms with a dense velocity term otherwise."""
    if reason in ("crash", "off_route", "off_road"):
        return -10.0
    if reason == "goal":
        return 10.0
    if sub_goal:
        return 5.0
    return max(0.0, speed) / v_max


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    terminated: bool
    reason: str
    diagnostics: dict

    def __post_init__(self):
        if (self.reason == "running") == self.terminated:
            raise ValueError("reason must be 'running' exactly when not terminated")


class FixedCycleSignals:
    """Minimal fixed-cycle signal controller, observation-side only."""

    GREEN, YELLOW, RED = 15.0, 3.0, 12.0

    def __init__(self, network: RoadNetwork):
        self.network = network
        self._offsets = {
            jid: (i * 7.0) % (self.GREEN + self.YELLOW + self.RED)
            for i, jid in enumerate(sorted(network.junctions))
        }

    def state(self, junction_id: str, t: float) -> str:
        cycle = self.GREEN + self.YELLOW + self.RED
        phase = (t + self._offsets[junction_id]) % cycle
        if phase < self.GREEN:
            return "green"
        if phase < self.GREEN + self.YELLOW:
            return "yellow"
        return "red"


def _slice_poses(line: Polyline, s0: float, s1: float, ds: float = 2.0) -> list[Pose2D]:
    s0 = max(0.0, min(s0, line.length))
    s1 = max(s0, min(s1, line.length))
    n = max(2, int((s1 - s0) / ds) + 2)
    return [line.interpolate(s) for s in np.linspace(s0, s1, n)]


def build_route_line(network: RoadNetwork, route: list[str]) -> Polyline:
    """Concatenate route lane centerlines into one polyline.

    Adjacency steps (sibling lanes spanning the same road) hand over at the
    midpoint of the remaining length instead of traversing the road twice.
    """
    poses: list[Pose2D] = []
    s0 = 0.0
    for i, lid in enumerate(route):
        line = network.lanes[lid].centerline
        nxt = route[i + 1] if i + 1 < len(route) else None
        if nxt is not None and nxt not in network.lanes[lid].successors:
            mid = (s0 + line.length) / 2.0
            poses.extend(_slice_poses(line, s0, mid))
            end = poses[-1]
            s0, _ = network.lanes[nxt].centerline.project(end.x, end.y)
        else:
            poses.extend(_slice_poses(line, s0, line.length))
            s0 = 0.0
    return _poses_to_line(poses)


def _poses_to_line(poses: list[Pose2D]) -> Polyline:
    dedup = [poses[0]]
    for p in poses[1:]:
        if math.hypot(p.x - dedup[-1].x, p.y - dedup[-1].y) > 1e-6:
            dedup.append(p)
    if len(dedup) == 1:
        p = dedup[0]
        dedup.append(Pose2D(p.x + 1e-5 * math.cos(p.heading),
                            p.y + 1e-5 * math.sin(p.heading), p.heading))
    return Polyline.from_poses(dedup)


def route_checkpoints(
    network: RoadNetwork, route: list[str], total: float,
    spacing: float, goal_tolerance: float,
) -> list[float]:
    """Sub-goal arc positions: every junction/ramp exit plus every spacing m."""
    cps = []
    s = 0.0
    for lid in route:
        lane = network.lanes[lid]
        s += lane.length
        if lane.kind != KIND_NORMAL:
            cps.append(min(s, total))
    cps.extend(np.arange(spacing, total, spacing))
    dedup: list[float] = []
    for c in sorted(cps):
        if c >= total - goal_tolerance:
            break
        if not dedup or c - dedup[-1] > 5.0:
            dedup.append(float(c))
    return dedup


class DrivingEnv:
    def __init__(self, config: EpisodeConfig, master_seed: int = 0):
        self.config = config
        self.params = get_preset(config.vehicle)
        self.seed_tree = SeedTree(master_seed, config.num_maps, config.num_traffic)
        self._map_cache: dict[int, RoadNetwork] = {}
        self._stack = FrameStack(config.observation)
        self._controls = discretize_controls(5)
        self._event_cfg = EventConfig() if config.events else None
        self.network: RoadNetwork | None = None
        self.world: TrafficWorld | None = None
        self.ego: EgoState | None = None
        self.terminated = True
        self.steps = 0
        self.episode_log: list[dict] = []

    # -- reset ----------------------------------------------------------

    def reset(self, master_seed: int | None = None) -> Observation:
        if master_seed is not None:
            self.seed_tree = SeedTree(
                master_seed, self.config.num_maps, self.config.num_traffic
            )
        map_seed, traffic_seed = self.seed_tree.advance()
        self.map_seed, self.traffic_seed = map_seed, traffic_seed
        if map_seed not in self._map_cache:
            if self.config.num_maps is None:
                self._map_cache.clear()  # unconstrained: no reuse, bound memory
            self._map_cache[map_seed] = generate_map(self.config.scenario, map_seed)
        self.network = self._map_cache[map_seed]
        self._path_cache: dict[tuple[str, int], Polyline] = {}
        self.rng = np.random.default_rng([traffic_seed, 1])
        personalities = _personalities_for(traffic_seed)
        self.world = seed_initial_traffic(
            self.network,
            self.rng,
            spacing=self.config.traffic_spacing,
            personalities=personalities,
            config=TrafficConfig(
                spacing=self.config.traffic_spacing,
                inflow=self.config.inflow,
                sigma_scale=self.config.sigma_scale,
            ),
        )
        self._spawn_ego()
        self._poses = {
            aid: self.world.pose_of(a) for aid, a in self.world.agents.items()
        }
        self._signals = FixedCycleSignals(self.network) if self.config.signals else None
        self.steps = 0
        self.terminated = False
        self._sub_goals_hit = 0
        self._stack.reset()
        self.episode_log = [
            {
                "config_hash": self.config.hash(),
                "master_seed": self.seed_tree.master_seed,
                "counter": self.seed_tree.counter - 1,
                "map_seed": map_seed,
                "traffic_seed": traffic_seed,
                "scenario": self.config.scenario,
                "route": list(self.route),
                "checkpoints": [round(c, 3) for c in self._checkpoints],
                "ego": [
                    round(self.ego.x, 6),
                    round(self.ego.y, 6),
                    round(self.ego.heading, 6),
                    round(self.ego.speed, 6),
                ],
                "vehicles": {
                    str(aid): [
                        round(self._poses[aid].x, 6),
                        round(self._poses[aid].y, 6),
                        round(self._poses[aid].heading, 6),
                        round(self.world.agents[aid].speed, 6),
                    ]
                    for aid in sorted(self.world.agents)
                },
            }
        ]
        return self._observe()

    def _spawn_ego(self) -> None:
        net, rng = self.network, self.rng
        v_cap = self.config.speed_cap
        lanes = list(net.spawn_lanes)
        for _ in range(200):
            lid = lanes[int(rng.integers(len(lanes)))]
            lane = net.lanes[lid]
            margin = self.params.length / 2.0 + 1.0
            if lane.length <= 2.0 * margin:
                continue
            s = margin + float(rng.random()) * (lane.length - 2.0 * margin)
            exits = sorted(e for e in net.exit_lanes if self._reachable(lid, e))
            if not exits:
                continue
            exit_id = exits[int(rng.integers(len(exits)))]
            pose = lane.centerline.interpolate(s)
            if not self._spawn_free(pose):
                continue
            speed = float(rng.random()) * v_cap
            # random initial speed, capped so braking behind a close leader
            # is physically possible
            lead = self.world._nearest_ahead(lid, s, self.params.length / 2.0, self.world._occupancy())
            if lead is not None:
                gap, leader = lead
                if gap < 3.0:
                    continue
                speed = min(speed, math.sqrt(leader.speed**2 + 2.0 * 4.0 * (gap - 3.0)))
            route = plan_route(net, lid, exit_id)
            if route is None:
                continue
            self.ego = EgoState(pose.x, pose.y, pose.heading, speed=speed, steering=0.0)
            self._install_route(route)
            self.semantic = SemanticState(lid, 0, speed)
            self._ego_phantom = VehicleAgent(
                id=-1,
                personality=replace(
                    self.world.personalities[0],
                    length=self.params.length,
                    width=self.params.width,
                ),
                personality_idx=0,
                lane_id=lid,
                s=s,
                speed=speed,
                exit_id=exit_id,
                route=route,
            )
            self.world.ego = self._ego_phantom
            return
        raise RuntimeError("could not find a free ego spawn position")

    def _reachable(self, lane_id: str, exit_id: str) -> bool:
        return exit_id in self.world.reach_full.get(lane_id, ())

    def _spawn_free(self, pose: Pose2D) -> bool:
        dims = (self.params.length + 2.0, self.params.width + 1.0)
        me = (pose.x, pose.y, pose.heading)
        for agent in self.world.agents.values():
            ap = self.world.pose_of(agent)
            p = agent.personality
            if boxes_collide(me, dims, (ap.x, ap.y, ap.heading), (p.length, p.width)):
                return False
        return True

    def _install_route(self, route: list[str]) -> None:
        self.route = route
        self.route_line = build_route_line(self.network, route)
        self._checkpoints = route_checkpoints(
            self.network,
            route,
            self.route_line.length,
            self.config.sub_goal_spacing,
            self.config.goal_tolerance,
        )
        self.progress = 0.0

    # -- stepping ---------------------------------------------------------

    def step(self, action) -> StepResult:
        if self.terminated:
            raise RuntimeError("step() called on a terminated episode; reset first")
        cfg = self.config
        self._apply_action(action)
        self._sync_phantom()
        if self._event_cfg is not None:
            apply_traffic_events(self.ego.pose, self.world, self.rng, self._event_cfg)
        self.world.step(cfg.dt)
        self.steps += 1
        self._poses = {
            aid: self.world.pose_of(a) for aid, a in self.world.agents.items()
        }

        s, lat = self.route_line.project(self.ego.x, self.ego.y)
        self.progress = max(self.progress, s)
        sub_goal = False
        while self._checkpoints and self.progress >= self._checkpoints[0]:
            self._checkpoints.pop(0)
            sub_goal = True
            self._sub_goals_hit += 1
        reason = self._check_termination(lat)
        self.terminated = reason != "running"
        reward = compute_reward(reason, sub_goal, self.ego.speed, cfg.speed_cap)
        obs = self._observe()
        self._log_step(action, reward, reason)
        return StepResult(
            observation=obs,
            reward=reward,
            terminated=self.terminated,
            reason=reason,
            diagnostics={
                "speed": self.ego.speed,
                "progress": self.progress,
                "sub_goals": self._sub_goals_hit,
                "steps": self.steps,
                "n_vehicles": len(self.world.agents),
            },
        )

    def _apply_action(self, action) -> None:
        cfg = self.config
        if cfg.action_space == "continuous":
            arr = np.asarray(action, dtype=float).reshape(-1)
            if arr.shape != (2,):
                raise ValueError("continuous action must have shape (2,)")
            control = ControlAction(
                float(np.clip(arr[0], -1.0, 1.0)), float(np.clip(arr[1], -1.0, 1.0))
            )
        elif cfg.action_space == "discrete":
            idx = int(action)
            if not 0 <= idx < len(self._controls):
                raise ValueError(f"discrete action out of range: {idx}")
            control = self._controls[idx]
        else:
            name = SEMANTIC_ACTIONS[int(action)] if not isinstance(action, str) else action
            if name not in SEMANTIC_ACTIONS:
                raise ValueError(f"unknown semantic action {name!r}")
            prev_lane = self.semantic.lane_id
            self.semantic = apply_semantic(
                name, self.semantic, self.network, dv=cfg.delta_v, v_max=cfg.speed_cap
            )
            if self.semantic.lane_id != prev_lane:
                self._replan_from(self.semantic.lane_id)
            path = self._control_path()
            if cfg.dynamics == "tps":
                s_e, _ = path.project(self.ego.x, self.ego.y)
                target = path.interpolate(
                    min(s_e + max(self.semantic.target_speed, 1.0) * cfg.dt, path.length)
                )
                self.ego = step_tps(self.ego, target, self.semantic.target_speed, cfg.dt)
                self._cap_speed()
                return
            control = stanley_control(
                self.ego, path, self.semantic.target_speed, self.params
            )
        sv, a = control.physical(self.params)
        self.ego = step_kinematic_single_track(self.ego, sv, a, self.params, cfg.dt)
        self._cap_speed()

    def _cap_speed(self) -> None:
        if self.ego.speed > self.config.speed_cap:
            self.ego = replace(self.ego, speed=self.config.speed_cap)

    def _replan_from(self, lane_id: str) -> None:
        exit_id = self.route[-1]
        if self._reachable(lane_id, exit_id):
            route = plan_route(self.network, lane_id, exit_id)
            if route is not None:
                self._install_route(route)
                s, _ = self.route_line.project(self.ego.x, self.ego.y)
                self.progress = s
                self._checkpoints = [c for c in self._checkpoints if c > s]

    def _control_path(self) -> Polyline:
        """Current semantic lane plus chosen branches, ~150 m of look-ahead."""
        net = self.network
        lid = self.semantic.lane_id
        n_succ = len(net.lanes[lid].successors)
        key = (lid, self.semantic.branch_idx % n_succ if n_succ else 0)
        cached = self._path_cache.get(key)
        if cached is not None:
            return cached
        lane = net.lanes[lid]
        poses = _slice_poses(lane.centerline, 0.0, lane.length)
        length = lane.length
        branch = self.semantic.branch_idx
        while length < 150.0 and net.lanes[lid].successors:
            succ = net.lanes[lid].successors
            lid = succ[branch % len(succ)]
            branch = 0  # the branch choice applies to the first junction only
            line = net.lanes[lid].centerline
            poses.extend(_slice_poses(line, 0.0, line.length))
            length += line.length
        path = _poses_to_line(poses)
        self._path_cache[key] = path
        return path

    def _sync_phantom(self) -> None:
        """Keep the traffic-side ego obstacle on the nearest route lane."""
        ph = self._ego_phantom
        net = self.network
        lane = net.lanes[ph.lane_id]
        idx = ph.route_idx if ph.route is self.route else 0
        candidates = set(self.route[max(0, idx - 1) : idx + 3])
        candidates.update(lane.successors)
        candidates.add(ph.lane_id)
        candidates.add(self.semantic.lane_id)
        for sid in (lane.left_id, lane.right_id):
            if sid is not None:
                candidates.add(sid)
        best = None
        for lid in sorted(candidates):
            s, lat = net.lanes[lid].centerline.project(self.ego.x, self.ego.y)
            if best is None or abs(lat) < best[0]:
                best = (abs(lat), lid, s)
        _, lid, s = best
        ph.lane_id = lid
        ph.s = s
        ph.speed = self.ego.speed
        try:
            ph.route_idx = self.route.index(lid)
            ph.route = self.route
        except ValueError:
            ph.route = [lid] + [sid for sid in net.lanes[lid].successors[:1]]
            ph.route_idx = 0
        if self.semantic.lane_id != lid:
            # follow the physical lane forward through the graph, but never
            # sideways: a pending lane change keeps its target assignment
            cur = net.lanes[self.semantic.lane_id]
            s_cur, _ = cur.centerline.project(self.ego.x, self.ego.y)
            if lid in cur.successors or s_cur >= cur.length - 0.25:
                self.semantic = replace(self.semantic, lane_id=lid, branch_idx=0)

    # -- termination and observation ---------------------------------------

    def _check_termination(self, lat: float) -> str:
        ego = self.ego
        me = (ego.x, ego.y, ego.heading)
        dims = (self.params.length, self.params.width)
        for aid, agent in self.world.agents.items():
            pose = self._poses[aid]
            p = agent.personality
            if (pose.x - ego.x) ** 2 + (pose.y - ego.y) ** 2 > 64.0:
                continue
            if boxes_collide(me, dims, (pose.x, pose.y, pose.heading), (p.length, p.width)):
                return "crash"
        if not self.network.contains_point(ego.x, ego.y):
            return "off_road"
        if abs(lat) > self.config.off_route_tolerance:
            return "off_route"
        end = self.route_line.end()
        if math.hypot(end.x - ego.x, end.y - ego.y) <= self.config.goal_tolerance:
            return "goal"
        if self.steps >= self.config.max_steps:
            return "timeout"
        return "running"

    def _observe(self) -> Observation:
        vehicles = [
            VehicleView(
                self._poses[aid], a.speed, a.personality.length, a.personality.width
            )
            for aid, a in self.world.agents.items()
        ]
        signal = None
        if self._signals is not None:
            jid = self._next_junction()
            if jid is not None:
                signal = self._signals.state(jid, self.steps * self.config.dt)
        view = SceneView(
            network=self.network,
            ego=self.ego,
            params=self.params,
            v_max=self.config.speed_cap,
            semantic=self.semantic,
            vehicles=vehicles,
            route=self.route_line,
            route_s=self.progress,
            signal=signal,
        )
        return self._stack.push(view)

    def _next_junction(self) -> str | None:
        idx = self._ego_phantom.route_idx
        for lid in self.route[idx:]:
            j = self.network.junction_of(lid)
            if j is not None:
                return j.id
        return None

    def _log_step(self, action, reward: float, reason: str) -> None:
        if isinstance(action, np.ndarray):
            action = action.tolist()
        elif isinstance(action, (np.integer, np.floating)):
            action = action.item()
        self.episode_log.append(
            {
                "t": self.steps,
                "action": action,
                "reward": round(reward, 9),
                "reason": reason,
                "ego": [
                    round(self.ego.x, 6),
                    round(self.ego.y, 6),
                    round(self.ego.heading, 6),
                    round(self.ego.speed, 6),
                ],
                "vehicles": {
                    str(aid): [
                        round(self._poses[aid].x, 6),
                        round(self._poses[aid].y, 6),
                        round(self._poses[aid].heading, 6),
                        round(self.world.agents[aid].speed, 6),
                    ]
                    for aid in sorted(self.world.agents)
                },
            }
        )

    def log_lines(self) -> list[str]:
        return [json.dumps(rec, sort_keys=True) for rec in self.episode_log]
