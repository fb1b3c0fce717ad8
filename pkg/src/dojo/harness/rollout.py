"""Episode rollouts with builtin policies and persisted logs."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from dojo.actions import SEMANTIC_ACTIONS
from dojo.env import DrivingEnv, EpisodeConfig
from dojo.roadgen import KIND_INTERNAL

from dojo.harness.metrics import RunRecord


class RandomPolicy:
    """Uniform over the configured action space, seeded per episode."""

    def reset(self, env: DrivingEnv, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def act(self, env: DrivingEnv, obs):
        space = env.config.action_space
        if space == "continuous":
            return self.rng.uniform(-1.0, 1.0, size=2)
        if space == "discrete":
            return int(self.rng.integers(25))
        return int(self.rng.integers(len(SEMANTIC_ACTIONS)))


class ScriptedFollowPolicy:
    """Rule-based semantic baseline: hold lane, track a safe speed.

    Slows for leaders, curves, junction foes and the final goal; otherwise
    nudges the target speed toward the lane limit. Sanity baseline only.
    """

    COMFORT_DECEL = 2.0  # m/s^2 assumed when planning slow-downs
    LAT_ACCEL = 2.5  # m/s^2 comfort bound in curves

    def reset(self, env: DrivingEnv, seed: int) -> None:
        if env.config.action_space != "semantic":
            raise ValueError("scripted-follow requires the semantic action space")

    def act(self, env: DrivingEnv, obs) -> str:
        lateral = self._route_action(env)
        if lateral is not None:
            return lateral
        desired = self._desired_speed(env)
        target = env.semantic.target_speed
        if target > desired + 0.5:
            return "slower"
        if target < desired - 0.5:
            return "faster"
        return "noop"

    def _route_action(self, env: DrivingEnv) -> str | None:
        """Lane change or branch choice when the planned route demands one."""
        sem = env.semantic
        net = env.network
        try:
            i = env.route.index(sem.lane_id)
        except ValueError:
            return None
        if i + 1 >= len(env.route):
            return None
        nxt = env.route[i + 1]
        lane = net.lanes[sem.lane_id]
        if nxt == lane.left_id or nxt == lane.right_id:
            # wait until settled on the current lane so successive sibling
            # steps do not stack lateral offsets beyond the route tolerance
            _, lat = lane.centerline.project(env.ego.x, env.ego.y)
            if abs(lat) > 1.0:
                return None
            return "lane_left" if nxt == lane.left_id else "lane_right"
        if nxt in lane.successors and len(lane.successors) > 1:
            want = lane.successors.index(nxt)
            cur = sem.branch_idx % len(lane.successors)
            if cur != want:
                step_left = (cur - want) % len(lane.successors)
                return "lane_left" if step_left == 1 else "lane_right"
        return None

    def _desired_speed(self, env: DrivingEnv) -> float:
        net = env.network
        ph = env._ego_phantom
        limit = net.lanes[ph.lane_id].speed_limit
        desired = min(limit, env.config.speed_cap)

        # stop at the goal: stay below the speed we can shed before the end
        rem = max(env.route_line.length - env.progress - 2.0, 0.0)
        desired = min(desired, math.sqrt(2.0 * self.COMFORT_DECEL * rem))

        desired = min(desired, self._curve_speed(env))
        desired = min(desired, self._leader_speed(env))
        desired = min(desired, self._junction_speed(env))
        return desired

    def _curve_speed(self, env: DrivingEnv) -> float:
        """Allowed speed from route curvature over a braking-aware preview."""
        line = env.route_line
        s0 = env.progress
        v = max(env.ego.speed, 1.0)
        allowed = math.inf
        prev = line.interpolate(min(s0, line.length)).heading
        step = 6.0
        for d in np.arange(step, max(2.0 * v, 30.0) + step, step):
            s = min(s0 + d, line.length)
            h = line.interpolate(s).heading
            dh = abs(math.remainder(h - prev, math.tau))
            prev = h
            kappa = dh / step
            if kappa < 1e-4:
                continue
            v_curve = math.sqrt(self.LAT_ACCEL / kappa)
            # what we may drive now and still brake down to v_curve by s
            allowed = min(
                allowed,
                math.sqrt(v_curve**2 + 2.0 * self.COMFORT_DECEL * max(d - 4.0, 0.0)),
            )
        return allowed

    def _leader_speed(self, env: DrivingEnv) -> float:
        world = env.world
        ph = env._ego_phantom
        # occupancy without the ego's own traffic-side phantom
        occ: dict[str, list] = {}
        for a in world.agents.values():
            occ.setdefault(a.lane_id, []).append(a)
        for lst in occ.values():
            lst.sort(key=lambda a: (a.s, a.id))
        lead = world._nearest_ahead(ph.lane_id, ph.s, ph.half_length, occ)
        if lead is None:
            return math.inf
        gap, leader = lead
        safe = leader.speed + (gap - 4.0 - env.ego.speed * 1.2) / 2.0
        return max(safe, 0.0)

    def _junction_speed(self, env: DrivingEnv) -> float:
        """Yield ahead of the next junction while any foe is in or near it."""
        net = env.network
        ph = env._ego_phantom
        d = net.lanes[ph.lane_id].length - ph.s
        jid = None
        for lid in env.route[ph.route_idx + 1 :]:
            lane = net.lanes[lid]
            if lane.kind == KIND_INTERNAL:
                jid = net._junction_of_internal.get(lid)
                break
            d += lane.length
            if d > 80.0:
                break
        if jid is None or d > 80.0:
            return math.inf
        j = net.junctions[jid]
        watched = set(j.internal)
        for inc in j.incoming:
            watched.add(inc)
        busy = any(
            a.lane_id in watched
            and (a.lane_id not in j.incoming
                 or net.lanes[a.lane_id].length - a.s < 25.0)
            for a in env.world.agents.values()
        )
        if not busy:
            return math.inf
        return math.sqrt(2.0 * self.COMFORT_DECEL * max(d - 4.0, 0.0))


POLICIES = {"random": RandomPolicy, "follow": ScriptedFollowPolicy}


def make_policy(source):
    """Accepts a builtin policy name or any object with reset/act."""
    if isinstance(source, str):
        if source not in POLICIES:
            raise ValueError(f"unknown policy {source!r}; expected one of {sorted(POLICIES)}")
        return POLICIES[source]()
    if not (hasattr(source, "reset") and hasattr(source, "act")):
        raise TypeError("external policy must provide reset(env, seed) and act(env, obs)")
    return source


def run_rollouts(
    config: EpisodeConfig,
    policy,
    seeds,
    out_dir: str | Path | None = None,
    max_steps: int | None = None,
) -> list[RunRecord]:
    """One episode per master seed; returns RunRecords, optionally writes logs."""
    policy = make_policy(policy)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    records = []
    env = DrivingEnv(config)
    limit = max_steps if max_steps is not None else config.max_steps
    for seed in seeds:
        obs = env.reset(master_seed=seed)
        policy.reset(env, seed)
        total = 0.0
        reason = "timeout"
        for _ in range(limit):
            res = env.step(policy.act(env, obs))
            obs = res.observation
            total += res.reward
            if res.terminated:
                reason = res.reason
                break
        records.append(
            RunRecord(
                seed=seed,
                total_return=total,
                outcome=reason,
                steps=env.steps,
                completion=min(env.progress / env.route_line.length, 1.0),
            )
        )
        if out is not None:
            path = out / f"episode_{seed}.jsonl"
            path.write_text("\n".join(env.log_lines()) + "\n")
    return records


def parse_seed_range(text: str) -> list[int]:
    """"a..b" (inclusive), "a,b,c", or a single integer."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    if "," in text:
        return [int(t) for t in text.split(",") if t.strip()]
    return [int(text)]
