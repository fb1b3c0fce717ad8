"""Route planning helpers over the lane graph (successors + lane-change adjacency)."""

from __future__ import annotations

from collections import deque

from dojo.roadgen import RoadNetwork


def exits_reachable_by_successors(network: RoadNetwork) -> dict[str, frozenset[str]]:
    """Per lane: exit lanes reachable without any lane change."""
    return _reverse_reach(network, with_adjacency=False)


def exits_reachable(network: RoadNetwork) -> dict[str, frozenset[str]]:
    """Per lane: exit lanes reachable allowing lane changes."""
    return _reverse_reach(network, with_adjacency=True)


def _reverse_reach(network: RoadNetwork, with_adjacency: bool) -> dict[str, frozenset[str]]:
    reach: dict[str, set[str]] = {lid: set() for lid in network.lanes}
    for ex in network.exit_lanes:
        seen = {ex}
        queue = deque([ex])
        reach[ex].add(ex)
        while queue:
            cur = queue.popleft()
            lane = network.lanes[cur]
            back = list(lane.predecessors)
            if with_adjacency:
                if lane.left_id is not None:
                    back.append(lane.left_id)
                if lane.right_id is not None:
                    back.append(lane.right_id)
            for prev in back:
                if prev not in seen:
                    seen.add(prev)
                    reach[prev].add(ex)
                    queue.append(prev)
    return {lid: frozenset(s) for lid, s in reach.items()}


def siblings(network: RoadNetwork, lane_id: str) -> list[str]:
    """All same-direction lanes of the road, leftmost first (includes lane_id)."""
    lane = network.lanes[lane_id]
    chain = [lane_id]
    cur = lane
    while cur.left_id is not None:
        chain.insert(0, cur.left_id)
        cur = network.lanes[cur.left_id]
    cur = lane
    while cur.right_id is not None:
        chain.append(cur.right_id)
        cur = network.lanes[cur.right_id]
    return chain


def plan_route(network: RoadNetwork, start: str, exit_id: str) -> list[str] | None:
    """Shortest lane sequence from start to the exit, deterministic tie-breaking.

    Consecutive entries are either successor edges or same-road adjacency
    edges (the latter require a lane change before the lane ends).
    """
    if start == exit_id:
        return [start]
    prev: dict[str, str] = {start: start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in network.neighbors(cur):
            if nxt in prev:
                continue
            prev[nxt] = cur
            if nxt == exit_id:
                path = [nxt]
                while path[-1] != start:
                    path.append(prev[path[-1]])
                path.reverse()
                return path
            queue.append(nxt)
    return None


def route_lane_changes(network: RoadNetwork, route: list[str]) -> int:
    """Number of adjacency (lane-change) edges along a route."""
    count = 0
    for a, b in zip(route, route[1:]):
        if b not in network.lanes[a].successors:
            count += 1
    return count
