"""Seeded procedural generators for the five core scenario maps."""

from __future__ import annotations

import math

import numpy as np

from dojo.geometry import (
    ClothoidSegment,
    Polyline,
    Pose2D,
    normalize_angle,
    offset_polyline,
    sample_clothoid,
)
from dojo.roadgen.network import (
    KIND_ENTRY_RAMP,
    KIND_EXIT_RAMP,
    KIND_INTERNAL,
    KIND_NORMAL,
    Junction,
    Lane,
    RoadNetwork,
    extract_boundaries,
    internal_conflicts,
    validate,
)
from dojo.roadgen.params import ScenarioParams

SCENARIOS = ("intersection", "roundabout", "highway_entry", "highway_drive", "highway_exit")


class GenerationError(RuntimeError):
    """Raised when no valid network was produced within the retry cap."""


# ---------------------------------------------------------------- helpers


def hermite_blend(p0: Pose2D, p1: Pose2D, ds: float) -> Polyline:
    """Cubic blend between two poses with tangent continuity at both ends."""
    chord = math.hypot(p1.x - p0.x, p1.y - p0.y)
    scale = max(chord, 1e-6)
    m0 = (scale * math.cos(p0.heading), scale * math.sin(p0.heading))
    m1 = (scale * math.cos(p1.heading), scale * math.sin(p1.heading))
    n = max(4, int(math.ceil(1.3 * chord / ds)))
    t = np.linspace(0.0, 1.0, n + 1)
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    xs = h00 * p0.x + h10 * m0[0] + h01 * p1.x + h11 * m1[0]
    ys = h00 * p0.y + h10 * m0[1] + h01 * p1.y + h11 * m1[1]
    dx = np.gradient(xs)
    dy = np.gradient(ys)
    headings = np.arctan2(dy, dx)
    headings[0] = p0.heading
    headings[-1] = p1.heading
    return Polyline(xs, ys, headings)


def split_polyline(line: Polyline, s: float) -> tuple[Polyline, Polyline]:
    """Split at arc length s into two polylines sharing the split point."""
    if not 0.0 < s < line.length:
        raise ValueError(f"split point {s} outside (0, {line.length})")
    mid = line.interpolate(s)
    before = line.arclens < s - 1e-9
    after = line.arclens > s + 1e-9
    first = Polyline(
        np.append(line.xs[before], mid.x),
        np.append(line.ys[before], mid.y),
        np.append(line.headings[before], mid.heading),
    )
    second = Polyline(
        np.insert(line.xs[after], 0, mid.x),
        np.insert(line.ys[after], 0, mid.y),
        np.insert(line.headings[after], 0, mid.heading),
    )
    return first, second


def _uniform(rng: np.random.Generator, bounds) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _clipped_normal(rng: np.random.Generator, sigma: float, clip: float) -> float:
    return float(np.clip(rng.normal(0.0, sigma), -clip, clip))


def sample_intersection_road_count(rng: np.random.Generator, params: ScenarioParams) -> int:
    counts = sorted(params.intersection_road_count_weights)
    weights = np.array([params.intersection_road_count_weights[c] for c in counts])
    return int(rng.choice(counts, p=weights / weights.sum()))


def _build_road_lanes(
    lanes: dict[str, Lane],
    prefix: str,
    spine: Polyline,
    n_in: int,
    n_out: int,
    width: float,
    limit: float,
) -> tuple[list[str], list[str]]:
    """Two-way road around a spine whose direction points away from the junction.

    Incoming lanes (toward the junction) sit left of the spine and are indexed
    left-to-right from the inbound driver's view; outgoing lanes mirror that on
    the other side. Returns (incoming ids, outgoing ids).
    """
    incoming, outgoing = [], []
    for j in range(n_in):
        lid = f"{prefix}_in{j}"
        line = offset_polyline(spine, width / 2.0 + j * width).reversed()
        lanes[lid] = Lane(lid, line, width, limit, kind=KIND_NORMAL)
        incoming.append(lid)
    for j in range(n_out):
        lid = f"{prefix}_out{j}"
        line = offset_polyline(spine, -(width / 2.0 + j * width))
        lanes[lid] = Lane(lid, line, width, limit, kind=KIND_NORMAL)
        outgoing.append(lid)
    for ids in (incoming, outgoing):
        for j, lid in enumerate(ids):
            if j > 0:
                lanes[lid].left_id = ids[j - 1]
            if j + 1 < len(ids):
                lanes[lid].right_id = ids[j + 1]
    return incoming, outgoing


def _connect(lanes: dict[str, Lane], src: str, dst: str) -> None:
    if dst not in lanes[src].successors:
        lanes[src].successors.append(dst)
    if src not in lanes[dst].predecessors:
        lanes[dst].predecessors.append(src)


def _turn_class(h_in: float, h_out: float) -> int:
    turn = normalize_angle(h_out - h_in)
    if abs(turn) < math.pi / 4:
        return 0  # straight
    if turn < -math.pi / 4 and turn > -3 * math.pi / 4:
        return 1  # right
    if turn >= math.pi / 4 and turn < 3 * math.pi / 4:
        return 2  # left
    return 3  # u-turn


def _rank_connections(lanes: dict[str, Lane], internal_ids: list[str]) -> dict[str, int]:
    """Strict precedence over junction connections: straight > right > left > u-turn,
    ties broken by approach heading and id for a deterministic total order."""
    keyed = []
    for lid in internal_ids:
        line = lanes[lid].centerline
        h_in = line.start().heading
        h_out = line.end().heading
        keyed.append((_turn_class(h_in, h_out), round(h_in, 6), lid))
    keyed.sort()
    return {lid: rank for rank, (_, _, lid) in enumerate(keyed)}


# ---------------------------------------------------------------- intersection


def _build_intersection(rng: np.random.Generator, params: ScenarioParams) -> RoadNetwork:
    n_roads = sample_intersection_road_count(rng, params)
    w = params.lane_width
    limit = params.urban_speed_limit
    lanes: dict[str, Lane] = {}
    roads = []
    for a in range(n_roads):
        angle = normalize_angle(
            a * 2.0 * math.pi / n_roads
            + _clipped_normal(rng, params.angle_offset_sigma, params.angle_offset_clip)
        )
        dist = _uniform(rng, params.endpoint_distance_range)
        length = _uniform(rng, params.road_length_range)
        k0 = _uniform(rng, params.curvature_range)
        k1 = _uniform(rng, params.curvature_range)
        lane_counts = rng.choice(
            params.lane_count_choices, size=2, p=np.array(params.lane_count_weights)
        )
        n_in, n_out = int(lane_counts[0]), int(lane_counts[1])
        start = Pose2D(dist * math.cos(angle), dist * math.sin(angle), angle)
        spine = sample_clothoid(ClothoidSegment(start, length, k0, k1), params.sample_ds)
        incoming, outgoing = _build_road_lanes(lanes, f"r{a}", spine, n_in, n_out, w, limit)
        roads.append({"angle": angle, "incoming": incoming, "outgoing": outgoing})

    internal_ids = []
    for a, road in enumerate(roads):
        for j, inc in enumerate(road["incoming"]):
            end = lanes[inc].centerline.end()
            for b, other in enumerate(roads):
                if b == a:
                    continue
                out = other["outgoing"][min(j, len(other["outgoing"]) - 1)]
                cid = f"J_{inc}_{out}"
                line = hermite_blend(end, lanes[out].centerline.start(), params.sample_ds)
                lanes[cid] = Lane(cid, line, w, params.junction_speed_limit, kind=KIND_INTERNAL)
                _connect(lanes, inc, cid)
                _connect(lanes, cid, out)
                internal_ids.append(cid)
        # u-turn from the leftmost incoming lane keeps own-road exits reachable
        inc = road["incoming"][0]
        out = road["outgoing"][0]
        cid = f"J_{inc}_{out}"
        line = hermite_blend(lanes[inc].centerline.end(), lanes[out].centerline.start(), params.sample_ds)
        lanes[cid] = Lane(cid, line, w, params.junction_speed_limit, kind=KIND_INTERNAL)
        _connect(lanes, inc, cid)
        _connect(lanes, cid, out)
        internal_ids.append(cid)

    junction = Junction(
        id="J0",
        incoming=[lid for r in roads for lid in r["incoming"]],
        outgoing=[lid for r in roads for lid in r["outgoing"]],
        internal=internal_ids,
        conflicts=internal_conflicts(lanes, internal_ids),
        priority=_rank_connections(lanes, internal_ids),
    )
    network = RoadNetwork(
        scenario_kind="intersection",
        lanes=lanes,
        junctions={"J0": junction},
        boundaries=[],
        spawn_lanes=[lid for r in roads for lid in r["incoming"]],
        exit_lanes=[lid for r in roads for lid in r["outgoing"]],
        meta={"n_roads": n_roads, "road_angles": [r["angle"] for r in roads]},
    )
    network.boundaries = extract_boundaries(network.drivable_area())
    return network


# ---------------------------------------------------------------- roundabout


def _ellipse_pose(radius: float, phi: float, sx: float, sy: float) -> Pose2D:
    return Pose2D(
        sx * radius * math.cos(phi),
        sy * radius * math.sin(phi),
        math.atan2(sy * math.cos(phi), -sx * math.sin(phi)),
    )


def _ring_arc(radius: float, phi0: float, phi1: float, sx: float, sy: float, ds: float) -> Polyline:
    n = max(3, int(math.ceil((phi1 - phi0) * radius / ds)))
    phis = np.linspace(phi0, phi1, n + 1)
    xs = sx * radius * np.cos(phis)
    ys = sy * radius * np.sin(phis)
    headings = np.arctan2(sy * np.cos(phis), -sx * np.sin(phis))
    return Polyline(xs, ys, headings)


def _build_roundabout(rng: np.random.Generator, params: ScenarioParams) -> RoadNetwork:
    n_roads = int(rng.choice(params.roundabout_road_count_choices))
    radius = _uniform(rng, params.roundabout_radius_range)
    n_ring = int(rng.choice(params.roundabout_ring_lane_choices))
    sx = _uniform(rng, params.squeeze_range_x)
    sy = _uniform(rng, params.squeeze_range_y)
    w = params.lane_width
    limit = params.urban_speed_limit
    ring_limit = params.junction_speed_limit
    delta = min(0.6, max(0.3, 6.0 / radius))
    spacing = 2.0 * math.pi / n_roads
    anchor_dist = radius + w / 2.0 + 4.0

    lanes: dict[str, Lane] = {}
    roads = []
    for a in range(n_roads):
        phi = a * spacing
        length = _uniform(rng, params.roundabout_road_length_range)
        # incoming roads reuse one curvature value for both clothoid ends
        k = _uniform(rng, params.roundabout_curvature_range)
        tilt = float(rng.normal(0.0, params.roundabout_endpoint_angle_sigma))
        anchor = _ellipse_pose(anchor_dist, phi, sx, sy)
        outward = math.atan2(math.sin(phi) / sy, math.cos(phi) / sx) + tilt
        start = Pose2D(anchor.x, anchor.y, outward)
        spine = sample_clothoid(ClothoidSegment(start, length, k, k), params.sample_ds)
        incoming, outgoing = _build_road_lanes(lanes, f"r{a}", spine, 1, 1, w, limit)
        roads.append({"phi": phi, "incoming": incoming[0], "outgoing": outgoing[0]})

    # ring arcs between road zones, per ring lane (0 = outer)
    arc_ids = {}
    for ell in range(n_ring):
        r_ell = radius - ell * w
        for a in range(n_roads):
            phi0 = a * spacing + delta
            phi1 = (a + 1) * spacing - delta
            lid = f"ring{ell}_a{a}"
            lanes[lid] = Lane(
                lid, _ring_arc(r_ell, phi0, phi1, sx, sy, params.sample_ds),
                w, ring_limit, kind=KIND_NORMAL,
            )
            arc_ids[(ell, a)] = lid
    for a in range(n_roads):
        if n_ring == 2:
            outer, inner = arc_ids[(0, a)], arc_ids[(1, a)]
            lanes[outer].left_id = inner   # circulating CCW, inside is to the left
            lanes[inner].right_id = outer

    junctions = {}
    for a in range(n_roads):
        road = roads[a]
        phi = road["phi"]
        jid = f"J{a}"
        internal_ids = []
        for ell in range(n_ring):
            r_ell = radius - ell * w
            tid = f"{jid}_ring{ell}"
            lanes[tid] = Lane(
                tid, _ring_arc(r_ell, phi - delta, phi + delta, sx, sy, params.sample_ds),
                w, ring_limit, kind=KIND_INTERNAL,
            )
            prev_arc = arc_ids[(ell, (a - 1) % n_roads)]
            _connect(lanes, prev_arc, tid)
            _connect(lanes, tid, arc_ids[(ell, a)])
            internal_ids.append(tid)
        # exit: outer ring at phi - delta -> outgoing lane; entry: incoming lane -> outer ring at phi + delta
        eid = f"{jid}_exit"
        lanes[eid] = Lane(
            eid,
            hermite_blend(
                _ellipse_pose(radius, phi - delta, sx, sy),
                lanes[road["outgoing"]].centerline.start(),
                params.sample_ds,
            ),
            w, ring_limit, kind=KIND_INTERNAL,
        )
        _connect(lanes, arc_ids[(0, (a - 1) % n_roads)], eid)
        _connect(lanes, eid, road["outgoing"])
        nid = f"{jid}_entry"
        lanes[nid] = Lane(
            nid,
            hermite_blend(
                lanes[road["incoming"]].centerline.end(),
                _ellipse_pose(radius, phi + delta, sx, sy),
                params.sample_ds,
            ),
            w, ring_limit, kind=KIND_INTERNAL,
        )
        _connect(lanes, road["incoming"], nid)
        _connect(lanes, nid, arc_ids[(0, a)])
        internal_ids.extend([eid, nid])
        priority = {}
        for ell in range(n_ring):
            priority[f"{jid}_ring{ell}"] = ell  # circulating traffic first
        priority[eid] = n_ring
        priority[nid] = n_ring + 1
        junctions[jid] = Junction(
            id=jid,
            incoming=[road["incoming"], *[arc_ids[(ell, (a - 1) % n_roads)] for ell in range(n_ring)]],
            outgoing=[road["outgoing"], *[arc_ids[(ell, a)] for ell in range(n_ring)]],
            internal=internal_ids,
            conflicts=internal_conflicts(lanes, internal_ids),
            priority=priority,
        )

    network = RoadNetwork(
        scenario_kind="roundabout",
        lanes=lanes,
        junctions=junctions,
        boundaries=[],
        spawn_lanes=[r["incoming"] for r in roads],
        exit_lanes=[r["outgoing"] for r in roads],
        meta={
            "n_roads": n_roads,
            "ring_radius": radius,
            "ring_lanes": n_ring,
            "squeeze": [sx, sy],
        },
    )
    network.boundaries = extract_boundaries(network.drivable_area())
    return network


# ---------------------------------------------------------------- highway


MERGE_ZONE = 25.0  # m of lane treated as junction-internal around a merge


def _build_highway(rng: np.random.Generator, params: ScenarioParams, variant: str) -> RoadNetwork:
    assert variant in ("entry", "drive", "exit")
    w = params.lane_width
    limit = params.highway_speed_limit
    n_seg = int(rng.integers(params.highway_segment_count_range[0],
                             params.highway_segment_count_range[1] + 1))
    seg_lengths = [_uniform(rng, params.highway_segment_length_range) for _ in range(n_seg)]
    joints = [_uniform(rng, params.highway_curvature_range) for _ in range(n_seg + 1)]
    n_lanes = int(rng.choice(params.highway_lane_count_choices))

    spines = []
    cursor = Pose2D(0.0, 0.0, 0.0)
    for i in range(n_seg):
        seg = ClothoidSegment(cursor, seg_lengths[i], joints[i], joints[i + 1])
        line = sample_clothoid(seg, params.sample_ds)
        spines.append(line)
        cursor = line.end()

    lanes: dict[str, Lane] = {}
    for i, spine in enumerate(spines):
        ids = []
        for j in range(n_lanes):
            offset = ((n_lanes - 1) / 2.0 - j) * w
            lid = f"s{i}_l{j}"
            lanes[lid] = Lane(lid, offset_polyline(spine, offset), w, limit, kind=KIND_NORMAL)
            ids.append(lid)
        for j, lid in enumerate(ids):
            if j > 0:
                lanes[lid].left_id = ids[j - 1]
            if j + 1 < n_lanes:
                lanes[lid].right_id = ids[j + 1]
            if i > 0:
                _connect(lanes, f"s{i-1}_l{j}", lid)

    junctions = {}
    spawn_lanes = [f"s0_l{j}" for j in range(n_lanes)]
    exit_lanes = [f"s{n_seg-1}_l{j}" for j in range(n_lanes)]
    meta = {
        "n_segments": n_seg,
        "n_lanes": n_lanes,
        "segment_lengths": seg_lengths,
        "joint_curvatures": joints,
    }
    right = n_lanes - 1

    if variant == "entry":
        ramp_len = _uniform(rng, params.ramp_length_range)
        ref = joints[0]
        k_ramp = min(joints[0], joints[1]) - params.ramp_curvature_margin \
            - float(rng.uniform(0.0, params.ramp_curvature_spread))
        merge_lane = f"s1_l{right}"
        merge_pose = lanes[merge_lane].centerline.start()
        # integrate the ramp backwards from the merge pose, then flip
        back_start = Pose2D(merge_pose.x, merge_pose.y, merge_pose.heading + math.pi)
        back = sample_clothoid(ClothoidSegment(back_start, ramp_len, -k_ramp, -k_ramp), params.sample_ds)
        ramp_line = back.reversed()
        ramp_main, ramp_conn_line = split_polyline(ramp_line, ramp_line.length - MERGE_ZONE)
        lanes["ramp"] = Lane("ramp", ramp_main, w, limit, kind=KIND_ENTRY_RAMP)
        lanes["ramp_conn"] = Lane("ramp_conn", ramp_conn_line, w, limit, kind=KIND_INTERNAL)
        _connect(lanes, "ramp", "ramp_conn")
        _connect(lanes, "ramp_conn", merge_lane)
        # the merging stretch of the mainline right lane becomes junction-internal
        pre = f"s0_l{right}"
        main_part, through_line = split_polyline(
            lanes[pre].centerline, lanes[pre].centerline.length - MERGE_ZONE
        )
        lanes[pre].centerline = main_part
        tid = "merge_through"
        lanes[tid] = Lane(tid, through_line, w, limit, kind=KIND_INTERNAL)
        lanes[pre].successors = [tid]
        lanes[merge_lane].predecessors.remove(pre)
        _connect(lanes, pre, tid)
        _connect(lanes, tid, merge_lane)
        junctions["Jmerge"] = Junction(
            id="Jmerge",
            incoming=[pre, "ramp"],
            outgoing=[merge_lane],
            internal=[tid, "ramp_conn"],
            conflicts=[(tid, "ramp_conn")],
            priority={tid: 0, "ramp_conn": 1},
        )
        spawn_lanes = ["ramp"]
        meta["ramp_curvature"] = k_ramp
        meta["ramp_reference_curvature"] = ref
    elif variant == "exit":
        ramp_len = _uniform(rng, params.ramp_length_range)
        ref = joints[n_seg]
        k_ramp = min(joints[n_seg - 1], joints[n_seg]) - params.ramp_curvature_margin \
            - float(rng.uniform(0.0, params.ramp_curvature_spread))
        split_pose = lanes[f"s{n_seg-1}_l{right}"].centerline.start()
        ramp_line = sample_clothoid(
            ClothoidSegment(split_pose, ramp_len, k_ramp, k_ramp), params.sample_ds
        )
        lanes["ramp"] = Lane("ramp", ramp_line, w, limit, kind=KIND_EXIT_RAMP)
        _connect(lanes, f"s{n_seg-2}_l{right}", "ramp")
        exit_lanes = exit_lanes + ["ramp"]
        meta["ramp_curvature"] = k_ramp
        meta["ramp_reference_curvature"] = ref

    network = RoadNetwork(
        scenario_kind=f"highway_{variant}",
        lanes=lanes,
        junctions=junctions,
        boundaries=[],
        spawn_lanes=spawn_lanes,
        exit_lanes=exit_lanes,
        meta=meta,
    )
    network.boundaries = extract_boundaries(network.drivable_area())
    return network


# ---------------------------------------------------------------- entry points


def _generate(builder, rng: np.random.Generator, params: ScenarioParams, *args) -> RoadNetwork:
    last_report = None
    for _ in range(params.retry_cap):
        network = builder(rng, params, *args)
        report = validate(network)
        if report.ok:
            return network
        last_report = report
    raise GenerationError(f"no valid map within {params.retry_cap} attempts: {last_report.violations}")


def generate_intersection(rng: np.random.Generator, params: ScenarioParams) -> RoadNetwork:
    return _generate(_build_intersection, rng, params)


def generate_roundabout(rng: np.random.Generator, params: ScenarioParams) -> RoadNetwork:
    return _generate(_build_roundabout, rng, params)


def generate_highway(rng: np.random.Generator, params: ScenarioParams, variant: str) -> RoadNetwork:
    return _generate(_build_highway, rng, params, variant)


def generate_map(scenario: str, seed: int, params: ScenarioParams | None = None) -> RoadNetwork:
    """Generate any core scenario map from a map seed."""
    params = params or ScenarioParams()
    rng = np.random.default_rng(seed)
    if scenario == "intersection":
        return generate_intersection(rng, params)
    if scenario == "roundabout":
        return generate_roundabout(rng, params)
    if scenario.startswith("highway_"):
        return generate_highway(rng, params, scenario.removeprefix("highway_"))
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
