"""Road network model: lanes, junctions, boundaries, validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString, MultiPoint, Point
from shapely.ops import unary_union
from shapely.prepared import prep

from dojo.geometry import Polyline, normalize_angle, segments_intersect

LANE_CONTINUITY_TOL = 0.05  # m, max gap between a lane end and its successor start

KIND_NORMAL = "normal"
KIND_INTERNAL = "internal"
KIND_ENTRY_RAMP = "entry_ramp"
KIND_EXIT_RAMP = "exit_ramp"


@dataclass
class Lane:
    id: str
    centerline: Polyline
    width: float
    speed_limit: float
    successors: list[str] = field(default_factory=list)
    predecessors: list[str] = field(default_factory=list)
    kind: str = KIND_NORMAL
    left_id: str | None = None   # same-direction neighbor, for lane changes
    right_id: str | None = None

    @property
    def length(self) -> float:
        return self.centerline.length


@dataclass
class Junction:
    id: str
    incoming: list[str]
    outgoing: list[str]
    internal: list[str]
    # symmetric conflict pairs between internal lanes (crossing or merging)
    conflicts: list[tuple[str, str]] = field(default_factory=list)
    # internal lane id -> precedence rank; lower rank proceeds first
    priority: dict[str, int] = field(default_factory=dict)
    signal_plan: list[dict] | None = None

    def conflicts_of(self, lane_id: str) -> list[str]:
        out = []
        for a, b in self.conflicts:
            if a == lane_id:
                out.append(b)
            elif b == lane_id:
                out.append(a)
        return out


class RoadNetwork:
    def __init__(
        self,
        scenario_kind: str,
        lanes: dict[str, Lane],
        junctions: dict[str, Junction],
        boundaries: list[Polyline],
        spawn_lanes: list[str],
        exit_lanes: list[str],
        meta: dict | None = None,
    ):
        self.scenario_kind = scenario_kind
        self.lanes = lanes
        self.junctions = junctions
        self.boundaries = boundaries
        self.spawn_lanes = spawn_lanes
        self.exit_lanes = exit_lanes
        self.meta = meta or {}
        self._drivable = None
        self._drivable_prepared = None
        self._junction_of_internal = {}
        for j in junctions.values():
            for lid in j.internal:
                self._junction_of_internal[lid] = j.id

    def lane(self, lane_id: str) -> Lane:
        return self.lanes[lane_id]

    def junction_of(self, internal_lane_id: str) -> Junction | None:
        jid = self._junction_of_internal.get(internal_lane_id)
        return self.junctions[jid] if jid is not None else None

    def neighbors(self, lane_id: str) -> list[str]:
        """Successor graph edges augmented with same-road lane-change adjacency."""
        lane = self.lanes[lane_id]
        out = list(lane.successors)
        if lane.left_id is not None:
            out.append(lane.left_id)
        if lane.right_id is not None:
            out.append(lane.right_id)
        return out

    def reachable(self, lane_id: str) -> set[str]:
        seen = {lane_id}
        stack = [lane_id]
        while stack:
            cur = stack.pop()
            for nxt in self.neighbors(cur):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def drivable_area(self):
        """Union polygon of all lane corridors (lazily built and cached)."""
        if self._drivable is None:
            shapes = []
            for lane in self.lanes.values():
                ls = LineString(np.column_stack([lane.centerline.xs, lane.centerline.ys]))
                # slight over-buffer so side-by-side corridors overlap cleanly
                shapes.append(ls.buffer(lane.width / 2.0 + 0.05, quad_segs=4))
            # junction interiors are fully paved: fill each with the hull of
            # its internal connections so crossing corridors leave no slivers
            for j in self.junctions.values():
                pts = np.vstack(
                    [
                        np.column_stack([self.lanes[lid].centerline.xs, self.lanes[lid].centerline.ys])
                        for lid in j.internal
                    ]
                )
                hull = MultiPoint(pts[:: max(1, len(pts) // 64)]).convex_hull
                shapes.append(hull.buffer(1.0, quad_segs=2))
            self._drivable = unary_union(shapes)
        return self._drivable

    def contains_point(self, x: float, y: float) -> bool:
        if self._drivable_prepared is None:
            self._drivable_prepared = prep(self.drivable_area())
        return bool(self._drivable_prepared.contains(Point(x, y)))

    def nearest_lane(self, x: float, y: float, kinds: tuple[str, ...] | None = None) -> tuple[str, float, float]:
        """Nearest lane id plus (arc length, lateral offset) of the projection."""
        best = None
        for lane in self.lanes.values():
            if kinds is not None and lane.kind not in kinds:
                continue
            s, lat = lane.centerline.project(x, y)
            if best is None or abs(lat) < abs(best[2]):
                best = (lane.id, s, lat)
        if best is None:
            raise ValueError("network has no lanes of the requested kind")
        return best


def extract_boundaries(area) -> list[Polyline]:
    """Boundary rings of a (multi)polygon as heading-annotated polylines."""
    area = area.simplify(0.02)
    polys = list(area.geoms) if area.geom_type == "MultiPolygon" else [area]
    out = []
    for poly in polys:
        for ring in [poly.exterior, *poly.interiors]:
            coords = np.asarray(ring.coords)
            xs, ys = coords[:, 0], coords[:, 1]
            # drop duplicate consecutive points that would break arc lengths
            keep = np.concatenate(([True], np.hypot(np.diff(xs), np.diff(ys)) > 1e-9))
            xs, ys = xs[keep], ys[keep]
            if len(xs) < 3:
                continue
            h = np.arctan2(np.diff(ys, append=ys[1]), np.diff(xs, append=xs[1]))
            out.append(Polyline(xs, ys, h))
    return out


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(network: RoadNetwork) -> ValidationReport:
    report = ValidationReport()
    lanes = network.lanes

    for lane in lanes.values():
        if lane.width <= 0:
            report.violations.append(f"lane {lane.id}: non-positive width")
        for succ in lane.successors:
            if succ not in lanes:
                report.violations.append(f"lane {lane.id}: unknown successor {succ}")
                continue
            end = lane.centerline.end()
            start = lanes[succ].centerline.start()
            gap = math.hypot(end.x - start.x, end.y - start.y)
            if gap > LANE_CONTINUITY_TOL:
                report.violations.append(
                    f"lane {lane.id} -> {succ}: continuity gap {gap:.3f} m"
                )

    # every lane must lead somewhere or be a terminal exit
    exit_set = set(network.exit_lanes)
    for lane in lanes.values():
        if not lane.successors and lane.id not in exit_set:
            report.violations.append(f"lane {lane.id}: dangling (no successor, not an exit)")

    # every exit reachable from every spawn candidate
    for spawn in network.spawn_lanes:
        reach = network.reachable(spawn)
        for ex in network.exit_lanes:
            if ex not in reach:
                report.violations.append(f"exit {ex} unreachable from spawn {spawn}")

    # boundary rings must be simple
    for i, b in enumerate(network.boundaries):
        ls = LineString(np.column_stack([b.xs, b.ys]))
        if not ls.is_simple:
            report.violations.append(f"boundary {i}: self-intersecting")

    # junction bookkeeping
    for j in network.junctions.values():
        internal = set(j.internal)
        for inc in j.incoming:
            succ_internal = [s for s in lanes[inc].successors if s in internal]
            if not succ_internal:
                report.violations.append(
                    f"junction {j.id}: incoming lane {inc} has no internal connection"
                )
        for a, b in j.conflicts:
            ra, rb = j.priority.get(a), j.priority.get(b)
            if ra is None or rb is None or ra == rb:
                report.violations.append(
                    f"junction {j.id}: conflict ({a}, {b}) lacks a strict priority order"
                )

    # ramp curvature constraints recorded by the highway generator
    kind = network.scenario_kind
    if kind in ("highway_entry", "highway_exit"):
        k_ramp = network.meta.get("ramp_curvature")
        c_ref = network.meta.get("ramp_reference_curvature")
        if k_ramp is None or c_ref is None:
            report.violations.append(f"{kind}: missing ramp curvature metadata")
        elif not k_ramp <= c_ref - 0.01 + 1e-12:
            report.violations.append(
                f"{kind}: ramp curvature {k_ramp} violates <= {c_ref} - 0.01"
            )
    return report


def internal_conflicts(lanes: dict[str, Lane], internal_ids: list[str]) -> list[tuple[str, str]]:
    """Conflict pairs among internal lanes: crossing paths or shared merge point."""
    pairs = []
    for i, a in enumerate(internal_ids):
        la = lanes[a]
        ea = la.centerline.end()
        sa = la.centerline.start()
        for b in internal_ids[i + 1:]:
            lb = lanes[b]
            sb = lb.centerline.start()
            if math.hypot(sa.x - sb.x, sa.y - sb.y) < 0.5:
                continue  # diverging from a common point is not a conflict
            eb = lb.centerline.end()
            if math.hypot(ea.x - eb.x, ea.y - eb.y) < 0.5:
                pairs.append((a, b))  # merge into the same point
            elif segments_intersect(la.centerline, lb.centerline):
                pairs.append((a, b))
            else:
                # paths that pass within vehicle reach conflict even without
                # a strict crossing; parallel adjacent movements stay free
                d, ha, hb = _closest_vertices(la.centerline, lb.centerline)
                if d < 2.0:
                    pairs.append((a, b))
                elif d < 3.0 and 0.35 < abs(normalize_angle(ha - hb)) < 2.8:
                    pairs.append((a, b))
    return pairs


def _closest_vertices(ca: Polyline, cb: Polyline) -> tuple[float, float, float]:
    """Minimum vertex distance between two polylines and the headings there."""
    dx = ca.xs[:, None] - cb.xs[None, :]
    dy = ca.ys[:, None] - cb.ys[None, :]
    d2 = dx * dx + dy * dy
    i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
    return math.sqrt(float(d2[i, j])), float(ca.headings[i]), float(cb.headings[j])
