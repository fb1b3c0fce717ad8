"""Canonical map file format: versioned JSON, byte-stable for identical networks."""

from __future__ import annotations

import json
from pathlib import Path

from dojo.geometry import Polyline
from dojo.roadgen.network import Junction, Lane, RoadNetwork

SCHEMA_VERSION = 1


def _polyline_to_obj(line: Polyline) -> dict:
    return {
        "x": [float(v) for v in line.xs],
        "y": [float(v) for v in line.ys],
        "heading": [float(v) for v in line.headings],
    }


def _polyline_from_obj(obj: dict) -> Polyline:
    return Polyline(obj["x"], obj["y"], obj["heading"])


def network_to_dict(network: RoadNetwork) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario_kind": network.scenario_kind,
        "meta": network.meta,
        "lanes": [
            {
                "id": lane.id,
                "centerline": _polyline_to_obj(lane.centerline),
                "width": lane.width,
                "speed_limit": lane.speed_limit,
                "successors": lane.successors,
                "predecessors": lane.predecessors,
                "kind": lane.kind,
                "left_id": lane.left_id,
                "right_id": lane.right_id,
            }
            for lane in network.lanes.values()
        ],
        "junctions": [
            {
                "id": j.id,
                "incoming": j.incoming,
                "outgoing": j.outgoing,
                "internal": j.internal,
                "conflicts": [list(pair) for pair in j.conflicts],
                "priority": j.priority,
                "signal_plan": j.signal_plan,
            }
            for j in network.junctions.values()
        ],
        "boundaries": [_polyline_to_obj(b) for b in network.boundaries],
        "spawn_lanes": network.spawn_lanes,
        "exit_lanes": network.exit_lanes,
    }


def network_from_dict(data: dict) -> RoadNetwork:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported map schema version {data.get('schema_version')}")
    lanes = {}
    for obj in data["lanes"]:
        lanes[obj["id"]] = Lane(
            id=obj["id"],
            centerline=_polyline_from_obj(obj["centerline"]),
            width=obj["width"],
            speed_limit=obj["speed_limit"],
            successors=list(obj["successors"]),
            predecessors=list(obj["predecessors"]),
            kind=obj["kind"],
            left_id=obj["left_id"],
            right_id=obj["right_id"],
        )
    junctions = {}
    for obj in data["junctions"]:
        junctions[obj["id"]] = Junction(
            id=obj["id"],
            incoming=list(obj["incoming"]),
            outgoing=list(obj["outgoing"]),
            internal=list(obj["internal"]),
            conflicts=[tuple(p) for p in obj["conflicts"]],
            priority=dict(obj["priority"]),
            signal_plan=obj["signal_plan"],
        )
    return RoadNetwork(
        scenario_kind=data["scenario_kind"],
        lanes=lanes,
        junctions=junctions,
        boundaries=[_polyline_from_obj(b) for b in data["boundaries"]],
        spawn_lanes=list(data["spawn_lanes"]),
        exit_lanes=list(data["exit_lanes"]),
        meta=data["meta"],
    )


def dumps_map(network: RoadNetwork) -> str:
    # sort_keys plus repr-based float formatting keeps output byte-stable
    return json.dumps(network_to_dict(network), sort_keys=True, indent=1)


def export_map(network: RoadNetwork, destination: str | Path) -> Path:
    path = Path(destination)
    path.write_text(dumps_map(network))
    return path


def import_map(source: str | Path) -> RoadNetwork:
    return network_from_dict(json.loads(Path(source).read_text()))


def networks_equal(a: RoadNetwork, b: RoadNetwork) -> bool:
    return network_to_dict(a) == network_to_dict(b)
