from dojo.traffic.collision import boxes_collide, rect_corners, rects_overlap
from dojo.traffic.events import EventConfig, apply_traffic_events
from dojo.traffic.idm import desired_speed, idm_acceleration
from dojo.traffic.junctions import Approach, junction_arbitration
from dojo.traffic.lane_change import LaneView, lane_change_decision
from dojo.traffic.personality import (
    DEFAULT_CONSTELLATIONS,
    PARAM_GROUPS,
    PARAM_NAMES,
    DrivingPersonality,
    load_distribution_config,
    sample_personalities,
)
from dojo.traffic.routing import exits_reachable, plan_route, route_lane_changes, siblings
from dojo.traffic.world import (
    TrafficConfig,
    TrafficWorld,
    VehicleAgent,
    seed_initial_traffic,
    step_traffic,
)

__all__ = [
    "Approach",
    "DEFAULT_CONSTELLATIONS",
    "DrivingPersonality",
    "EventConfig",
    "LaneView",
    "PARAM_GROUPS",
    "PARAM_NAMES",
    "TrafficConfig",
    "TrafficWorld",
    "VehicleAgent",
    "apply_traffic_events",
    "boxes_collide",
    "desired_speed",
    "exits_reachable",
    "idm_acceleration",
    "junction_arbitration",
    "lane_change_decision",
    "load_distribution_config",
    "plan_route",
    "rect_corners",
    "rects_overlap",
    "route_lane_changes",
    "sample_personalities",
    "seed_initial_traffic",
    "siblings",
    "step_traffic",
]
