"""Scenario generation parameter distributions with checked-in defaults."""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class ScenarioParams:
    # intersection
    intersection_road_count_weights: dict[int, float] = field(
        default_factory=lambda: {3: 0.3, 4: 0.5, 5: 0.2}
    )
    lane_count_choices: list[int] = field(default_factory=lambda: [1, 2, 3])
    lane_count_weights: list[float] = field(default_factory=lambda: [0.5, 0.35, 0.15])
    angle_offset_sigma: float = 0.15
    angle_offset_clip: float = 0.4
    endpoint_distance_range: tuple[float, float] = (15.0, 30.0)
    road_length_range: tuple[float, float] = (50.0, 100.0)
    curvature_range: tuple[float, float] = (-0.02, 0.02)

    # roundabout
    roundabout_road_count_choices: list[int] = field(default_factory=lambda: [3, 4, 5])
    roundabout_radius_range: tuple[float, float] = (12.0, 25.0)
    roundabout_ring_lane_choices: list[int] = field(default_factory=lambda: [1, 2])
    squeeze_range_x: tuple[float, float] = (0.75, 1.0)
    squeeze_range_y: tuple[float, float] = (0.75, 1.0)
    roundabout_endpoint_angle_sigma: float = 0.08
    roundabout_road_length_range: tuple[float, float] = (40.0, 80.0)
    roundabout_curvature_range: tuple[float, float] = (-0.01, 0.01)

    # highway
    highway_segment_length_range: tuple[float, float] = (100.0, 200.0)
    highway_segment_count_range: tuple[int, int] = (4, 6)
    highway_lane_count_choices: list[int] = field(default_factory=lambda: [2, 3])
    highway_curvature_range: tuple[float, float] = (-0.004, 0.004)
    ramp_length_range: tuple[float, float] = (70.0, 110.0)
    ramp_curvature_margin: float = 0.01  # ramp curvature <= reference - margin
    ramp_curvature_spread: float = 0.005

    # shared
    lane_width: float = 3.5
    urban_speed_limit: float = 13.889
    highway_speed_limit: float = 36.111
    junction_speed_limit: float = 10.0
    sample_ds: float = 1.0
    retry_cap: int = 20

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario parameters: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key == "intersection_road_count_weights":
                value = {int(k): float(v) for k, v in value.items()}
            elif isinstance(value, list) and key.endswith(("_range", "_range_x", "_range_y")):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)
