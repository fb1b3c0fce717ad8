from dojo.roadgen.generators import (
    SCENARIOS,
    GenerationError,
    generate_highway,
    generate_intersection,
    generate_map,
    generate_roundabout,
)
from dojo.roadgen.mapio import export_map, import_map, networks_equal
from dojo.roadgen.network import (
    KIND_ENTRY_RAMP,
    KIND_EXIT_RAMP,
    KIND_INTERNAL,
    KIND_NORMAL,
    Junction,
    Lane,
    RoadNetwork,
    ValidationReport,
    extract_boundaries,
    validate,
)
from dojo.roadgen.params import ScenarioParams

__all__ = [
    "SCENARIOS",
    "GenerationError",
    "KIND_ENTRY_RAMP",
    "KIND_EXIT_RAMP",
    "KIND_INTERNAL",
    "KIND_NORMAL",
    "Junction",
    "Lane",
    "RoadNetwork",
    "ScenarioParams",
    "ValidationReport",
    "generate_highway",
    "generate_intersection",
    "generate_map",
    "generate_roundabout",
    "validate",
]
