"""Driving personalities: 34 behavioral/physical parameters per constellation.

Distributions live in a YAML config (see dojo/data/personalities.yaml) so the
full parameter space stays configurable without touching code.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

DEFAULT_CONSTELLATIONS = 200

PARAM_GROUPS = {
    "general": (
        "length", "width", "accel", "decel", "emergency_decel", "min_gap",
        "speed_factor", "tau", "impatience", "sigma_error", "desired_max_speed",
    ),
    "car_following": (
        "delta", "t_preview", "t_reaction", "t_persistence",
        "sigma_gap", "sigma_leader", "sigma_free", "coolness",
    ),
    "lane_change": (
        "lc_speed_gain", "lc_strategic", "lc_cooperative", "lc_pushy",
        "lc_keep_right", "lc_assertive", "lc_look_ahead", "lc_overtake_right",
    ),
    "junction": (
        "jm_ignore_foe_prob", "jm_ignore_foe_speed", "jm_ignore_keep_clear_time",
        "jm_gap_accept", "jm_cross_gap", "jm_stopline_gap", "jm_timegap_minor",
    ),
}

PARAM_NAMES = tuple(name for group in PARAM_GROUPS.values() for name in group)


@dataclass(frozen=True)
class DrivingPersonality:
    length: float
    width: float
    accel: float
    decel: float
    emergency_decel: float
    min_gap: float
    speed_factor: float
    tau: float
    impatience: float
    sigma_error: float
    desired_max_speed: float
    delta: float
    t_preview: float
    t_reaction: float
    t_persistence: float
    sigma_gap: float
    sigma_leader: float
    sigma_free: float
    coolness: float
    lc_speed_gain: float
    lc_strategic: float
    lc_cooperative: float
    lc_pushy: float
    lc_keep_right: float
    lc_assertive: float
    lc_look_ahead: float
    lc_overtake_right: float
    jm_ignore_foe_prob: float
    jm_ignore_foe_speed: float
    jm_ignore_keep_clear_time: float
    jm_gap_accept: float
    jm_cross_gap: float
    jm_stopline_gap: float
    jm_timegap_minor: float


assert tuple(f.name for f in fields(DrivingPersonality)) == PARAM_NAMES


def load_distribution_config(path: str | Path | None = None) -> dict:
    """Load and sanity-check a personality distribution config."""
    if path is None:
        text = resources.files("dojo.data").joinpath("personalities.yaml").read_text()
    else:
        text = Path(path).read_text()
    raw = yaml.safe_load(text)
    config = {}
    for group, names in PARAM_GROUPS.items():
        if group not in raw:
            raise ValueError(f"personality config: missing group {group!r}")
        for name in names:
            if name not in raw[group]:
                raise ValueError(f"personality config: missing parameter {name!r}")
            config[name] = _check_spec(name, raw[group][name])
    return config


@lru_cache(maxsize=1)
def _default_distribution() -> dict:
    return load_distribution_config()


def _check_spec(name: str, spec: dict) -> dict:
    kind = spec.get("dist")
    if kind == "normal":
        lo, hi = spec["clip"]
        if not (lo < hi and spec["sigma"] >= 0):
            raise ValueError(f"personality config: bad normal spec for {name!r}")
    elif kind == "uniform":
        if not spec["low"] <= spec["high"]:
            raise ValueError(f"personality config: bad uniform spec for {name!r}")
    elif kind == "const":
        spec["value"]
    else:
        raise ValueError(f"personality config: unknown dist {kind!r} for {name!r}")
    return spec


def _draw(rng, spec: dict) -> float:
    kind = spec["dist"]
    if kind == "normal":
        lo, hi = spec["clip"]
        return float(min(max(rng.normal(spec["mu"], spec["sigma"]), lo), hi))
    if kind == "uniform":
        return float(rng.uniform(spec["low"], spec["high"]))
    return float(spec["value"])


def sample_personalities(
    rng,
    count: int = DEFAULT_CONSTELLATIONS,
    config: dict | None = None,
) -> list[DrivingPersonality]:
    """Draw a fixed set of parameter constellations from the configured distributions."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if config is None:
        config = _default_distribution()
    out = []
    for _ in range(count):
        values = {name: _draw(rng, config[name]) for name in PARAM_NAMES}
        out.append(DrivingPersonality(**values))
    return out
