"""Deterministic procedural driving-scenario simulator."""

__version__ = "0.1.0"
