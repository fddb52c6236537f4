"""Bounds on tripartite Bell functionals over local, quantum, hybrid
no-signaling-quantum, and no-signaling correlation sets."""

from hnsq.core import (
    BellFunctional,
    Box,
    Scenario,
    bell_value,
    classical_bound,
    correlator_to_probability,
    enumerate_deterministic_boxes,
    is_no_signaling,
)

__all__ = [
    "BellFunctional",
    "Box",
    "Scenario",
    "bell_value",
    "classical_bound",
    "correlator_to_probability",
    "enumerate_deterministic_boxes",
    "is_no_signaling",
]

__version__ = "0.1.0"
