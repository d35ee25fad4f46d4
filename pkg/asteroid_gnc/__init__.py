"""Learning-based orbit and attitude station-keeping around small bodies."""
from __future__ import annotations

from .constellation import ConstellationResult, run_constellation, run_standalone
from .metrics import MetricsReport, compute_metrics
from .outputs import emit_outputs
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "ConstellationResult",
    "MetricsReport",
    "Scenario",
    "compute_metrics",
    "emit_outputs",
    "load_scenario",
    "run_constellation",
    "run_standalone",
]
