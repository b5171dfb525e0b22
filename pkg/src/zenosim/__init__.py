"""Continuous measurement of a decaying quantum-dot electron by a point contact."""
from .core import (
    EPS_TRACE,
    EPS_TRUNC,
    ContinuumGrid,
    CountResolvedState,
    InvalidGrid,
    InvalidParams,
    ModelParams,
    TracedState,
    TraceViolation,
    Trajectory,
    TruncationLeak,
    derived_rates,
    validate_params,
)
from .integrator import IntegrationControl, integrate

__version__ = "0.1.0"

__all__ = [
    "EPS_TRACE", "EPS_TRUNC", "ContinuumGrid", "CountResolvedState", "InvalidGrid",
    "InvalidParams", "ModelParams", "TracedState", "TraceViolation", "Trajectory",
    "TruncationLeak", "derived_rates", "validate_params", "IntegrationControl", "integrate",
]
