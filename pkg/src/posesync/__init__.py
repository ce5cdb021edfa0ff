"""Pose-graph synchronization: MAP estimation and posterior sampling of
absolute 6-DoF camera poses from noisy relative pose measurements.

Rotations live on the unit quaternion sphere S^3 (scalar-first, Hamilton
product convention), translations in R^3.  The solver runs a tempered
geodesic Monte Carlo chain whose rotation updates never leave the sphere.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .graph import Estimate, MeasurementEdge, PoseGraph, graph_consistency, spanning_tree, validate
from .model import ModelParams, gradient, potential
from .tgmcmc import RunReport, SamplerConfig, SamplerState, optimize, sample_posterior

__all__ = [
    "Estimate",
    "MeasurementEdge",
    "ModelParams",
    "PoseGraph",
    "RunReport",
    "SamplerConfig",
    "SamplerState",
    "__version__",
    "gradient",
    "graph_consistency",
    "optimize",
    "potential",
    "sample_posterior",
    "spanning_tree",
    "validate",
]
