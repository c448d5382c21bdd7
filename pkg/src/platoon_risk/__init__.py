"""Closed-form value-at-risk for noisy, delayed second-order consensus platoons."""

from .errors import (
    DisconnectedGraph,
    IllConditionedBasis,
    InsufficientSamples,
    InvalidParameter,
    InvalidSpec,
    InvalidSplit,
    InvalidTimestep,
    NonfiniteState,
    OutOfDomain,
    OutsideStabilityRegion,
    OutsideWindow,
    PlatoonRiskError,
    QuadratureFailure,
    SeriesDivergence,
    UnstablePlatoon,
)
from .graph import Spectrum, WeightedGraph, effective_resistance, graph_spectrum, laplacian
from .risk import EventSpec, RiskValue, collision_risk, detachment_risk, joint_risk_boxes, kappa, tradeoff_bound
from .sim import PlatoonModel, simulate, steady_state_samples
from .stability import in_region_S, platoon_stable, theta
from .variance import f_kernel, f_min, sigma_star, sigma_vector

__all__ = [
    "DisconnectedGraph",
    "EventSpec",
    "IllConditionedBasis",
    "InsufficientSamples",
    "InvalidParameter",
    "InvalidSpec",
    "InvalidSplit",
    "InvalidTimestep",
    "NonfiniteState",
    "OutOfDomain",
    "OutsideStabilityRegion",
    "OutsideWindow",
    "PlatoonModel",
    "PlatoonRiskError",
    "QuadratureFailure",
    "RiskValue",
    "SeriesDivergence",
    "Spectrum",
    "UnstablePlatoon",
    "WeightedGraph",
    "collision_risk",
    "detachment_risk",
    "effective_resistance",
    "f_kernel",
    "f_min",
    "graph_spectrum",
    "in_region_S",
    "joint_risk_boxes",
    "kappa",
    "laplacian",
    "platoon_stable",
    "sigma_star",
    "sigma_vector",
    "simulate",
    "steady_state_samples",
    "theta",
    "tradeoff_bound",
]
