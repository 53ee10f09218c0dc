"""Distributed Gaussian state estimation with convergence and accuracy analysis."""

from .errors import (ArtifactMismatchError, DominanceViolationError,
                     FileFormatError, FixedPointError, GbpwlsError,
                     GraphValidationError, SingularInformationError,
                     UnobservableSystemError)
from .graph import (EdgeSpec, MeasurementGraph, NodeSpec, SelfMeasurement,
                    check_dominance, cycle_free_depth, exclusive_information,
                    prune_leaves, subgraph_within)
from .messages import BeliefState, MessageSet, init_messages, run, step
from .oracle import solve_ml
from .convergence import analyze_stability, fixed_point
from .estimator import GaussianBPEstimator

__all__ = [
    "ArtifactMismatchError", "DominanceViolationError", "FileFormatError",
    "FixedPointError", "GbpwlsError", "GraphValidationError",
    "SingularInformationError", "UnobservableSystemError",
    "EdgeSpec", "MeasurementGraph", "NodeSpec", "SelfMeasurement",
    "check_dominance", "cycle_free_depth", "exclusive_information",
    "prune_leaves", "subgraph_within",
    "BeliefState", "MessageSet", "init_messages", "run", "step",
    "solve_ml", "analyze_stability", "fixed_point", "GaussianBPEstimator",
]

__version__ = "0.1.0"
