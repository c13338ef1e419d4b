"""Simulation, penalized inference and classification for exponential Hawkes processes."""

from .core import (Dataset, HawkesParams, Path, ThetaEstimate, ValidationError, compensator,
                   intensity, spectral_radius, validate)
from .simulate import SimulationConfig, simulate_cluster, simulate_thinning
from .model import precompute
from .learner import FitConfig, FitResult, HawkesLearner, fit, score, estimated_support

__version__ = "0.1.0"

__all__ = [
    "Dataset", "HawkesParams", "Path", "ThetaEstimate", "ValidationError", "compensator",
    "intensity", "spectral_radius", "validate", "SimulationConfig", "simulate_cluster",
    "simulate_thinning", "precompute", "FitConfig", "FitResult", "HawkesLearner", "fit",
    "score", "estimated_support",
]
