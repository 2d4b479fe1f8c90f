"""Monitored-qubit state statistics on the Bloch-sphere Grand Circle."""

from .core_maps import (
    BlochState,
    KrausPair,
    Outcome,
    SetupParams,
    apply_kraus,
    bloch_state,
    bloch_vector,
    born_probabilities,
    build_params,
    eigenangles,
    gc_state,
    kraus_matrices,
    state_from_angles,
    theta_inverse,
    theta_map,
    theta_map_derivative,
)
from .master_equation import (
    DiscretizedDistribution,
    SparseMarkov,
    build_markov,
    coarse_grain,
    eigen_gap,
    power_iterate,
    propagate,
    uniform_distribution,
)

__all__ = [
    "BlochState",
    "KrausPair",
    "Outcome",
    "SetupParams",
    "apply_kraus",
    "bloch_state",
    "bloch_vector",
    "born_probabilities",
    "build_params",
    "eigenangles",
    "gc_state",
    "kraus_matrices",
    "state_from_angles",
    "theta_inverse",
    "theta_map",
    "theta_map_derivative",
    "DiscretizedDistribution",
    "SparseMarkov",
    "build_markov",
    "coarse_grain",
    "eigen_gap",
    "power_iterate",
    "propagate",
    "uniform_distribution",
]

__version__ = "0.1.0"
