"""Radial weighted p-Laplacian toolkit: potentials, exponent windows, embedding probes and a mountain-pass solver."""

from .exponents import (
    ProblemParams,
    WindowError,
    admissible_pair,
    alpha_star,
    decay_rate,
    exponent_window,
    q_star,
    sobolev_exponents,
)
from .functional import EnergyFunctional
from .grid import GridFunction, RadialGrid, WeightedSpace, check_pointwise_bound, pointwise_constants
from .nonlinearity import Nonlinearity
from .potentials import (
    AsymptoticProfile,
    PotentialSyntaxError,
    PotentialValueError,
    ess_sup_ratio,
    estimate_asymptotics,
    parse_potential,
    verify_hypotheses,
)
from .probe import Potentials, annulus_bound, decay_study, estimate_S0, estimate_Sinf
from .solver import GridSpec, NonConvergence, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "AsymptoticProfile", "EnergyFunctional", "GridFunction", "GridSpec", "Nonlinearity", "NonConvergence",
    "PotentialSyntaxError", "PotentialValueError", "Potentials", "ProblemParams", "RadialGrid",
    "SolverConfig", "WeightedSpace", "WindowError", "admissible_pair", "alpha_star", "annulus_bound",
    "check_pointwise_bound", "decay_rate", "decay_study", "ess_sup_ratio", "estimate_S0", "estimate_Sinf",
    "estimate_asymptotics", "exponent_window", "parse_potential", "pointwise_constants", "q_star",
    "sobolev_exponents", "solve", "verify_hypotheses",
]
