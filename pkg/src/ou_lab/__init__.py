"""Spectral Ornstein-Uhlenbeck calculus on Hermite chaos, with identity checks
and entropy/Fisher-information experiments for the OU flow."""

__version__ = "0.1.0"

from .hermite import (
    ChaosExpansion,
    GridFunction,
    MultiIndex,
    NodeBudgetError,
    QuadratureGrid,
    enumerate_multi_indices,
    evaluate_expansion,
    expansion_to_grid,
    gauss_hermite_grid,
    hermite_eval,
    normalized_hermite_eval,
    project_to_expansion,
)
from .calculus import (
    MatrixExpansion,
    SemigroupBackend,
    VectorExpansion,
    apply_generator,
    apply_semigroup,
    divergence,
    gradient,
    hessian,
    project_dimensions,
    time_derivative,
)
from .functionals import (
    PositivityCertificate,
    PositivityError,
    check_positivity,
    entropy,
    fisher,
    lp_norm,
    mass,
)
from .config import ConfigError, ExperimentConfig, VerifyConfig, parse_preset
from .verifier import IdentityReport
from .experiments import TrajectoryRecord, evolve_trajectory, fit_decay_rate
