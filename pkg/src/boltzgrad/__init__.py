"""Kinetic theory laboratory: hard-sphere and smooth-potential particle dynamics,
two-body scattering, Boltzmann solvers, tree expansions of the hierarchy and
chaos diagnostics for particle ensembles."""

from .boltzmann import (
    DsmcParams,
    VelocityGridFunction,
    collision_moments,
    h_functional,
    q_hardsphere,
    solve_boltzmann,
)
from .errors import (
    AmbiguousInverseError,
    BoltzgradError,
    BudgetExceeded,
    ConfigError,
    EventBudgetError,
    InvalidConfigurationError,
    NumericalFailure,
    OutgoingConfigurationError,
    PackingTooDenseError,
    PotentialDomainError,
    TrappedOrbitError,
)
from .marginals import (
    HistogramGrid,
    chaos_defect,
    estimate_marginal,
    observable_pairing,
    weighted_norm,
)
from .md import apply_collision, evolve_hard_spheres, evolve_newton, reverse_velocities
from .phase import (
    DensitySpec,
    ParticleConfiguration,
    ScalingRegime,
    hamiltonian,
    sample_initial,
    to_macroscopic,
    to_microscopic,
)
from .potentials import RadialPotential
from .scattering import (
    Cutoffs,
    check_monotonicity,
    cross_section_kernel,
    deflection_angle,
    scattering_map,
    scattering_time,
)
from .trees import (
    CollisionTree,
    alpha,
    build_bbf,
    build_ibf,
    detect_recollision,
    eval_series_term,
    lanford_time,
)

__version__ = "0.1.0"

__all__ = [
    "alpha",
    "AmbiguousInverseError",
    "apply_collision",
    "BoltzgradError",
    "BudgetExceeded",
    "build_bbf",
    "build_ibf",
    "chaos_defect",
    "check_monotonicity",
    "collision_moments",
    "CollisionTree",
    "ConfigError",
    "cross_section_kernel",
    "Cutoffs",
    "deflection_angle",
    "DensitySpec",
    "detect_recollision",
    "DsmcParams",
    "estimate_marginal",
    "eval_series_term",
    "EventBudgetError",
    "evolve_hard_spheres",
    "evolve_newton",
    "h_functional",
    "hamiltonian",
    "HistogramGrid",
    "InvalidConfigurationError",
    "lanford_time",
    "NumericalFailure",
    "observable_pairing",
    "OutgoingConfigurationError",
    "PackingTooDenseError",
    "ParticleConfiguration",
    "PotentialDomainError",
    "q_hardsphere",
    "RadialPotential",
    "reverse_velocities",
    "sample_initial",
    "ScalingRegime",
    "scattering_map",
    "scattering_time",
    "solve_boltzmann",
    "to_macroscopic",
    "to_microscopic",
    "TrappedOrbitError",
    "VelocityGridFunction",
    "weighted_norm",
]
