"""Projection-method / Strang-splitting solver for the nonlinear Schrödinger
equation with quasiperiodic potential."""

from .errors import (
    CollisionError,
    DimensionMismatch,
    DomainError,
    LatticeMismatch,
    NonFinite,
    NonIntegralSteps,
    NotRealError,
    ParseError,
    QPError,
    RankError,
    ShapeMismatch,
    ValidationError,
)
from .integrator import EvolutionRecord, evolve, max_mass_drift, strang_step
from .lattice import (
    FrequencyLattice,
    ProjectionMatrix,
    build_lattice,
    lambda_of,
    max_singular_value,
)
from .operators import (
    Potential,
    SolverConfig,
    build_potential,
    kinetic_half_step,
    nonlinear_phase_step,
)
from .qpfield import (
    GridField,
    QPState,
    embed,
    evaluate_at_points,
    forward_transform,
    inner_product,
    interpolate,
    inverse_transform,
    l2_error,
    l2_norm,
    restrict,
    x_alpha_norm,
)

__version__ = "0.1.0"
