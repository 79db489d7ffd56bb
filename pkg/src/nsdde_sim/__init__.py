"""Simulation and condition checking for neutral stochastic delay equations.

The package simulates d[X(t) - D(X(t - tau))] = b dt + sigma dB on an exact
rational time grid with an explicit Euler scheme, refines coarse paths onto
nested finer grids, and verifies the structural conditions (contraction,
coercivity, local monotonicity, integrability) that the moment and
convergence analyses rely on.  See the README for the CLI and file formats.
"""

__version__ = "0.1.0"

from .analysis import (
    ConvergenceTable,
    LevelPairRow,
    MomentReport,
    PerturbationRow,
    PerturbationTable,
    check_contraction_sup_bound,
    converge_study,
    estimate_moments,
    exceedance_trend_ok,
    perturbation_integrability,
    power_split_bound,
)
from .brownian import BrownianPath, coarsen, generate
from .conditions import (
    ConditionReport,
    ConditionSpec,
    Violation,
    check_coercivity,
    check_contraction,
    check_integrability,
    check_monotonicity,
    constant_rate,
    estimate_contraction,
    neutral_cubic_rates,
    propose_constant_rates,
)
from .errors import (
    ConfigError,
    DegenerateSampling,
    DimensionMismatch,
    IncompatibleFactor,
    IncompatibleGrids,
    IncompatibleNoise,
    InvalidRange,
    NonDivisibleStep,
    NonFiniteState,
    NsddeError,
)
from .euler import (
    PathGrid,
    PerturbationSeries,
    grid_floor,
    grid_floor_index,
    perturbation,
    refine_to,
    simulate,
    truncation_time,
)
from .model import (
    DelayGrid,
    InitialSegment,
    NsddeModel,
    additive_noise,
    affine_segment,
    builtin_model,
    constant_segment,
    cubic_drift,
    linear_delay_ode,
    make_grid,
    neutral_cubic_model,
    pure_neutral,
)

__all__ = [
    "__version__",
    "BrownianPath",
    "ConditionReport",
    "ConditionSpec",
    "ConfigError",
    "ConvergenceTable",
    "DegenerateSampling",
    "DelayGrid",
    "DimensionMismatch",
    "IncompatibleFactor",
    "IncompatibleGrids",
    "IncompatibleNoise",
    "InitialSegment",
    "InvalidRange",
    "LevelPairRow",
    "MomentReport",
    "NonDivisibleStep",
    "NonFiniteState",
    "NsddeError",
    "NsddeModel",
    "PathGrid",
    "PerturbationRow",
    "PerturbationSeries",
    "PerturbationTable",
    "Violation",
    "additive_noise",
    "affine_segment",
    "builtin_model",
    "check_coercivity",
    "check_contraction",
    "check_contraction_sup_bound",
    "check_integrability",
    "check_monotonicity",
    "coarsen",
    "constant_rate",
    "constant_segment",
    "converge_study",
    "cubic_drift",
    "estimate_contraction",
    "estimate_moments",
    "exceedance_trend_ok",
    "generate",
    "grid_floor",
    "grid_floor_index",
    "linear_delay_ode",
    "make_grid",
    "neutral_cubic_model",
    "neutral_cubic_rates",
    "perturbation",
    "perturbation_integrability",
    "power_split_bound",
    "propose_constant_rates",
    "pure_neutral",
    "refine_to",
    "simulate",
    "truncation_time",
]
