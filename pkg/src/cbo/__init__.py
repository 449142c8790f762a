"""
Consensus-based optimization: stochastic and mollified particle schemes, a
one-dimensional mean-field solver on the quantile function, and numerical
checks of the concentration estimates.
"""

from .diagnostics import (
    ConditionReport,
    DecayFit,
    Verdict,
    check_concentration_conditions,
    fit_decay_rate,
    laplace_sweep,
    stability_ratio,
    verify_jensen_bound,
    verify_moment_bound,
    verify_variance_decay,
)
from .errors import SolverError
from .measure import (
    Ensemble,
    WeightedStats,
    laplace_functional,
    mean,
    second_moment,
    variance,
    w2_grid_to_dirac,
    w2_to_dirac,
    wasserstein2_1d,
    weighted_stats,
)
from .objective import Objective, evaluate_batch, make_ackley, make_quadratic
from .particle import CboParams, RngSpec, em_step, heaviside, heaviside_em_step, run
from .porous import Mollifier, PorousParams, porous_rhs, porous_run, porous_step
from .pseudo_inverse import (
    ChiSolverParams,
    QuantileGrid,
    boundary_velocity,
    chi_from_uniform,
    chi_run,
    implicit_chi_step,
    m_f_of_chi,
)
from .series import DiagnosticsSeries

__version__ = "0.1.0"

__all__ = [
    "CboParams",
    "ChiSolverParams",
    "ConditionReport",
    "DecayFit",
    "DiagnosticsSeries",
    "Ensemble",
    "Mollifier",
    "Objective",
    "PorousParams",
    "QuantileGrid",
    "RngSpec",
    "SolverError",
    "Verdict",
    "WeightedStats",
    "boundary_velocity",
    "check_concentration_conditions",
    "chi_from_uniform",
    "chi_run",
    "em_step",
    "evaluate_batch",
    "fit_decay_rate",
    "heaviside",
    "heaviside_em_step",
    "implicit_chi_step",
    "laplace_functional",
    "laplace_sweep",
    "m_f_of_chi",
    "make_ackley",
    "make_quadratic",
    "mean",
    "porous_rhs",
    "porous_run",
    "porous_step",
    "run",
    "second_moment",
    "stability_ratio",
    "variance",
    "verify_jensen_bound",
    "verify_moment_bound",
    "verify_variance_decay",
    "w2_grid_to_dirac",
    "w2_to_dirac",
    "wasserstein2_1d",
    "weighted_stats",
]
