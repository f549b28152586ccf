"""Ensembles of subsampled ordinary least squares: estimators, closed-form risk and Monte Carlo oracles."""

from .datagen import BetaMode, ProblemInstance, ProblemSpec, generate_problem
from .estimators import (
    EnsembleFit,
    MemberFit,
    assemble_linear_map,
    ensemble_coefficients,
    fit_dropout,
    fit_ensemble,
    fit_generalized_dropout,
    fit_min_norm_member,
    fit_ridge,
    fit_subsampled_ols,
)
from .risk_theory import (
    K_INF,
    PairSizes,
    Term,
    TheoryQuery,
    ensemble_risk,
    finite_k_optimal_alpha,
    finite_pair_term,
    interpolator_variance_term,
    large_ensemble_risk,
    limiting_pair_term,
    mu_scaled_risk,
    optimal_alpha,
    optimal_mu,
    optimal_ridge_risk,
)
from .sampling import Strategy, SubsampleScheme, SubsetPair, draw_subsets, inclusion_stats

__all__ = [
    "BetaMode",
    "EnsembleFit",
    "K_INF",
    "MemberFit",
    "PairSizes",
    "ProblemInstance",
    "ProblemSpec",
    "Strategy",
    "SubsampleScheme",
    "SubsetPair",
    "Term",
    "TheoryQuery",
    "assemble_linear_map",
    "draw_subsets",
    "ensemble_coefficients",
    "ensemble_risk",
    "finite_k_optimal_alpha",
    "finite_pair_term",
    "fit_dropout",
    "fit_ensemble",
    "fit_generalized_dropout",
    "fit_min_norm_member",
    "fit_ridge",
    "fit_subsampled_ols",
    "generate_problem",
    "inclusion_stats",
    "interpolator_variance_term",
    "large_ensemble_risk",
    "limiting_pair_term",
    "mu_scaled_risk",
    "optimal_alpha",
    "optimal_mu",
    "optimal_ridge_risk",
]

__version__ = "0.1.0"
