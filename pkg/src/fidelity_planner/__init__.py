"""Interpolation errors, minimax risks and budget allocation for variable-fidelity GPs."""

__version__ = "0.1.0"

from .exceptions import (ConditioningError, FidelityPlannerError, InfeasiblePlanError,
                         InsufficientDataError, LatticeTruncationError, NestednessError,
                         QuadratureError, UnsupportedDimensionError)
from .spectral import (DEFAULT_CONFIG, ErrorBounds, Family, GridSpec, QuadratureConfig,
                       SpectralDensity, alias_sum, exponential_error_closed,
                       exponential_error_taylor, interpolation_error, optimal_transfer,
                       sqexp_error_bounds)
from .minimax import (FidelitySmoothness, SmoothnessClass, SpikyDensity,
                      minimax_error_single, minimax_error_vf, minimax_kernel_eval,
                      optimal_grid, spiky_lower_bound, verify_kernel_bound,
                      worst_case_upper_bound)
from .allocation import (AllocationPlan, Baseline, BenefitCurvePoint, BudgetSpec, Regime,
                         baseline_plan, benefit_ratio, benefit_ratio_asymptotic,
                         brute_force_ratio, budgeted_minimax_error, optimal_ratio, plan,
                         rho_squared_from_corr, single_fidelity_budgeted_error,
                         threshold_correlation, threshold_correlation_approx)
from .gp import (CoKrigingRegressor, Fidelity, FidelityDataset, KrigingRegressor,
                 MaternParams, fit_cokriging, fit_gp, matern32, predict, rrms)
from .harness import (ExperimentConfig, RunResult, SyntheticSpec, estimate_correlation,
                      generate_nested_design, run_baseline_comparison, run_share_sweep,
                      sample_gp_realization, standardize, synth_variable_fidelity)
