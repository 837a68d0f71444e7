"""Consumption-investment control under a wealth-dependent borrowing cap."""

from .dual import DualSolution, dual_residual, integrate_dual, to_dual
from .hjb import (ConcavityError, ConvergenceError, SolverParams, ValueSolution, WealthGrid,
                  far_field_check, hjb_residual, refine_study, solve_hjb)
from .io import ProblemConfig, __version__, load_config
from .model import (Additive, CobbDouglas, ConstantL, CrraConsumption, CrraWealth, Custom,
                    CustomConcave, Linear, MarketParams, dual_p, inverse_marginal, validate)
from .montecarlo import SimConfig, dominance_check, simulate_value, tail_bound
from .policy import PolicyTable, extract_policy, policy_at
from .reference import merton_dual, merton_policy, merton_value
from .region import certify_two_region, compute_m, compute_Y, refine_xstar

__all__ = [
    "Additive", "CobbDouglas", "ConcavityError", "ConstantL", "ConvergenceError",
    "CrraConsumption", "CrraWealth", "Custom", "CustomConcave", "DualSolution", "Linear",
    "MarketParams", "PolicyTable", "ProblemConfig", "SimConfig", "SolverParams",
    "ValueSolution", "WealthGrid", "__version__", "certify_two_region", "compute_Y",
    "compute_m", "dominance_check", "dual_p", "dual_residual", "extract_policy",
    "far_field_check", "hjb_residual", "integrate_dual", "inverse_marginal", "load_config",
    "merton_dual", "merton_policy", "merton_value", "policy_at", "refine_study",
    "refine_xstar", "simulate_value", "solve_hjb", "tail_bound", "to_dual", "validate",
]
