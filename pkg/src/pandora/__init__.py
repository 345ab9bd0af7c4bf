"""Exact and approximate solvers for Pandora's box with Markov-correlated rewards on forests."""

from .boxes import NO_OPEN, RandomCostBox
from .errors import PandoraError
from .forest import ForestSolver, expected_payoff_forest, grv_forest, run_forest_policy
from .harness import SimReport, compare_policies, mix_seed, monte_carlo_eval, sample_realization
from .line import Hyperbox, PhiTable, compute_phi_table, expected_payoff_line, grv, run_line_policy
from .model import Instance, Realization, generate_instance, propagate_marginals, validate_instance
from .multiline import (
    MultilineSolver,
    contract_line,
    current_grv,
    equivalent_box,
    expected_payoff_multiline,
    run_multiline_policy,
)
from .oracle import abc_instance, best_na_value, best_pa_value, brute_force_optimal

__all__ = [
    "NO_OPEN", "RandomCostBox", "PandoraError", "ForestSolver", "expected_payoff_forest",
    "grv_forest", "run_forest_policy", "SimReport", "compare_policies", "mix_seed",
    "monte_carlo_eval", "sample_realization", "Hyperbox", "PhiTable", "compute_phi_table",
    "expected_payoff_line", "grv", "run_line_policy", "Instance", "Realization",
    "generate_instance", "propagate_marginals", "validate_instance", "MultilineSolver",
    "contract_line", "current_grv", "equivalent_box", "expected_payoff_multiline",
    "run_multiline_policy", "abc_instance", "best_na_value", "best_pa_value", "brute_force_optimal",
]
