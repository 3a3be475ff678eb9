"""Exact tabular verification of the intrinsic-fear return bounds."""
from .bounds import (BoundReport, Inequality, as_lookup, corrupt_lookup, hoeffding_radius,
                     shape_with_fear, sweep_gamma_plan, verify_theorem1, verify_theorem2)
from .mdp import MdpError, TabularMdp, induced_chain, policy_matrix, random_mdp
from .simplex import LPError, solve_lp
from .solvers import (NotUnichainError, average_return, occupancy_lp, policy_evaluation,
                      recover_policy, stationary_distribution, value_iteration)

__all__ = [
    "BoundReport", "Inequality", "LPError", "MdpError", "NotUnichainError", "TabularMdp",
    "as_lookup", "average_return", "corrupt_lookup", "hoeffding_radius", "induced_chain",
    "occupancy_lp", "policy_evaluation", "policy_matrix", "random_mdp", "recover_policy",
    "shape_with_fear", "solve_lp", "stationary_distribution", "sweep_gamma_plan",
    "value_iteration", "verify_theorem1", "verify_theorem2",
]
