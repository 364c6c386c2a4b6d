"""Online budget-constrained subset selection.

Select a subset of actions each trial (summed energies within a unit
budget), earn the best reward inside it minus the total cost, and adapt a
weight vector by projected gradient descent on a convex per-trial surrogate.
The randomized sampler turns weights into subsets while keeping analytic
control of every selection probability.
"""

from .core import (ActionSet, BUDGET_SLACK, InvalidEnergyError, Selection,
                   TrialData, derive_constants, discounted_profit, profit,
                   split_costs)
from .engine import Engine, LARGE_ENERGY_THRESHOLD, TrialLog
from .environments import (EnvironmentSpec, KINDS, Stream, StreamFormatError,
                           check_constraints, generate, read_stream, write_stream)
from .projection import FEASIBILITY_TOL, is_feasible, project_onto_feasible
from .sampler import (GroupDrawPlan, Partition, ZERO_CLASS,
                      analytic_intersection_lower_bound,
                      analytic_selection_bounds, build_draw_plans,
                      build_partition, sample_membership, sample_selection)
from .surrogate import (WeightState, reward_order, step_size,
                        surrogate_gradient, surrogate_value, update_weights)

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "BUDGET_SLACK", "InvalidEnergyError", "Selection", "TrialData",
    "derive_constants", "discounted_profit", "profit", "split_costs",
    "Engine", "LARGE_ENERGY_THRESHOLD", "TrialLog",
    "EnvironmentSpec", "KINDS", "Stream", "StreamFormatError",
    "check_constraints", "generate", "read_stream", "write_stream",
    "FEASIBILITY_TOL", "is_feasible", "project_onto_feasible",
    "GroupDrawPlan", "Partition", "ZERO_CLASS",
    "analytic_intersection_lower_bound", "analytic_selection_bounds",
    "build_draw_plans", "build_partition", "sample_membership", "sample_selection",
    "WeightState", "reward_order", "step_size", "surrogate_gradient",
    "surrogate_value", "update_weights",
    "__version__",
]
