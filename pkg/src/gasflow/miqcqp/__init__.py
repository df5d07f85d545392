"""Mixed-integer convex relaxation of the gas-flow problem."""
from .bnb import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, MiqcqpResult, branch_and_bound, solve_miqcqp
from .conditions import ConditionReport, certify_conditions
from .model import Bounds, RelaxedModel, assemble_model, default_bounds

__all__ = [
    "INFEASIBLE", "ITERATION_LIMIT", "OPTIMAL", "Bounds", "ConditionReport", "MiqcqpResult",
    "RelaxedModel", "assemble_model", "branch_and_bound", "certify_conditions", "default_bounds",
    "solve_miqcqp",
]
