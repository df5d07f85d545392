"""Steady-state natural-gas network flow solvers."""
from .energy import ConvergenceError, EnergySolveOptions, solve_constrained, solve_unconstrained
from .generators import generate_belgian_style, generate_gaslib_style
from .instances import (Instance, InstanceError, builtin_instance, load_instance, parse_instance,
                        save_instance, write_instance)
from .miqcqp import certify_conditions, solve_miqcqp
from .network import GfSolution, GfSpec, Network, NetworkError, build_network
from .newton import NrOptions, solve_nr
from .physics import exactness_gap, residual_and_jacobian, residual_norm
from .recovery import RecoveryError, recover_full_solution
from .topology import fundamental_cycles, monotone_path_decompose, spanning_tree

__all__ = [
    "ConvergenceError", "EnergySolveOptions", "GfSolution", "GfSpec", "Instance", "InstanceError",
    "Network", "NetworkError", "NrOptions", "RecoveryError", "build_network", "builtin_instance",
    "certify_conditions", "exactness_gap", "fundamental_cycles", "generate_belgian_style",
    "generate_gaslib_style", "load_instance", "monotone_path_decompose", "parse_instance",
    "recover_full_solution", "residual_and_jacobian", "residual_norm", "save_instance",
    "solve_constrained", "solve_miqcqp", "solve_nr", "solve_unconstrained", "spanning_tree",
    "write_instance",
]
