"""Exact solvers for the directed waypoint routing problem."""
from .colorcoding import solve_k_occurrences
from .core import (Arc, ClosedWalk, Instance, make_instance, parse_instance, serialize_instance,
                   validate_walk)
from .fes import solve_fes
from .oracle import Solution, Status, oracle_solve
from .twdp import solve_twdp
from .vi import solve_vi

__all__ = ["Arc", "ClosedWalk", "Instance", "make_instance", "parse_instance", "serialize_instance",
           "validate_walk", "Solution", "Status", "oracle_solve", "solve_fes", "solve_k_occurrences",
           "solve_twdp", "solve_vi"]
