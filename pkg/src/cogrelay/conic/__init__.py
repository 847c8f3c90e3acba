"""Small dense semidefinite-program solver with dual recovery."""

from .api import check_feasible, register_backend, solve_sdp
from .ipm import SolverOptions
from .problem import (
    EQ,
    GE,
    LE,
    Constraint,
    ConicProblem,
    ConicSolution,
    Feasibility,
    SolveStatus,
    dump_problem,
    load_problem,
)

__all__ = [
    "EQ",
    "GE",
    "LE",
    "Constraint",
    "ConicProblem",
    "ConicSolution",
    "Feasibility",
    "SolveStatus",
    "SolverOptions",
    "check_feasible",
    "dump_problem",
    "load_problem",
    "register_backend",
    "solve_sdp",
]
