"""Public conic-solver entry points and the swappable backend registry."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..linalg import herm
from .ipm import SolverOptions, _IPM, compile_problem, phase1
from .problem import ConicProblem, ConicSolution, Feasibility, SolveStatus


def _lift_solution(problem: ConicProblem, std, ipm: _IPM):
    from .ipm import _unembed_complex

    blocks: list[np.ndarray] = []
    for b, dim in enumerate(problem.block_dims):
        basis = std.block_basis[b]
        if b not in std.live_blocks:
            blocks.append(np.zeros((dim, dim), dtype=complex))
            continue
        k = std.live_blocks.index(b)
        y = ipm.x.blocks[k] / std.block_col_scale[k]
        r = basis.shape[1]
        xhat = _unembed_complex(y, r) if std.block_complex[k] else y.astype(complex)
        blocks.append(herm(basis @ xhat @ basis.conj().T))
    scalars = np.zeros(len(std.scalar_col))
    for j, col in enumerate(std.scalar_col):
        if col >= 0:
            scalars[j] = float(ipm.x.diag[col]) / float(std.diag_col_scale[col])
    duals = np.zeros(len(problem.constraints))
    for i, row in enumerate(std.row_of_constraint):
        if row >= 0:
            duals[i] = -std.obj_scale * float(ipm.y[row]) / float(std.row_scale[row])
    return blocks, scalars, duals


def _solve_reference(problem: ConicProblem, options: SolverOptions | None = None) -> ConicSolution:
    opts = options or SolverOptions()
    std = compile_problem(problem)
    if std.infeasible_at_compile:
        return ConicSolution(status=SolveStatus.INFEASIBLE)
    if std.b.shape[0] == 0:
        # unconstrained over the cone: optimum is 0 iff the objective
        # cannot be improved inside the cone
        import scipy.linalg

        improvable = any(
            scipy.linalg.eigvalsh(cb)[0] < -1e-12 for cb in std.c_blocks if cb.size
        ) or bool(np.any(std.c_diag < -1e-12))
        if improvable:
            return ConicSolution(status=SolveStatus.UNBOUNDED)
        blocks = [np.zeros((d, d), dtype=complex) for d in problem.block_dims]
        scalars = np.zeros(problem.n_scalars)
        return ConicSolution(
            status=SolveStatus.OPTIMAL,
            blocks=blocks,
            scalars=scalars,
            duals=np.zeros(len(problem.constraints)),
            objective_value=0.0,
            gap=0.0,
            iterations=0,
        )
    ipm = _IPM(std, opts)
    status = ipm.run()
    if status is SolveStatus.OPTIMAL:
        blocks, scalars, duals = _lift_solution(problem, std, ipm)
        obj = problem.objective_value(blocks, scalars)
        from .ipm import _inner

        gap_abs = std.obj_scale * _inner(ipm.x.blocks, ipm.x.diag, ipm.s.blocks, ipm.s.diag)
        return ConicSolution(
            status=status,
            blocks=blocks,
            scalars=scalars,
            duals=duals,
            objective_value=obj,
            gap=gap_abs / (1.0 + abs(obj)),
            iterations=ipm.iterations,
        )
    verdict, _ = phase1(std, opts)
    if verdict is Feasibility.INFEASIBLE:
        return ConicSolution(status=SolveStatus.INFEASIBLE, iterations=ipm.iterations)
    if status is SolveStatus.UNBOUNDED and verdict is Feasibility.FEASIBLE:
        return ConicSolution(status=SolveStatus.UNBOUNDED, iterations=ipm.iterations)
    if status is SolveStatus.INFEASIBLE and verdict is not Feasibility.FEASIBLE:
        return ConicSolution(status=SolveStatus.INFEASIBLE, iterations=ipm.iterations)
    return ConicSolution(status=SolveStatus.NUMERICAL_FAILURE, iterations=ipm.iterations)


Backend = Callable[..., ConicSolution]
_BACKENDS: dict[str, Backend] = {"reference": _solve_reference}


def register_backend(name: str, solver: Backend) -> None:
    """Register an external conic solver under a backend name."""
    _BACKENDS[name] = solver


def solve_sdp(
    problem: ConicProblem,
    options: SolverOptions | None = None,
    backend: str = "reference",
) -> ConicSolution:
    """Solve a small dense SDP with the selected backend."""
    return _BACKENDS[backend](problem, options)


def check_feasible(
    problem: ConicProblem, options: SolverOptions | None = None
) -> Feasibility:
    """Phase-1 feasibility answer for a conic problem."""
    opts = options or SolverOptions()
    std = compile_problem(problem)
    if std.infeasible_at_compile:
        return Feasibility.INFEASIBLE
    if std.b.shape[0] == 0:
        return Feasibility.FEASIBLE
    verdict, _ = phase1(std, opts)
    return verdict
