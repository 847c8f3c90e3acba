"""Semidefinite-program containers and the plain-text dump/load format.

A problem holds Hermitian PSD variable blocks plus nonnegative scalar
variables.  Every constraint is one real linear equation

    sum_b Tr(A_b X_b) + sum_j c_j s_j  (sense)  rhs

with Hermitian coefficient matrices A_b.  The objective is the same kind
of functional, maximized by default.

Dual-multiplier sign convention (documented contract): for a
maximization problem the Lagrangian is

    L = objective + sum_i lambda_i * (rhs_i - lhs_i),

so multipliers of "<=" constraints are nonnegative, multipliers of ">="
constraints are nonpositive, and equality multipliers are free.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import ProblemFormatError
from ..linalg import is_hermitian

EQ = "=="
LE = "<="
GE = ">="
_SENSES = (EQ, LE, GE)

HERM_TOL = 1e-10


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


class Feasibility(enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


@dataclass
class Constraint:
    blocks: dict[int, np.ndarray] = field(default_factory=dict)
    scalars: dict[int, float] = field(default_factory=dict)
    rhs: float = 0.0
    sense: str = EQ


@dataclass
class ConicProblem:
    block_dims: tuple[int, ...] = ()
    n_scalars: int = 0
    obj_blocks: dict[int, np.ndarray] = field(default_factory=dict)
    obj_scalars: dict[int, float] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    maximize: bool = True

    def validate(self) -> None:
        if len(self.block_dims) == 0 and self.n_scalars == 0:
            raise ProblemFormatError("problem needs at least one variable")
        if any(d < 1 for d in self.block_dims):
            raise ProblemFormatError("block dimensions must be positive")
        for where, coeffs in [("objective", self.obj_blocks)] + [
            (f"constraint {i}", c.blocks) for i, c in enumerate(self.constraints)
        ]:
            for b, a in coeffs.items():
                if b < 0 or b >= len(self.block_dims):
                    raise ProblemFormatError(f"{where}: unknown block {b}")
                a = np.asarray(a)
                if a.shape != (self.block_dims[b], self.block_dims[b]):
                    raise ProblemFormatError(f"{where}: block {b} coefficient shape {a.shape}")
                if not is_hermitian(a, HERM_TOL):
                    raise ProblemFormatError(f"{where}: block {b} coefficient not Hermitian")
        for i, c in enumerate(self.constraints):
            if c.sense not in _SENSES:
                raise ProblemFormatError(f"constraint {i}: bad sense {c.sense!r}")
            for j in c.scalars:
                if j < 0 or j >= self.n_scalars:
                    raise ProblemFormatError(f"constraint {i}: unknown scalar {j}")
        for j in self.obj_scalars:
            if j < 0 or j >= self.n_scalars:
                raise ProblemFormatError(f"objective: unknown scalar {j}")

    def constraint_value(self, i: int, blocks, scalars) -> float:
        """Evaluate constraint i's left-hand side at a primal point."""
        c = self.constraints[i]
        val = 0.0
        for b, a in c.blocks.items():
            val += float(np.real(np.trace(np.asarray(a) @ np.asarray(blocks[b]))))
        for j, cj in c.scalars.items():
            val += cj * float(scalars[j])
        return val

    def objective_value(self, blocks, scalars) -> float:
        val = 0.0
        for b, a in self.obj_blocks.items():
            val += float(np.real(np.trace(np.asarray(a) @ np.asarray(blocks[b]))))
        for j, cj in self.obj_scalars.items():
            val += cj * float(scalars[j])
        return val


@dataclass
class ConicSolution:
    status: SolveStatus
    blocks: list[np.ndarray] | None = None
    scalars: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective_value: float | None = None
    gap: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def dump_problem(problem: ConicProblem, path) -> None:
    """Write a problem in the sparse-triplet debug format.

    Line types (whitespace separated):
        problem <n_blocks> <n_scalars> <maximize:0|1>
        dim <block> <dimension>
        ent <constraint> <block> <row> <col> <re> <im>    # -1 = objective
        sca <constraint> <scalar> <coeff>
        rhs <constraint> <value> <sense>
    Only upper-triangle entries (row <= col) are stored.
    """
    lines = [f"problem {len(problem.block_dims)} {problem.n_scalars} {int(problem.maximize)}"]
    for b, d in enumerate(problem.block_dims):
        lines.append(f"dim {b} {d}")

    def emit(cid: int, blocks: dict[int, np.ndarray], scalars: dict[int, float]):
        for b in sorted(blocks):
            a = np.asarray(blocks[b])
            for r in range(a.shape[0]):
                for c in range(r, a.shape[1]):
                    v = complex(a[r, c])
                    if v != 0:
                        lines.append(f"ent {cid} {b} {r} {c} {v.real!r} {v.imag!r}")
        for j in sorted(scalars):
            if scalars[j] != 0:
                lines.append(f"sca {cid} {j} {scalars[j]!r}")

    emit(-1, problem.obj_blocks, problem.obj_scalars)
    for i, con in enumerate(problem.constraints):
        emit(i, con.blocks, con.scalars)
        lines.append(f"rhs {i} {con.rhs!r} {con.sense}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_problem(path) -> ConicProblem:
    """Inverse of :func:`dump_problem`."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not raw or raw[0][0] != "problem":
        raise ProblemFormatError("missing problem header")
    n_blocks, n_scalars, maximize = int(raw[0][1]), int(raw[0][2]), bool(int(raw[0][3]))
    dims = [0] * n_blocks
    ents: list[tuple] = []
    scas: list[tuple] = []
    rhss: dict[int, tuple[float, str]] = {}
    for tok in raw[1:]:
        kind = tok[0]
        if kind == "dim":
            dims[int(tok[1])] = int(tok[2])
        elif kind == "ent":
            ents.append((int(tok[1]), int(tok[2]), int(tok[3]), int(tok[4]),
                         float(tok[5]), float(tok[6])))
        elif kind == "sca":
            scas.append((int(tok[1]), int(tok[2]), float(tok[3])))
        elif kind == "rhs":
            rhss[int(tok[1])] = (float(tok[2]), tok[3])
        else:
            raise ProblemFormatError(f"unknown record {kind!r}")
    if any(d == 0 for d in dims):
        raise ProblemFormatError("missing dim record")
    n_cons = (max(rhss) + 1) if rhss else 0
    problem = ConicProblem(
        block_dims=tuple(dims),
        n_scalars=n_scalars,
        maximize=maximize,
        constraints=[Constraint() for _ in range(n_cons)],
    )

    def target(cid: int):
        if cid == -1:
            return problem.obj_blocks, problem.obj_scalars
        con = problem.constraints[cid]
        return con.blocks, con.scalars

    for cid, b, r, c, re_, im_ in ents:
        blocks, _ = target(cid)
        if b not in blocks:
            blocks[b] = np.zeros((dims[b], dims[b]), dtype=complex)
        v = complex(re_, im_)
        blocks[b][r, c] += v
        if r != c:
            blocks[b][c, r] += v.conjugate()
    for cid, j, v in scas:
        _, scalars = target(cid)
        scalars[j] = scalars.get(j, 0.0) + v
    for cid, (value, sense) in rhss.items():
        problem.constraints[cid].rhs = value
        problem.constraints[cid].sense = sense
    problem.validate()
    return problem
