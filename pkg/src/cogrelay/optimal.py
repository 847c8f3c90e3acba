"""Globally optimal joint design via fractional SDP and power-split bisection.

For a fixed split rho the relay matrix and beamformer reduce (for M >= 3)
to low-dimensional coordinates A (2x3) and b (2) through thin-QR bases of
the channel span; the resulting linear-fractional program is lifted by
semidefinite relaxation and normalized by a Charnes-Cooper scalar q into
one SDP whose relaxation is tight (rank-one optima).  The optimal rho is
then located by bisection on the envelope derivative of the inner optimal
value, which is concave in rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import conic, model
from .errors import NearlyCollinearChannels
from .linalg import dominant_rank1, kron, qr_thin, unvec, generalized_eig_max
from .model import ChannelSet, Design, SystemParams

RHO_MIN = 1e-4
RHO_MAX = 1.0 - 1e-4
RHO_TOL = 1e-4
PRESCAN_POINTS = 16
RANK1_RATIO_TOL = 1e-6


@dataclass(frozen=True)
class ReducedBasis:
    """Channel-subspace bases and reduced channel coordinates.

    reduced=False is the pass-through mode (M <= 2): identity bases, full
    vec(F) optimization.
    """

    v1: np.ndarray
    u2: np.ndarray
    hhat_s: np.ndarray
    hhat_p: np.ndarray
    hbar_s: np.ndarray
    hbar_p: np.ndarray
    gbar: np.ndarray
    reduced: bool

    @property
    def j(self) -> int:
        return self.v1.shape[1]

    @property
    def k(self) -> int:
        return self.u2.shape[1]


@dataclass(frozen=True)
class CoefficientMatrices:
    """Quadratic-form data of the reduced problem at one rho.

    All of b_rho .. e_rho are affine in rho with slopes b_rho1 .. e_rho1;
    p_r1_eh is the (negated) slope of the harvested power.
    """

    rho: float
    b_rho: np.ndarray
    c_rho: np.ndarray
    d_rho: np.ndarray
    e_rho: np.ndarray
    h_s_outer: np.ndarray
    h_p_outer: np.ndarray
    b_rho1: np.ndarray
    c_rho1: np.ndarray
    d_rho1: np.ndarray
    e_rho1: np.ndarray
    p_r1_eh: float


@dataclass(frozen=True)
class RankReport:
    rank_a: int
    rank_b: int
    ratio_a: float
    ratio_b: float


@dataclass
class OptimalResult:
    design: Design | None
    rate_s: float
    rate_p_achieved: float
    rho_star: float
    feasible: bool
    sdp_rank_report: RankReport | None = None
    objective: float = float("nan")
    status: str = "ok"


@dataclass
class FixedRhoSolution:
    ahat: np.ndarray
    bhat: np.ndarray
    q: float
    theta1: float
    theta2: float
    theta3: float
    objective: float
    rho: float


def reduce_basis(c: ChannelSet) -> ReducedBasis:
    """Thin-QR bases of span{h_s, h_p} and span{h_s, h_p, g}."""
    m = c.m
    if m <= 2:
        eye = np.eye(m, dtype=complex)
        return ReducedBasis(
            v1=eye, u2=eye, hhat_s=c.h_s, hhat_p=c.h_p,
            hbar_s=c.h_s, hbar_p=c.h_p, gbar=c.g, reduced=False,
        )
    try:
        v1, _ = qr_thin(np.column_stack([c.h_s, c.h_p]))
        u2, _ = qr_thin(np.column_stack([c.h_s, c.h_p, c.g]))
    except Exception as exc:
        raise NearlyCollinearChannels(str(exc)) from exc
    return ReducedBasis(
        v1=v1,
        u2=u2,
        hhat_s=v1.conj().T @ c.h_s,
        hhat_p=v1.conj().T @ c.h_p,
        hbar_s=u2.conj().T @ c.h_s,
        hbar_p=u2.conj().T @ c.h_p,
        gbar=u2.conj().T @ c.g,
        reduced=True,
    )


def build_coefficients(p: SystemParams, rb: ReducedBasis, rho: float) -> CoefficientMatrices:
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    j, k = rb.j, rb.k
    h_s_outer = np.outer(rb.hhat_s, rb.hhat_s.conj())
    h_p_outer = np.outer(rb.hhat_p, rb.hhat_p.conj())
    gbar_t = np.outer(rb.gbar.conj(), rb.gbar)          # (g gH)^T
    hbar_p_t = np.outer(rb.hbar_p.conj(), rb.hbar_p)
    hbar_s_t = np.outer(rb.hbar_s.conj(), rb.hbar_s)
    eye_k, eye_j, eye_jk = np.eye(k), np.eye(j), np.eye(j * k)

    b1 = kron(p.sigma_r2 * eye_k + p.p_pt * gbar_t + p.p_pr * hbar_p_t, h_s_outer)
    c1 = p.p_pt * kron(gbar_t, h_p_outer)
    d1 = kron(p.sigma_r2 * eye_k + p.p_sr * hbar_s_t, h_p_outer)
    e1 = kron(p.p_pt * gbar_t + p.p_pr * hbar_p_t + p.p_sr * hbar_s_t, eye_j) \
        + p.sigma_r2 * eye_jk
    # norms of the original channels survive the orthonormal reduction
    p_r1_eh = p.xi * (
        p.p_pt * float(np.vdot(rb.gbar, rb.gbar).real)
        + p.p_pr * float(np.vdot(rb.hbar_p, rb.hbar_p).real)
        + p.p_sr * float(np.vdot(rb.hbar_s, rb.hbar_s).real)
        + p.sigma_r2
    )
    return CoefficientMatrices(
        rho=rho,
        b_rho=rho * b1 + p.sigma_c2 * kron(eye_k, h_s_outer),
        c_rho=rho * c1,
        d_rho=rho * d1 + p.sigma_c2 * kron(eye_k, h_p_outer),
        e_rho=rho * e1 + p.sigma_c2 * eye_jk,
        h_s_outer=h_s_outer,
        h_p_outer=h_p_outer,
        b_rho1=b1,
        c_rho1=c1,
        d_rho1=d1,
        e_rho1=e1,
        p_r1_eh=p_r1_eh,
    )


def feasibility_gamma_max(
    p: SystemParams, rb: ReducedBasis, rho: float, p_eh: float
) -> float:
    """Largest PU SINR attainable with the beamformer off.

    It is the top generalized eigenvalue of the pair
    (C_rho, D_rho + sigma_p^2/P_EH * E_rho); the fixed-rho problem is
    feasible iff gamma_p_min does not exceed it.
    """
    if p_eh <= 0:
        raise ValueError("harvested power must be positive")
    co = build_coefficients(p, rb, rho)
    lam, _ = generalized_eig_max(co.c_rho, co.d_rho + (p.sigma_p2 / p_eh) * co.e_rho)
    return max(lam, 0.0)


def _charnes_cooper_problem(
    p: SystemParams,
    co: CoefficientMatrices,
    p_eh: float,
    zf_equalities: list[np.ndarray] | None = None,
) -> conic.ConicProblem:
    gmin = p.gamma_p_min
    dim_a = co.b_rho.shape[0]
    dim_b = co.h_s_outer.shape[0]
    prob = conic.ConicProblem(
        block_dims=(dim_a, dim_b),
        n_scalars=1,
        obj_blocks={1: co.h_s_outer},
        maximize=True,
    )
    prob.constraints.append(
        conic.Constraint(blocks={0: co.b_rho}, scalars={0: p.sigma_s2}, rhs=1.0, sense=conic.EQ)
    )
    prob.constraints.append(
        conic.Constraint(
            blocks={0: co.c_rho - gmin * co.d_rho, 1: -gmin * co.h_p_outer},
            scalars={0: -gmin * p.sigma_p2},
            rhs=0.0,
            sense=conic.GE,
        )
    )
    prob.constraints.append(
        conic.Constraint(
            blocks={0: co.e_rho, 1: np.eye(dim_b, dtype=complex)},
            scalars={0: -p_eh},
            rhs=0.0,
            sense=conic.LE,
        )
    )
    for z in zf_equalities or []:
        prob.constraints.append(conic.Constraint(blocks={0: z}, rhs=0.0, sense=conic.EQ))
    return prob


def solve_fixed_rho(
    p: SystemParams,
    rb: ReducedBasis,
    rho: float,
    zf_equalities: list[np.ndarray] | None = None,
    p_eh: float | None = None,
) -> FixedRhoSolution | None:
    """Solve the normalized fractional SDP at one rho; None if infeasible."""
    co = build_coefficients(p, rb, rho)
    if p_eh is None:
        p_eh = (1.0 - rho) * co.p_r1_eh
    prob = _charnes_cooper_problem(p, co, p_eh, zf_equalities)
    sol = conic.solve_sdp(prob)
    if sol.status is conic.SolveStatus.INFEASIBLE:
        return None
    if not sol.optimal:
        return None
    return FixedRhoSolution(
        ahat=sol.blocks[0],
        bhat=sol.blocks[1],
        q=float(sol.scalars[0]),
        theta1=float(sol.duals[0]),
        theta2=float(-sol.duals[1]),
        theta3=float(sol.duals[2]),
        objective=float(sol.objective_value),
        rho=rho,
    )


def rho_gradient(
    co: CoefficientMatrices,
    ahat: np.ndarray,
    q: float,
    theta1: float,
    theta2: float,
    theta3: float,
    gamma_p_min: float,
) -> float:
    """Envelope derivative of the inner optimal value with respect to rho."""
    grad_mat = (
        -theta1 * co.b_rho1
        + theta2 * co.c_rho1
        - theta2 * gamma_p_min * co.d_rho1
        - theta3 * co.e_rho1
    )
    return float(np.trace(grad_mat @ ahat).real) - theta3 * q * co.p_r1_eh


def h_of_rho(
    p: SystemParams,
    rb: ReducedBasis,
    rho: float,
    zf_equalities: list[np.ndarray] | None = None,
) -> float | None:
    """Inner optimal value at one rho (None when infeasible)."""
    sol = solve_fixed_rho(p, rb, rho, zf_equalities)
    return None if sol is None else sol.objective


def zf_equality_matrices(rb: ReducedBasis) -> list[np.ndarray]:
    """Trace-equality coefficients forcing h_s^H F = 0 and h_p^H F h_s = 0
    in the reduced lifted variable."""
    eye_k = np.eye(rb.k)
    hbar_s_t = np.outer(rb.hbar_s.conj(), rb.hbar_s)
    return [kron(eye_k, rb.hhat_s[:, None] @ rb.hhat_s[None, :].conj()),
            kron(hbar_s_t, rb.hhat_p[:, None] @ rb.hhat_p[None, :].conj())]


def _repair(p: SystemParams, c: ChannelSet, d: Design) -> Design:
    """Scale w (then the whole design) until both constraints hold."""
    gmin = p.gamma_p_min
    for _ in range(40):
        changed = False
        if gmin > 0:
            gp = model.sinr_pr(p, c, d)
            if gp < gmin * (1.0 - 1e-12):
                hpw2 = abs(np.vdot(c.h_p, d.w)) ** 2
                if hpw2 > 0:
                    hpf = c.h_p.conj() @ d.f_mat
                    num = d.rho * p.p_pt * abs(hpf @ c.g) ** 2
                    den_rest = (
                        d.rho * p.p_sr * abs(hpf @ c.h_s) ** 2
                        + (d.rho * p.sigma_r2 + p.sigma_c2) * float(np.sum(np.abs(hpf) ** 2))
                        + p.sigma_p2
                    )
                    slack = num / gmin - den_rest
                    t2 = 0.0 if slack <= 0 else min(1.0, slack / hpw2)
                    d = d.scaled(w_scale=math.sqrt(max(t2 * (1.0 - 1e-12), 0.0)))
                    changed = True
        peh = model.harvested_power(p, c, d.rho)
        pst = model.st_transmit_power(p, c, d)
        if pst > peh * (1.0 + 1e-12) and pst > 0:
            s = math.sqrt(peh / pst) * (1.0 - 1e-13)
            d = d.scaled(f_scale=s, w_scale=s)
            changed = True
        if not changed:
            return d
    return d


def extract_design(
    rb: ReducedBasis, sol: FixedRhoSolution
) -> tuple[Design, RankReport]:
    """Dominant-eigenvector recovery of (F, w) from the lifted optimum."""
    abar = sol.ahat / sol.q
    bbar = sol.bhat / sol.q
    a, ratio_a = dominant_rank1(abar)
    b, ratio_b = dominant_rank1(bbar)
    wide = unvec(a, rb.j, rb.k)
    f = rb.v1 @ wide @ rb.u2.conj().T
    w = rb.v1 @ b
    vals_a = np.linalg.eigvalsh(abar)
    vals_b = np.linalg.eigvalsh(bbar)
    rank_a = int(np.sum(vals_a >= RANK1_RATIO_TOL * max(vals_a[-1], 1e-300)))
    rank_b = int(np.sum(vals_b >= RANK1_RATIO_TOL * max(vals_b[-1], 1e-300)))
    report = RankReport(rank_a=rank_a, rank_b=rank_b, ratio_a=ratio_a, ratio_b=ratio_b)
    return Design(f_mat=f, w=w, rho=sol.rho), report


def solve(
    p: SystemParams,
    c: ChannelSet,
    zf_nulling: bool = False,
    rho_grid: np.ndarray | None = None,
) -> OptimalResult:
    """Joint design maximizing the secondary rate (Algorithm-1 style).

    zf_nulling adds the trace equalities h_s^H F = 0, h_p^H F h_s = 0
    (used as the perfect-CSI reference for the robust scheme).  rho_grid
    replaces gradient bisection by an explicit grid search.
    """
    rb = reduce_basis(c)
    zf = zf_equality_matrices(rb) if zf_nulling else None
    gmin = p.gamma_p_min

    def coeffs(rho: float) -> CoefficientMatrices:
        return build_coefficients(p, rb, rho)

    def gamma_ok(rho: float) -> bool:
        if gmin == 0.0:
            return True
        p_eh = model.harvested_power(p, c, rho)
        margin = feasibility_gamma_max(p, rb, rho, p_eh)
        return margin >= gmin

    infeasible = OptimalResult(
        design=None, rate_s=0.0, rate_p_achieved=0.0, rho_star=float("nan"),
        feasible=False, status="infeasible",
    )

    solutions: list[FixedRhoSolution] = []

    def inner(rho: float) -> FixedRhoSolution | None:
        sol = solve_fixed_rho(p, rb, rho, zf)
        if sol is not None:
            solutions.append(sol)
        return sol

    if rho_grid is not None:
        for rho in rho_grid:
            if gamma_ok(float(rho)):
                inner(float(rho))
        if not solutions:
            return infeasible
    else:
        # prescan: feasibility window plus coarse h values, so bisection
        # starts inside the bracket of the best grid point (h need not be
        # concave near the feasibility edge, only unimodal)
        scan = np.linspace(RHO_MIN, RHO_MAX, PRESCAN_POINTS)
        feas_mask = np.array([gamma_ok(float(r)) for r in scan])
        if not feas_mask.any():
            return infeasible
        scan_sols: dict[int, FixedRhoSolution | None] = {}
        for i in np.where(feas_mask)[0]:
            scan_sols[i] = inner(float(scan[i]))
        solved = {i: s for i, s in scan_sols.items() if s is not None}
        if not solved:
            return infeasible
        i_best = max(solved, key=lambda i: solved[i].objective)
        lo = float(scan[max(i_best - 1, 0)]) if (i_best - 1) in solved else float(scan[i_best])
        hi = float(scan[min(i_best + 1, len(scan) - 1)]) if (i_best + 1) in solved \
            else float(scan[i_best])
        anchor = float(scan[i_best])
        while hi - lo > RHO_TOL:
            mid = 0.5 * (lo + hi)
            sol = inner(mid)
            if sol is None:
                if anchor <= mid:
                    hi = mid
                else:
                    lo = mid
                continue
            grad = rho_gradient(coeffs(mid), sol.ahat, sol.q, sol.theta1,
                                sol.theta2, sol.theta3, gmin)
            if grad >= 0:
                lo = mid
            else:
                hi = mid

    best = max(solutions, key=lambda s: s.objective)
    design, report = extract_design(rb, best)
    design = _repair(p, c, design)
    gp = model.sinr_pr(p, c, design)
    gs = model.sinr_sr(p, c, design)
    pst = model.st_transmit_power(p, c, design)
    peh = model.harvested_power(p, c, design.rho)
    feasible = (gmin == 0 or gp >= gmin * (1.0 - 1e-6)) and pst <= peh * (1.0 + 1e-6)
    return OptimalResult(
        design=design,
        rate_s=model.rate_from_sinr(gs),
        rate_p_achieved=model.rate_from_sinr(gp),
        rho_star=best.rho,
        feasible=feasible,
        sdp_rank_report=report,
        objective=best.objective,
        status="ok" if feasible else "repair_failed",
    )
