"""Low-complexity closed-form design: ZF receive filter, dual pair, rank-one relay.

The relay matrix is restricted to f_t f_r^H.  The receive filter f_r is
zero-forced against both destination channels and matched to the source
inside that null space, after which the remaining (f_t, w) problem has a
closed-form optimum obtained from a two-variable dual: the second dual
variable solves a quadratic with exactly one positive root, the first
follows in closed form, and the achieved secondary SINR and both
beamformer directions come out of rank-one matrix-inversion-lemma
identities.  The power split is then maximized by golden-section search
(with a grid fallback guarding non-unimodal cases).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .errors import DegenerateChannels, TrivialZeroRate, ZFInfeasible
from .linalg import null_space_basis
from .model import ChannelSet, Design, SystemParams
from .optimal import OptimalResult, RankReport

RHO_MIN = 1e-4
RHO_MAX = 1.0 - 1e-4
RHO_TOL = 1e-4
GRID_POINTS = 32
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SuboptConstants:
    """Scalar reductions of the rank-one problem at one power split."""

    b: float
    c: float
    d: float
    e: float
    gamma_pt: float
    f_r: np.ndarray


@dataclass(frozen=True)
class DualPair:
    lambda1: float
    lambda2: float
    gamma_st: float


def zf_receive_filter(c: ChannelSet) -> np.ndarray:
    """Unit receive filter orthogonal to both destination channels,
    matched to the source channel inside the null space."""
    if c.m <= 2:
        raise ZFInfeasible("ZF receive filter needs M >= 3")
    vtil = null_space_basis(np.vstack([c.h_s.conj(), c.h_p.conj()]))
    proj = vtil.conj().T @ c.g
    nrm = np.linalg.norm(proj)
    if nrm < 1e-12 * max(np.linalg.norm(c.g), 1e-300):
        raise DegenerateChannels("source channel orthogonal to the ZF null space")
    return vtil @ (proj / nrm)


def constants(p: SystemParams, c: ChannelSet, f_r: np.ndarray, rho: float) -> SuboptConstants:
    frg2 = abs(np.vdot(f_r, c.g)) ** 2
    frhp2 = abs(np.vdot(f_r, c.h_p)) ** 2
    frhs2 = abs(np.vdot(f_r, c.h_s)) ** 2
    noise_eff = rho * p.sigma_r2 + p.sigma_c2
    b = rho * p.p_pt * frg2 + rho * p.p_pr * frhp2 + noise_eff
    cc = rho * p.p_sr * frhs2 + noise_eff
    d = rho * (p.p_pt * frg2 + p.p_pr * frhp2 + p.p_sr * frhs2) + noise_eff
    denom = rho * p.p_pt * frg2
    gamma_pt = math.inf if denom <= 0 else p.gamma_p_min / denom
    e = math.nan if not math.isfinite(gamma_pt) or gamma_pt <= 0 else \
        (1.0 - cc * gamma_pt) / (d * gamma_pt)
    if p.gamma_p_min == 0.0:
        e = math.inf
        gamma_pt = 0.0
    return SuboptConstants(b=b, c=cc, d=d, e=e, gamma_pt=gamma_pt, f_r=f_r)


def dual_quadratic(
    p: SystemParams,
    k: SuboptConstants,
    hs_norm2: float,
    hp_norm2: float,
    cross2: float,
    p_eh: float,
) -> DualPair:
    """Unique positive root of the dual quadratic plus the companion dual.

    cross2 is |h_s^H h_p|^2.  Requires e > 0 (PU target attainable) and a
    positive Gram determinant (channels not collinear).
    """
    gram = hs_norm2 * hp_norm2 - cross2
    if gram <= 1e-12 * max(hs_norm2 * hp_norm2, 1e-300):
        raise DegenerateChannels("destination channels nearly collinear")
    if not (k.e > 0):
        raise TrivialZeroRate("PU SINR target unattainable for any power")
    ratio = k.b / k.d
    alpha = ratio * p.sigma_s2 * gram
    beta = p.sigma_s2 * hp_norm2 - p_eh * ratio * gram + ratio * p.sigma_p2 * hs_norm2 / k.e
    gamma = p.sigma_p2 / k.e - p_eh * hp_norm2
    if gamma >= 0:
        raise TrivialZeroRate("harvested power only covers the PU demand")
    disc = beta * beta - 4.0 * alpha * gamma
    # stable quadratic: q-form avoids cancellation for large |beta|
    sq = math.sqrt(disc)
    qf = -0.5 * (beta + math.copysign(sq, beta))
    roots = [r for r in (qf / alpha, gamma / qf if qf != 0 else math.nan) if r > 0]
    if not roots:
        raise DegenerateChannels("dual quadratic lost its positive root")
    lam2 = min(roots)
    lam1 = (1.0 + ratio * lam2 * hs_norm2) / (k.e * (hp_norm2 + ratio * lam2 * gram))
    gamma_st = lam2 * (hs_norm2 + lam1 * gram) / (1.0 + lam1 * hp_norm2)
    return DualPair(lambda1=lam1, lambda2=lam2, gamma_st=gamma_st)


def closed_form_design(
    p: SystemParams,
    c: ChannelSet,
    k: SuboptConstants,
    dp: DualPair,
    rho: float,
    p_eh: float,
) -> Design:
    """Beamformer directions and powers; relay matrix is f_t f_r^H.

    Directions use the rank-one inversion lemma instead of explicit
    inverses; powers solve the 2x2 linear system that makes the PU SINR
    and the power budget simultaneously active.
    """
    t2 = k.b * dp.lambda2 / k.d
    f_t_dir = c.h_p - c.h_s * (t2 * np.vdot(c.h_s, c.h_p)) / (
        1.0 + t2 * float(np.vdot(c.h_s, c.h_s).real)
    )
    f_t_dir = f_t_dir / np.linalg.norm(f_t_dir)
    w_dir = c.h_s - c.h_p * (dp.lambda1 * np.vdot(c.h_p, c.h_s)) / (
        1.0 + dp.lambda1 * float(np.vdot(c.h_p, c.h_p).real)
    )
    w_dir = w_dir / np.linalg.norm(w_dir)

    hpft2 = abs(np.vdot(c.h_p, f_t_dir)) ** 2
    hpw2 = abs(np.vdot(c.h_p, w_dir)) ** 2
    a11 = hpft2 * (1.0 - k.c * k.gamma_pt)
    a12 = -k.gamma_pt * hpw2
    det = a11 * 1.0 - a12 * k.d
    if abs(det) < 1e-12 * max(abs(a11), abs(a12) * k.d, 1e-300):
        raise DegenerateChannels("power system singular")
    rhs1 = k.gamma_pt * p.sigma_p2
    p_ft = (rhs1 - a12 * p_eh) / det
    p_w = p_eh - k.d * p_ft
    if p_ft < -1e-9 * p_eh or p_w < -1e-9 * p_eh:
        raise DegenerateChannels("negative beamformer power")
    f_t = math.sqrt(max(p_ft, 0.0)) * f_t_dir
    w = math.sqrt(max(p_w, 0.0)) * w_dir
    return Design(f_mat=np.outer(f_t, k.f_r.conj()), w=w, rho=rho)


def _gamma_st_at(p, c, f_r, hs2, hp2, cross2, rho: float) -> tuple[float, SuboptConstants | None, DualPair | None]:
    k = constants(p, c, f_r, rho)
    if not (k.c * k.gamma_pt < 1.0):
        return -math.inf, None, None
    p_eh = model.harvested_power(p, c, rho)
    gamma_const = (p.sigma_p2 / k.e if math.isfinite(k.e) else 0.0) - p_eh * hp2
    if gamma_const >= 0:
        # gamma > 0: the PU demand alone exceeds the budget at this split;
        # gamma = 0 is the zero-secondary-rate edge
        zero_edge = gamma_const <= 1e-12 * max(p_eh * hp2, 1.0)
        return (0.0 if zero_edge else -math.inf), k, None
    try:
        dp = dual_quadratic(p, k, hs2, hp2, cross2, p_eh)
    except (TrivialZeroRate, DegenerateChannels):
        return -math.inf, None, None
    return dp.gamma_st, k, dp


def solve(p: SystemParams, c: ChannelSet) -> OptimalResult:
    """Best rank-one ZF design over the power split."""
    infeasible = OptimalResult(
        design=None, rate_s=0.0, rate_p_achieved=0.0, rho_star=float("nan"),
        feasible=False, status="infeasible",
    )
    try:
        f_r = zf_receive_filter(c)
    except (ZFInfeasible, DegenerateChannels):
        return infeasible
    hs2 = float(np.vdot(c.h_s, c.h_s).real)
    hp2 = float(np.vdot(c.h_p, c.h_p).real)
    cross2 = abs(np.vdot(c.h_s, c.h_p)) ** 2

    def value(rho: float) -> float:
        return _gamma_st_at(p, c, f_r, hs2, hp2, cross2, rho)[0]

    grid = np.linspace(RHO_MIN, RHO_MAX, GRID_POINTS)
    vals = np.array([value(float(r)) for r in grid])
    if not np.any(np.isfinite(vals) & (vals >= 0)):
        return infeasible
    i = int(np.nanargmax(np.where(np.isfinite(vals), vals, -math.inf)))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, GRID_POINTS - 1)])

    # golden-section refine inside the best bracket
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = value(x1), value(x2)
    while hi - lo > RHO_TOL:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = value(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = value(x1)
    candidates = [(float(grid[i]), float(vals[i])), (x1, f1), (x2, f2)]
    rho_star, best_val = max(candidates, key=lambda t: t[1])
    if not math.isfinite(best_val) or best_val < 0:
        return infeasible

    gamma, k, dp = _gamma_st_at(p, c, f_r, hs2, hp2, cross2, rho_star)
    p_eh = model.harvested_power(p, c, rho_star)
    if dp is None:
        if k is None:
            return infeasible
        # zero-rate edge: all power serves the PU demand
        dp = DualPair(lambda1=p_eh / p.sigma_p2, lambda2=0.0, gamma_st=0.0)
    try:
        design = closed_form_design(p, c, k, dp, rho_star, p_eh)
    except DegenerateChannels:
        return infeasible
    gp = model.sinr_pr(p, c, design)
    gs = model.sinr_sr(p, c, design)
    feasible = (p.gamma_p_min == 0 or gp >= p.gamma_p_min * (1.0 - 1e-6)) and (
        model.st_transmit_power(p, c, design) <= p_eh * (1.0 + 1e-6)
    )
    return OptimalResult(
        design=design,
        rate_s=model.rate_from_sinr(gs),
        rate_p_achieved=model.rate_from_sinr(gp),
        rho_star=rho_star,
        feasible=feasible,
        sdp_rank_report=RankReport(rank_a=1, rank_b=1, ratio_a=0.0, ratio_b=0.0),
        objective=gamma,
        status="ok" if feasible else "repair_failed",
    )
