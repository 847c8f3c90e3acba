"""Worst-case robust design under spherical channel uncertainty.

The lifted variables Ftilde = f f^H (f = vec(F)) and Wtilde = w w^H turn
every perturbed-SINR and power constraint into a quadratic form in the
stacked error vector dh = [dh_p; dh_s], with coefficients affine in
(Ftilde, Wtilde).  The S-procedure converts each "quadratic form >= 0 for
all dh in the two balls" statement into one LMI with two nonnegative
multipliers, giving a feasibility SDP per (rho, t) that is bisected on t
and swept on rho; a rank-one design is then extracted (dominant
eigenvector, or Gaussian randomization plus repair when the lifted
optimum is not numerically rank one).

Two deliberate departures from the source construction, both recorded in
the project notes: the error-side operators I (x) h~^T are implemented as
I (x) h~^H so that the zero-forcing trace equalities annihilate exactly
the lifted terms they are meant to kill (making the secondary-link
quadratic model Taylor-exact to third order at feasible points), and the
relay Gram map in the power constraint uses F^H F (exact) rather than its
transpose.  The printed PU-side nulling Tr((I (x) h_p h_p^H) Ftilde) = 0
would zero the primary desired signal itself; the default mode nulls the
cross term h_p^H F h_s instead, with the literal form behind a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conic, model, optimal
from .linalg import block_ones_mask, commutation_matrix, dominant_rank1, kron, unvec, vec
from .model import Design, SystemParams, UncertainChannelSet

RANK1_RATIO_TOL = 1e-6


@dataclass
class RobustOptions:
    rho_step: float = 0.05
    t_tol: float = 1e-3
    rand_draws: int = 200
    score_draws: int = 2000
    screen_draws: int = 200
    seed: int = 20260810
    literal_pr_nulling: bool = False


@dataclass
class RobustResult:
    design: Design | None
    t_star: float
    rho_star: float
    worst_case_rate_s: float
    extracted_rate_s: float
    feasible: bool
    status: str = "ok"


@dataclass(frozen=True)
class Lemma1Operators:
    """Explicit matrices realizing the vec(F) identities.

    left_mul @ f  == F g          (g^T kron I)
    right_mul @ f == F^T h        (I kron h^T)
    gram_left(Ftilde)  == F F^H   (masked Gram of Eq.-85 form, rank-one lift)
    gram_right(Ftilde) == F^T F^* (permuted masked Gram)
    """

    left_mul: np.ndarray
    right_mul: np.ndarray
    mask: np.ndarray
    perm: np.ndarray
    ones_sel: np.ndarray

    def gram_left(self, ftilde: np.ndarray) -> np.ndarray:
        return self.ones_sel @ (self.mask * ftilde) @ self.ones_sel.conj().T

    def gram_right(self, ftilde: np.ndarray) -> np.ndarray:
        pfp = self.perm @ ftilde @ self.perm.T
        return self.ones_sel @ (self.mask * pfp) @ self.ones_sel.conj().T


def lemma1_operators(m: int, g: np.ndarray, h: np.ndarray | None = None) -> Lemma1Operators:
    eye = np.eye(m)
    hh = g if h is None else h
    return Lemma1Operators(
        left_mul=kron(g[None, :], eye).reshape(m, m * m),
        right_mul=kron(eye, hh[None, :]).reshape(m, m * m),
        mask=block_ones_mask(m),
        perm=commutation_matrix(m, m),
        ones_sel=kron(np.ones((1, m)), eye).reshape(m, m * m),
    )


# ---------------------------------------------------------------------------
# structural linear maps (channel-dependent, rho/t-independent)

@dataclass
class _Structure:
    m: int
    a_p: np.ndarray
    a_s: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    phi4: np.ndarray
    gop: np.ndarray
    s1: np.ndarray            # A_s (phi1 + phi2)
    s2: np.ndarray            # A_s phi3 + A_p phi2
    s3: np.ndarray            # A_p (phi3 + phi4)
    s4: np.ndarray            # A_p phi1 + A_s phi4
    ag_s: np.ndarray          # A_s gop
    ag_p: np.ndarray          # A_p gop
    col_sel: list[np.ndarray]  # e_j^T kron I : picks column j of F
    row_sel: list[np.ndarray]  # I kron e_u^T : picks (transposed) row u

    def tr1(self, ftilde: np.ndarray) -> np.ndarray:
        """F F^H as a linear image of Ftilde (sum over column blocks)."""
        out = np.zeros((self.m, self.m), dtype=complex)
        for sel in self.col_sel:
            out += sel @ ftilde @ sel.conj().T
        return out

    def gram_cols(self, ftilde: np.ndarray) -> np.ndarray:
        """F^H F as a linear image of Ftilde (exact power-constraint map)."""
        out = np.zeros((self.m, self.m), dtype=complex)
        for sel in self.row_sel:
            out += sel @ ftilde @ sel.conj().T
        return out.T


def _structure(uc: UncertainChannelSet) -> _Structure:
    m = uc.m
    eye = np.eye(m)
    a_p = np.vstack([eye, np.zeros((m, m))])
    a_s = np.vstack([np.zeros((m, m)), eye])
    phi1 = kron(uc.h_s_est[None, :], eye)
    phi2 = kron(eye, uc.h_s_est.conj()[None, :])   # conjugate-corrected I (x) h^H
    phi3 = kron(uc.h_p_est[None, :], eye)
    phi4 = kron(eye, uc.h_p_est.conj()[None, :])
    gop = kron(uc.g[None, :], eye)
    col_sel = [kron(eye[j][None, :], eye) for j in range(m)]
    row_sel = [kron(eye, eye[u][None, :]) for u in range(m)]
    return _Structure(
        m=m, a_p=a_p, a_s=a_s, phi1=phi1, phi2=phi2, phi3=phi3, phi4=phi4, gop=gop,
        s1=a_s @ (phi1 + phi2), s2=a_s @ phi3 + a_p @ phi2,
        s3=a_p @ (phi3 + phi4), s4=a_p @ phi1 + a_s @ phi4,
        ag_s=a_s @ gop, ag_p=a_p @ gop,
        col_sel=col_sel, row_sel=row_sel,
    )


@dataclass
class RobustPieces:
    """Numeric quadratic-form data of the three robust constraints."""

    a_p: np.ndarray
    a_s: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    phi4: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    psi3: np.ndarray
    psi4: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    ks: float
    k3: np.ndarray
    k4: np.ndarray
    kp: float
    k5: np.ndarray
    k6: np.ndarray
    k: float


def build_robust_pieces(
    p: SystemParams,
    uc: UncertainChannelSet,
    ftilde: np.ndarray,
    wtilde: np.ndarray,
    rho: float,
) -> RobustPieces:
    """Assemble every robust quadratic-form coefficient at a lifted point.

    Affine in (ftilde, wtilde) by construction; the LMI builder reuses the
    same maps with the lifted matrices as conic variables.
    """
    st = _structure(uc)
    noise_eff = rho * p.sigma_r2 + p.sigma_c2
    hs = uc.h_s_est
    hp = uc.h_p_est

    psi1 = rho * p.p_pt * (st.gop @ ftilde @ st.gop.conj().T)
    psi2 = noise_eff * st.tr1(ftilde)
    psi3 = st.gram_cols(ftilde)                      # F^H F (exact; see module notes)
    psi4 = rho * psi3 - p.xi * (1.0 - rho) * np.eye(st.m)

    k1 = (
        rho * p.p_sr * (st.s1 @ ftilde @ st.s1.conj().T)
        + rho * p.p_pr * (st.s2 @ ftilde @ st.s2.conj().T)
        + st.a_s @ (psi1 + psi2) @ st.a_s.conj().T
    )
    k2 = st.a_s @ (psi1 + psi2) @ hs
    ks = float(np.real(hs.conj() @ (psi1 + psi2) @ hs)) + p.sigma_s2

    k3 = (
        rho * p.p_pr * (st.s3 @ ftilde @ st.s3.conj().T)
        + rho * p.p_sr * (st.s4 @ ftilde @ st.s4.conj().T)
        + st.a_p @ (wtilde + psi2) @ st.a_p.conj().T
    )
    k4 = st.a_p @ (wtilde + psi2) @ hp
    kp = float(np.real(hp.conj() @ (wtilde + psi2) @ hp)) + p.sigma_p2

    k5 = p.p_pr * (st.a_p @ psi4 @ st.a_p.conj().T) + p.p_sr * (st.a_s @ psi4 @ st.a_s.conj().T)
    k6 = p.p_pr * (st.a_p @ psi4 @ hp) + p.p_sr * (st.a_s @ psi4 @ hs)
    k = (
        p.p_pr * float(np.real(hp.conj() @ psi4 @ hp))
        + p.p_sr * float(np.real(hs.conj() @ psi4 @ hs))
        + p.p_pt * float(np.real(uc.g.conj() @ psi4 @ uc.g))
        + noise_eff * float(np.real(np.trace(ftilde)))
        + float(np.real(np.trace(wtilde)))
        - p.xi * (1.0 - rho) * p.sigma_r2
    )
    return RobustPieces(
        a_p=st.a_p, a_s=st.a_s, phi1=st.phi1, phi2=st.phi2, phi3=st.phi3, phi4=st.phi4,
        psi1=psi1, psi2=psi2, psi3=psi3, psi4=psi4,
        k1=k1, k2=k2, ks=ks, k3=k3, k4=k4, kp=kp, k5=k5, k6=k6, k=k,
    )


# ---------------------------------------------------------------------------
# conic assembly: coefficient extraction for the affine maps above

class _CoeffCache:
    """Per-channel entry-coefficient tensors of every sandwich map.

    For a sandwich L Ftilde L^H, the (a, b) entry equals Tr(Ftilde C) with
    C = conj(L[b, :]) outer L[a, :] transposed into trace convention; the
    tensors here store those C matrices for all (a, b) at once.
    """

    def __init__(self, st: _Structure, uc: UncertainChannelSet):
        self.st = st
        self.uc = uc
        m = st.m
        mm = m * m
        self.mm = mm

        def sandwich_tensor(lmat: np.ndarray) -> np.ndarray:
            # out[a, b, v, u]: coefficient of Ftilde[u, v]
            return np.einsum("au,bv->abvu", lmat, lmat.conj())

        self.t_s1 = sandwich_tensor(st.s1)
        self.t_s2 = sandwich_tensor(st.s2)
        self.t_s3 = sandwich_tensor(st.s3)
        self.t_s4 = sandwich_tensor(st.s4)
        self.t_g = sandwich_tensor(st.gop)           # M x M core map for psi1
        # tr1 core tensor: entry (a,b) of F F^H
        t_tr1 = np.zeros((m, m, mm, mm), dtype=complex)
        for j in range(m):
            for a in range(m):
                for b in range(m):
                    t_tr1[a, b, j * m + b, j * m + a] = 1.0
        self.t_tr1 = t_tr1
        # gram-cols core tensor: entry (i,j) of F^H F = sum_u conj(F[u,i]) F[u,j]
        t_gc = np.zeros((m, m, mm, mm), dtype=complex)
        for u in range(m):
            for i in range(m):
                for j in range(m):
                    t_gc[i, j, i * m + u, j * m + u] += 1.0
        self.t_gram = t_gc

    def embed(self, tensor: np.ndarray, a_emb: np.ndarray) -> np.ndarray:
        """Push an M x M-valued map through A (.) A^H to the stacked space."""
        return np.einsum("pa,abvu,qb->pqvu", a_emb, tensor, a_emb.conj())

    def vec_coeff(self, tensor: np.ndarray, a_emb: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Coefficients of A map(Ftilde) h as a vector of trace forms."""
        mat = np.einsum("abvu,b->avu", tensor, h)
        return np.einsum("pa,avu->pvu", a_emb, mat)

    def scal_coeff(self, tensor: np.ndarray, hl: np.ndarray, hr: np.ndarray) -> np.ndarray:
        """Coefficient of hl^H map(Ftilde) hr."""
        return np.einsum("a,abvu,b->vu", hl.conj(), tensor, hr)


def _herm_re(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + c.conj().T)


def _herm_im(c: np.ndarray) -> np.ndarray:
    return (c - c.conj().T) / 2j


@dataclass
class _AffineLMI:
    """One LMI block: entries affine in (Ftilde, Wtilde, multipliers).

    coeff_f/coeff_w[a][b] are trace-convention coefficient matrices; const
    holds the deterministic part; mult_coeff maps multiplier index ->
    diagonal contribution matrix (real).
    """

    dim: int
    coeff_f: np.ndarray      # (dim, dim, M^2, M^2)
    coeff_w: np.ndarray      # (dim, dim, M, M)
    const: np.ndarray        # (dim, dim) complex
    mult_coeff: dict[int, np.ndarray] = field(default_factory=dict)


def _lmi_to_constraints(
    prob: conic.ConicProblem, lmi: _AffineLMI, slack_block: int
) -> None:
    """Tie a PSD slack block entry-wise to the affine LMI expression."""
    dim = lmi.dim
    for a in range(dim):
        for b in range(a, dim):
            e_re = np.zeros((dim, dim), dtype=complex)
            e_re[a, b] += 0.5
            e_re[b, a] += 0.5
            parts = [(e_re, _herm_re(lmi.coeff_f[a, b]), _herm_re(lmi.coeff_w[a, b]),
                      float(np.real(lmi.const[a, b])),
                      {j: float(np.real(v[a, b])) for j, v in lmi.mult_coeff.items()})]
            if a != b:
                e_im = np.zeros((dim, dim), dtype=complex)
                e_im[a, b] += 0.5j
                e_im[b, a] += -0.5j
                parts.append((e_im, _herm_im(lmi.coeff_f[a, b]), _herm_im(lmi.coeff_w[a, b]),
                              float(np.imag(lmi.const[a, b])),
                              {j: float(np.imag(v[a, b])) for j, v in lmi.mult_coeff.items()}))
            for e_sel, cf, cw, cc, mults in parts:
                con = conic.Constraint(
                    blocks={slack_block: e_sel},
                    scalars={},
                    rhs=cc,
                    sense=conic.EQ,
                )
                if np.abs(cf).max(initial=0.0) > 0:
                    con.blocks[0] = -cf
                if np.abs(cw).max(initial=0.0) > 0:
                    con.blocks[1] = -cw
                for j, v in mults.items():
                    if v != 0.0:
                        con.scalars[j] = -v
                prob.constraints.append(con)


def zf_trace_matrices(uc: UncertainChannelSet, literal_pr_nulling: bool = False):
    """PSD coefficients of the two zero-forcing trace equalities on Ftilde."""
    m = uc.m
    z1 = kron(np.eye(m), np.outer(uc.h_s_est, uc.h_s_est.conj()))
    if literal_pr_nulling:
        z2 = kron(np.eye(m), np.outer(uc.h_p_est, uc.h_p_est.conj()))
    else:
        v = kron(uc.h_s_est.conj(), uc.h_p_est)
        z2 = np.outer(v, v.conj())
    return z1, z2


class RobustAssembler:
    """Builds the per-(rho, t) feasibility SDP from cached structure."""

    def __init__(self, p: SystemParams, uc: UncertainChannelSet,
                 literal_pr_nulling: bool = False):
        self.p = p
        self.uc = uc
        self.literal_pr_nulling = literal_pr_nulling
        self.st = _structure(uc)
        self.cache = _CoeffCache(self.st, uc)
        self.m = uc.m
        self.mm = uc.m * uc.m
        self.dim = 2 * uc.m + 1
        self.zero_radius = uc.eps_p == 0.0 and uc.eps_s == 0.0
        st, cache = self.st, self.cache
        hs, hp, g = uc.h_s_est, uc.h_p_est, uc.g
        # rho-independent building tensors for the error-space maps
        self.k1_draw = {
            "sr": cache.t_s1, "pr": cache.t_s2,
            "pt": cache.embed(cache.t_g, st.a_s), "tr": cache.embed(cache.t_tr1, st.a_s),
        }
        self.k3_draw = {
            "pr": cache.t_s3, "sr": cache.t_s4, "tr": cache.embed(cache.t_tr1, st.a_p),
        }
        self.psi1_vec_p = cache.vec_coeff(cache.t_g, st.a_p, hp)
        self.psi1_scal_p = cache.scal_coeff(cache.t_g, hp, hp)
        self.k2_vec = {
            "pt": cache.vec_coeff(cache.t_g, st.a_s, hs),
            "tr": cache.vec_coeff(cache.t_tr1, st.a_s, hs),
        }
        self.ks_scal = {
            "pt": cache.scal_coeff(cache.t_g, hs, hs),
            "tr": cache.scal_coeff(cache.t_tr1, hs, hs),
        }
        self.k4_vec_tr = cache.vec_coeff(cache.t_tr1, st.a_p, hp)
        self.kp_scal_tr = cache.scal_coeff(cache.t_tr1, hp, hp)
        # power constraint: gram-cols map embedded both ways
        self.k5_emb_p = cache.embed(cache.t_gram, st.a_p)
        self.k5_emb_s = cache.embed(cache.t_gram, st.a_s)
        self.k6_vec_p = cache.vec_coeff(cache.t_gram, st.a_p, hp)
        self.k6_vec_s = cache.vec_coeff(cache.t_gram, st.a_s, hs)
        self.k_scal = (
            self.p.p_pr * cache.scal_coeff(cache.t_gram, hp, hp)
            + self.p.p_sr * cache.scal_coeff(cache.t_gram, hs, hs)
            + self.p.p_pt * cache.scal_coeff(cache.t_gram, g, g)
        )
        eye_mm = np.eye(self.mm, dtype=complex)
        self.trace_f = eye_mm
        self.d_p = st.a_p @ st.a_p.conj().T
        self.d_s = st.a_s @ st.a_s.conj().T

    # scalar constants of the harvested side
    def _harvest_const(self, rho: float) -> float:
        uc, p = self.uc, self.p
        return p.xi * (1.0 - rho) * (
            p.p_pr * float(np.vdot(uc.h_p_est, uc.h_p_est).real)
            + p.p_sr * float(np.vdot(uc.h_s_est, uc.h_s_est).real)
            + p.p_pt * float(np.vdot(uc.g, uc.g).real)
            + p.sigma_r2
        )

    def problem(self, rho: float, t: float, objective: str = "feasibility") -> conic.ConicProblem:
        """The lifted feasibility SDP at one (rho, t).

        objective="min_trace" swaps the zero objective for
        -(Tr Ftilde + Tr Wtilde), used to center the extraction point.
        """
        p, uc, st = self.p, self.uc, self.st
        m, mm, dim = self.m, self.mm, self.dim
        hs, hp, g = uc.h_s_est, uc.h_p_est, uc.g
        noise = (rho * p.sigma_r2, p.sigma_c2)       # rho-weighted, constant parts
        gmin = p.gamma_p_min

        zero_r = self.zero_radius
        n_mult = 0 if zero_r else 6
        prob = conic.ConicProblem(
            block_dims=(mm, m) + ((1, 1, 1) if zero_r else (dim, dim, dim)),
            n_scalars=n_mult,
            maximize=True,
        )
        if objective == "min_trace":
            prob.obj_blocks = {0: -np.eye(mm, dtype=complex), 1: -np.eye(m, dtype=complex)}

        z1, z2 = zf_trace_matrices(uc, self.literal_pr_nulling)
        prob.constraints.append(conic.Constraint(blocks={0: z1}, rhs=0.0, sense=conic.EQ))
        prob.constraints.append(conic.Constraint(blocks={0: z2}, rhs=0.0, sense=conic.EQ))

        # --- SR-side LMI data -------------------------------------------
        k1_f = (
            rho * p.p_sr * self.k1_draw["sr"]
            + rho * p.p_pr * self.k1_draw["pr"]
            + rho * p.p_pt * self.k1_draw["pt"]
            + (noise[0] + noise[1]) * self.k1_draw["tr"]
        )
        k2_f = rho * p.p_pt * self.k2_vec["pt"] + (noise[0] + noise[1]) * self.k2_vec["tr"]
        ks_f = rho * p.p_pt * self.ks_scal["pt"] + (noise[0] + noise[1]) * self.ks_scal["tr"]

        coeff_f = np.zeros((dim, dim, mm, mm), dtype=complex)
        coeff_w = np.zeros((dim, dim, m, m), dtype=complex)
        const = np.zeros((dim, dim), dtype=complex)
        coeff_f[: 2 * m, : 2 * m] = -t * k1_f
        coeff_f[: 2 * m, 2 * m] = -t * k2_f
        coeff_f[2 * m, : 2 * m] = np.conj(np.transpose(-t * k2_f, (0, 2, 1)))
        coeff_f[2 * m, 2 * m] = -t * ks_f
        # Wtilde enters through A_s W A_s^H, A_s W hs, hs^H W hs
        w_quad = np.einsum("pa,qb->pqab", st.a_s, st.a_s.conj())
        w_vec = np.einsum("pa,b->pab", st.a_s, hs)
        coeff_w[: 2 * m, : 2 * m] = np.transpose(w_quad, (0, 1, 3, 2))
        coeff_w[: 2 * m, 2 * m] = np.transpose(w_vec, (0, 2, 1))
        coeff_w[2 * m, : 2 * m] = np.conj(np.transpose(coeff_w[: 2 * m, 2 * m], (0, 2, 1)))
        coeff_w[2 * m, 2 * m] = np.outer(hs, hs.conj())
        const[2 * m, 2 * m] = -t * p.sigma_s2
        lmi_s = _AffineLMI(dim=dim, coeff_f=coeff_f, coeff_w=coeff_w, const=const)
        if not zero_r:
            lmi_s.mult_coeff[0] = _pad_corner(self.d_p, -uc.eps_p**2)
            lmi_s.mult_coeff[1] = _pad_corner(self.d_s, -uc.eps_s**2)

        # --- PR-side LMI data -------------------------------------------
        k3_f = (
            rho * p.p_pr * self.k3_draw["pr"]
            + rho * p.p_sr * self.k3_draw["sr"]
            + (noise[0] + noise[1]) * self.k3_draw["tr"]
        )
        psi1_quad = rho * p.p_pt * self.cache.embed(self.cache.t_g, st.a_p)
        psi1_vec = rho * p.p_pt * self.psi1_vec_p
        psi1_scal = rho * p.p_pt * self.psi1_scal_p
        k4_f = (noise[0] + noise[1]) * self.k4_vec_tr
        kp_f = (noise[0] + noise[1]) * self.kp_scal_tr

        coeff_f = np.zeros((dim, dim, mm, mm), dtype=complex)
        coeff_w = np.zeros((dim, dim, m, m), dtype=complex)
        const = np.zeros((dim, dim), dtype=complex)
        coeff_f[: 2 * m, : 2 * m] = psi1_quad - gmin * k3_f
        coeff_f[: 2 * m, 2 * m] = psi1_vec - gmin * k4_f
        coeff_f[2 * m, : 2 * m] = np.conj(np.transpose(coeff_f[: 2 * m, 2 * m], (0, 2, 1)))
        coeff_f[2 * m, 2 * m] = psi1_scal - gmin * kp_f
        wp_quad = np.einsum("pa,qb->pqab", st.a_p, st.a_p.conj())
        wp_vec = np.einsum("pa,b->pab", st.a_p, hp)
        coeff_w[: 2 * m, : 2 * m] = -gmin * np.transpose(wp_quad, (0, 1, 3, 2))
        coeff_w[: 2 * m, 2 * m] = -gmin * np.transpose(wp_vec, (0, 2, 1))
        coeff_w[2 * m, : 2 * m] = np.conj(np.transpose(coeff_w[: 2 * m, 2 * m], (0, 2, 1)))
        coeff_w[2 * m, 2 * m] = -gmin * np.outer(hp, hp.conj())
        const[2 * m, 2 * m] = -gmin * p.sigma_p2
        lmi_p = _AffineLMI(dim=dim, coeff_f=coeff_f, coeff_w=coeff_w, const=const)
        if not zero_r:
            lmi_p.mult_coeff[2] = _pad_corner(self.d_p, -uc.eps_p**2)
            lmi_p.mult_coeff[3] = _pad_corner(self.d_s, -uc.eps_s**2)

        # --- power LMI data ---------------------------------------------
        # K5 = P_PR A_p Psi4 A_p^H + P_SR A_s Psi4 A_s^H with
        # Psi4 = rho * gram_cols(Ftilde) - xi (1-rho) I
        coeff_f = np.zeros((dim, dim, mm, mm), dtype=complex)
        coeff_w = np.zeros((dim, dim, m, m), dtype=complex)
        const = np.zeros((dim, dim), dtype=complex)
        coeff_f[: 2 * m, : 2 * m] = -(rho * p.p_pr * self.k5_emb_p + rho * p.p_sr * self.k5_emb_s)
        const[: 2 * m, : 2 * m] += p.xi * (1.0 - rho) * (p.p_pr * self.d_p + p.p_sr * self.d_s)
        coeff_f[: 2 * m, 2 * m] = -rho * (p.p_pr * self.k6_vec_p + p.p_sr * self.k6_vec_s)
        const[: 2 * m, 2 * m] += p.xi * (1.0 - rho) * (
            p.p_pr * (st.a_p @ hp) + p.p_sr * (st.a_s @ hs)
        )
        coeff_f[2 * m, : 2 * m] = np.conj(np.transpose(coeff_f[: 2 * m, 2 * m], (0, 2, 1)))
        const[2 * m, : 2 * m] = np.conj(const[: 2 * m, 2 * m])
        coeff_f[2 * m, 2 * m] = -(rho * self.k_scal + (noise[0] + noise[1]) * self.trace_f)
        coeff_w[2 * m, 2 * m] = -np.eye(m, dtype=complex)
        const[2 * m, 2 * m] = self._harvest_const(rho)
        lmi_e = _AffineLMI(dim=dim, coeff_f=coeff_f, coeff_w=coeff_w, const=const)
        if not zero_r:
            lmi_e.mult_coeff[4] = _pad_corner(self.d_p, -uc.eps_p**2)
            lmi_e.mult_coeff[5] = _pad_corner(self.d_s, -uc.eps_s**2)

        for idx, lmi in enumerate((lmi_s, lmi_p, lmi_e)):
            if zero_r:
                _corner_only_constraint(prob, lmi, 2 + idx)
            else:
                _lmi_to_constraints(prob, lmi, 2 + idx)
        return prob


def _pad_corner(d_top: np.ndarray, corner: float) -> np.ndarray:
    dim = d_top.shape[0] + 1
    out = np.zeros((dim, dim))
    out[:-1, :-1] = np.real(d_top)
    out[-1, -1] = corner
    return out


def _corner_only_constraint(prob: conic.ConicProblem, lmi: _AffineLMI, slack_block: int) -> None:
    """Zero-radius collapse: only the scalar corner inequality survives."""
    a = lmi.dim - 1
    con = conic.Constraint(
        blocks={slack_block: np.array([[1.0 + 0.0j]])},
        rhs=float(np.real(lmi.const[a, a])),
        sense=conic.EQ,
    )
    cf = _herm_re(lmi.coeff_f[a, a])
    cw = _herm_re(lmi.coeff_w[a, a])
    if np.abs(cf).max(initial=0.0) > 0:
        con.blocks[0] = -cf
    if np.abs(cw).max(initial=0.0) > 0:
        con.blocks[1] = -cw
    prob.constraints.append(con)


def build_lmis(
    p: SystemParams,
    uc: UncertainChannelSet,
    rho: float,
    t: float,
    literal_pr_nulling: bool = False,
    objective: str = "feasibility",
) -> conic.ConicProblem:
    """Feasibility SDP of the robust design problem at one (rho, t)."""
    return RobustAssembler(p, uc, literal_pr_nulling).problem(rho, t, objective)


# ---------------------------------------------------------------------------
# sampling score / repair / extraction

def _draw_errors(uc: UncertainChannelSet, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked error draws (n+1 x M each), first row the zero perturbation."""
    dhp = np.zeros((n + 1, uc.m), dtype=complex)
    dhs = np.zeros((n + 1, uc.m), dtype=complex)
    for i in range(n):
        a, b = model.sample_uncertainty(uc, seed + i, boundary=(i % 2 == 0))
        dhp[i + 1] = a
        dhs[i + 1] = b
    return dhp, dhs


def _worst_metrics(
    p: SystemParams, uc: UncertainChannelSet, design: Design,
    draws: tuple[np.ndarray, np.ndarray],
) -> tuple[float, float, float]:
    """Sampled worst case: (min SR SINR, min PR SINR, max relative power excess).

    Batched form of the exact model evaluators over all draws at once.
    """
    dhp, dhs = draws
    f, w, rho = design.f_mat, design.w, design.rho
    g = uc.g
    hp = uc.h_p_est[None, :] + dhp
    hs = uc.h_s_est[None, :] + dhs
    noise_eff = rho * p.sigma_r2 + p.sigma_c2
    fro2 = float(np.sum(np.abs(f) ** 2))
    w2 = float(np.vdot(w, w).real)

    hpf = hp.conj() @ f                      # rows: h_p(d)^H F
    hsf = hs.conj() @ f
    fg = f @ g
    mu1 = rho * p.p_pt * np.abs(hpf @ g) ** 2
    resid_p = np.einsum("ni,ni->n", dhp.conj(), hp @ f.T) + (uc.h_p_est.conj() @ f) @ dhp.T
    mu2 = rho * p.p_pr * np.abs(resid_p) ** 2
    mu3 = rho * p.p_sr * np.abs(np.einsum("ni,ni->n", hpf, hs)) ** 2 \
        + np.abs(hp.conj() @ w) ** 2
    mu4 = noise_eff * np.sum(np.abs(hpf) ** 2, axis=1) + p.sigma_p2

    eta1 = np.abs(hs.conj() @ w) ** 2
    resid_s = np.einsum("ni,ni->n", dhs.conj(), hs @ f.T) + (uc.h_s_est.conj() @ f) @ dhs.T
    eta2 = rho * p.p_sr * np.abs(resid_s) ** 2
    eta3 = rho * (
        p.p_pr * np.abs(np.einsum("ni,ni->n", hsf, hp)) ** 2
        + p.p_pt * np.abs(hsf @ g) ** 2
    )
    eta4 = noise_eff * np.sum(np.abs(hsf) ** 2, axis=1) + p.sigma_s2

    sinr_pr = mu1 / (mu2 + mu3 + mu4)
    sinr_sr = eta1 / (eta2 + eta3 + eta4)

    p_st = rho * (
        p.p_pt * float(np.sum(np.abs(fg) ** 2))
        + p.p_pr * np.sum(np.abs(hp @ f.T) ** 2, axis=1)
        + p.p_sr * np.sum(np.abs(hs @ f.T) ** 2, axis=1)
        + p.sigma_r2 * fro2
    ) + p.sigma_c2 * fro2 + w2
    p_eh = p.xi * (1.0 - rho) * (
        p.p_pr * np.sum(np.abs(hp) ** 2, axis=1)
        + p.p_sr * np.sum(np.abs(hs) ** 2, axis=1)
        + p.p_pt * float(np.vdot(g, g).real)
        + p.sigma_r2
    )
    rel_excess = (p_st - p_eh) / np.maximum(p_eh, 1e-12)
    return float(sinr_sr.min()), float(sinr_pr.min()), float(rel_excess.max())


def _repair_worst_case(p, uc, design, draws) -> Design:
    """Scale w against the worst-case PU demand, then both against power."""
    gmin = p.gamma_p_min
    for _ in range(4):
        min_sr, min_pr, max_pow = _worst_metrics(p, uc, design, draws)
        changed = False
        if gmin > 0 and min_pr < gmin:
            lo, hi = 0.0, 1.0
            for _ in range(25):
                mid = 0.5 * (lo + hi)
                _, pr_mid, _ = _worst_metrics(p, uc, design.scaled(w_scale=mid), draws)
                if pr_mid >= gmin:
                    lo = mid
                else:
                    hi = mid
            design = design.scaled(w_scale=lo)
            changed = True
            _, _, max_pow = _worst_metrics(p, uc, design, draws)
        if max_pow > 0:
            s = math.sqrt(1.0 / (1.0 + max_pow)) * (1.0 - 1e-9)
            design = design.scaled(f_scale=s, w_scale=s)
            changed = True
        if not changed:
            break
    return design


def _extract(
    p: SystemParams,
    uc: UncertainChannelSet,
    ftilde: np.ndarray,
    wtilde: np.ndarray,
    rho: float,
    opts: RobustOptions,
) -> Design:
    m = uc.m
    f_vec, ratio_f = dominant_rank1(ftilde)
    w_vec, ratio_w = dominant_rank1(wtilde)
    base = Design(f_mat=unvec(f_vec, m, m), w=w_vec, rho=rho)
    screen = _draw_errors(uc, opts.screen_draws, opts.seed + 10_000)
    if max(ratio_f, ratio_w) <= RANK1_RATIO_TOL:
        return _repair_worst_case(p, uc, base, screen)

    # Gaussian randomization: candidates from the lifted Gaussian, repaired
    # and scored by sampled worst-case metrics
    rng = np.random.default_rng(opts.seed)
    vals_f, vecs_f = np.linalg.eigh(ftilde)
    vals_w, vecs_w = np.linalg.eigh(wtilde)
    root_f = vecs_f @ np.diag(np.sqrt(np.maximum(vals_f, 0.0)))
    root_w = vecs_w @ np.diag(np.sqrt(np.maximum(vals_w, 0.0)))
    gmin = p.gamma_p_min
    candidates = [base]
    for _ in range(opts.rand_draws):
        zf = (rng.standard_normal(m * m) + 1j * rng.standard_normal(m * m)) / math.sqrt(2)
        zw = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2)
        f_cand = root_f @ zf if ratio_f > RANK1_RATIO_TOL else f_vec
        w_cand = root_w @ zw if ratio_w > RANK1_RATIO_TOL else w_vec
        candidates.append(Design(f_mat=unvec(f_cand, m, m), w=w_cand, rho=rho))

    def score(d: Design) -> float:
        min_sr, min_pr, max_pow = _worst_metrics(p, uc, d, screen)
        if gmin > 0 and min_pr < gmin * (1 - 1e-9):
            return -math.inf
        if max_pow > 1e-9:
            return -math.inf
        return min_sr

    repaired = [_repair_worst_case(p, uc, d, screen) for d in candidates]
    scored = sorted(repaired, key=score, reverse=True)
    finalists = scored[: 5]
    final_draws = _draw_errors(uc, opts.score_draws, opts.seed + 20_000)
    best = max(finalists, key=lambda d: _worst_metrics(p, uc, d, final_draws)[0])
    return _repair_worst_case(p, uc, best, final_draws)


# ---------------------------------------------------------------------------
# the outer algorithm: rho grid x t bisection

def solve(
    p: SystemParams,
    uc: UncertainChannelSet,
    opts: RobustOptions | None = None,
) -> RobustResult:
    """Worst-case robust design: grid over rho, bisection on the SINR target.

    Each rho's bisection first probes the incumbent target, so splits that
    cannot beat the best so far cost a single feasibility solve.
    """
    opts = opts or RobustOptions()
    nominal = optimal.solve(p, uc.nominal())
    infeasible = RobustResult(
        design=None, t_star=0.0, rho_star=float("nan"), worst_case_rate_s=0.0,
        extracted_rate_s=0.0, feasible=False, status="infeasible",
    )
    if not nominal.feasible:
        return infeasible
    t_max0 = 2.0 * (2.0 ** nominal.rate_s - 1.0)

    assembler = RobustAssembler(p, uc, opts.literal_pr_nulling)

    def feasible_at(rho: float, t: float) -> bool:
        prob = assembler.problem(rho, t)
        return conic.check_feasible(prob) is conic.Feasibility.FEASIBLE

    best_t = 0.0
    best_rho = float("nan")
    n_steps = int(round(1.0 / opts.rho_step)) - 1
    rhos = [opts.rho_step * (i + 1) for i in range(n_steps)]
    for rho in rhos:
        if not feasible_at(rho, best_t + opts.t_tol):
            continue
        lo, hi = best_t + opts.t_tol, t_max0
        if not feasible_at(rho, hi):
            while hi - lo > opts.t_tol:
                mid = 0.5 * (lo + hi)
                if feasible_at(rho, mid):
                    lo = mid
                else:
                    hi = mid
        else:
            lo = hi
        best_t, best_rho = lo, rho

    if not math.isfinite(best_rho):
        return infeasible

    prob = assembler.problem(best_rho, best_t, objective="min_trace")
    sol = conic.solve_sdp(prob)
    if not sol.optimal:
        # fall back to the plain feasibility point at a slightly interior t
        prob = assembler.problem(best_rho, max(best_t - opts.t_tol, 0.0), objective="min_trace")
        sol = conic.solve_sdp(prob)
        if not sol.optimal:
            return RobustResult(
                design=None, t_star=best_t, rho_star=best_rho,
                worst_case_rate_s=math.log2(1.0 + best_t), extracted_rate_s=0.0,
                feasible=False, status="extraction_failed",
            )
    design = _extract(p, uc, sol.blocks[0], sol.blocks[1], best_rho, opts)
    final_draws = _draw_errors(uc, opts.score_draws, opts.seed + 20_000)
    min_sr, min_pr, max_pow = _worst_metrics(p, uc, design, final_draws)
    return RobustResult(
        design=design,
        t_star=best_t,
        rho_star=best_rho,
        worst_case_rate_s=math.log2(1.0 + best_t),
        extracted_rate_s=math.log2(1.0 + max(min_sr, 0.0)),
        feasible=True,
        status="ok",
    )
