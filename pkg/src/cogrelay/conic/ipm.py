"""Reference dense primal-dual interior-point SDP solver.

Pipeline: a ConicProblem is compiled to the standard form

    min <C, X>  s.t.  <A_i, X> = b_i,  X in (PSD blocks) x (nonneg vector)

by (1) facial reduction of zero-right-hand-side equality constraints with
PSD coefficients (these force the variable onto a face of the cone, so no
interior point exists until the block is reparametrized X = N Xhat N^H),
(2) the real symmetric embedding [[Re, -Im], [Im, Re]] of complex
Hermitian blocks (coefficients are halved so trace inner products carry
over unchanged), (3) slack scalars for inequalities, and (4) row and
objective equilibration.

The core iteration is the HKM direction with a Mehrotra-style
predictor-corrector (optional; a fixed barrier reduction factor of 0.2 is
the non-Mehrotra fallback), at most 200 iterations, stopping at
complementarity gap 1e-8 absolute or 1e-7 relative.  Feasibility is
classified by an explicit phase-1 problem (min s over A(X) + s*r0 = b,
which has a trivially interior start) rather than by divergence
heuristics alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..linalg import herm
from .problem import EQ, GE, LE, ConicProblem, Feasibility, SolveStatus

_PSD_COEF_TOL = 1e-9   # facial reduction: coefficient counts as PSD
_ZERO_ROW_TOL = 1e-14
_IM_TOL = 1e-13        # block treated as real when all data below this


@dataclass
class SolverOptions:
    max_iters: int = 200
    tol_gap_abs: float = 1e-8
    tol_gap_rel: float = 1e-7
    tol_feas: float = 1e-9
    step_frac: float = 0.98
    sigma: float | None = None   # None = Mehrotra; else fixed factor (0.2 documented)
    feas_eps: float = 1e-7       # phase-1 classification threshold


# ---------------------------------------------------------------------------
# compilation to standard form

def _embed_complex(a: np.ndarray) -> np.ndarray:
    re, im = np.real(a), np.imag(a)
    return 0.5 * np.block([[re, -im], [im, re]])


def _unembed_complex(y: np.ndarray, n: int) -> np.ndarray:
    return herm(0.5 * (y[:n, :n] + y[n:, n:]) + 0.5j * (y[n:, :n] - y[:n, n:]))


@dataclass
class _Std:
    """Standard-form data plus the bookkeeping to map solutions back."""

    block_dims: list[int] = field(default_factory=list)
    diag_dim: int = 0
    a_blocks: list[np.ndarray] = field(default_factory=list)   # (m, n, n) each
    a_diag: np.ndarray | None = None                           # (m, d)
    b: np.ndarray | None = None
    c_blocks: list[np.ndarray] = field(default_factory=list)
    c_diag: np.ndarray | None = None
    # bookkeeping
    live_blocks: list[int] = field(default_factory=list)
    block_complex: list[bool] = field(default_factory=list)
    block_basis: list[np.ndarray | None] = field(default_factory=list)  # facial lift
    row_of_constraint: list[int] = field(default_factory=list)          # -1 = dropped
    row_scale: np.ndarray | None = None
    block_col_scale: np.ndarray | None = None
    diag_col_scale: np.ndarray | None = None
    obj_scale: float = 1.0
    sign: float = 1.0                                          # -1 if maximize
    scalar_col: list[int] = field(default_factory=list)        # -1 = fixed to zero
    user_block_dims: list[int] = field(default_factory=list)
    infeasible_at_compile: bool = False


def _facial_reduction(problem: ConicProblem):
    """Shrink blocks along zero-rhs equality constraints with PSD data.

    Tr(Z X) = 0 with Z, X PSD forces X onto null(Z); nonnegative scalars
    with positive coefficients in such a constraint are forced to zero.
    """
    bases = [np.eye(d, dtype=complex) for d in problem.block_dims]
    obj_blocks = {b: np.asarray(a, dtype=complex).copy() for b, a in problem.obj_blocks.items()}
    cons_blocks = [
        {b: np.asarray(a, dtype=complex).copy() for b, a in c.blocks.items()}
        for c in problem.constraints
    ]
    fixed_zero: set[int] = set()
    dropped: set[int] = set()

    def reducible(i: int) -> bool:
        c = problem.constraints[i]
        if i in dropped or c.sense != EQ or abs(c.rhs) > 1e-12:
            return False
        has_term = False
        for b, a in cons_blocks[i].items():
            scale = float(np.abs(a).max(initial=0.0))
            if scale <= _ZERO_ROW_TOL:
                continue
            has_term = True
            if scipy.linalg.eigvalsh(herm(a))[0] < -_PSD_COEF_TOL * scale:
                return False
        for cj in c.scalars.values():
            if abs(cj) <= _ZERO_ROW_TOL:
                continue
            has_term = True
            if cj < 0:
                return False
        return has_term

    changed = True
    while changed:
        changed = False
        for i in range(len(problem.constraints)):
            if not reducible(i):
                continue
            for b, a in list(cons_blocks[i].items()):
                scale = float(np.abs(a).max(initial=0.0))
                if scale <= _ZERO_ROW_TOL:
                    continue
                vals, vecs = scipy.linalg.eigh(herm(a))
                keep = vals <= _PSD_COEF_TOL * max(scale, 1.0)
                if int(np.count_nonzero(keep)) == a.shape[0]:
                    continue
                nmat = vecs[:, keep]
                bases[b] = bases[b] @ nmat
                for coeffs in [obj_blocks] + cons_blocks:
                    if b in coeffs:
                        coeffs[b] = herm(nmat.conj().T @ coeffs[b] @ nmat)
            for j, cj in problem.constraints[i].scalars.items():
                if cj > _ZERO_ROW_TOL:
                    fixed_zero.add(j)
            dropped.add(i)
            changed = True
    kept = [i for i in range(len(problem.constraints)) if i not in dropped]
    return bases, fixed_zero, kept, obj_blocks, cons_blocks


def compile_problem(problem: ConicProblem, reduce_faces: bool = True) -> _Std:
    problem.validate()
    std = _Std()
    std.sign = -1.0 if problem.maximize else 1.0
    std.user_block_dims = list(problem.block_dims)

    if reduce_faces:
        bases, fixed_zero, kept, obj_blocks, cons_blocks = _facial_reduction(problem)
    else:
        bases = [np.eye(d, dtype=complex) for d in problem.block_dims]
        fixed_zero, kept = set(), list(range(len(problem.constraints)))
        obj_blocks = {b: np.asarray(a, dtype=complex) for b, a in problem.obj_blocks.items()}
        cons_blocks = [
            {b: np.asarray(a, dtype=complex) for b, a in c.blocks.items()}
            for c in problem.constraints
        ]

    live = [b for b in range(len(problem.block_dims)) if bases[b].shape[1] > 0]
    std.live_blocks = live
    std.block_basis = [bases[b] for b in range(len(problem.block_dims))]

    block_complex = []
    for b in live:
        mx = float(np.abs(np.imag(bases[b])).max(initial=0.0))
        if b in obj_blocks:
            mx = max(mx, float(np.abs(np.imag(obj_blocks[b])).max(initial=0.0)))
        for cb in cons_blocks:
            if b in cb:
                mx = max(mx, float(np.abs(np.imag(cb[b])).max(initial=0.0)))
        block_complex.append(mx > _IM_TOL)
    std.block_complex = block_complex

    def emb(pos: int, a: np.ndarray) -> np.ndarray:
        return _embed_complex(herm(a)) if block_complex[pos] else np.real(herm(a))

    std.block_dims = [
        (2 if block_complex[k] else 1) * bases[b].shape[1] for k, b in enumerate(live)
    ]

    col = 0
    std.scalar_col = []
    for j in range(problem.n_scalars):
        std.scalar_col.append(-1 if j in fixed_zero else col)
        col += 0 if j in fixed_zero else 1
    slack_col = {}
    for i in kept:
        if problem.constraints[i].sense != EQ:
            slack_col[i] = col
            col += 1
    std.diag_dim = col

    m = len(kept)
    a_blocks = [np.zeros((m, d, d)) for d in std.block_dims]
    a_diag = np.zeros((m, std.diag_dim))
    b_vec = np.zeros(m)
    std.row_of_constraint = [-1] * len(problem.constraints)
    for r, i in enumerate(kept):
        con = problem.constraints[i]
        std.row_of_constraint[i] = r
        for k, b in enumerate(live):
            if b in cons_blocks[i]:
                a_blocks[k][r] = emb(k, cons_blocks[i][b])
        for j, cj in con.scalars.items():
            if std.scalar_col[j] >= 0:
                a_diag[r, std.scalar_col[j]] = cj
        if con.sense == LE:
            a_diag[r, slack_col[i]] = 1.0
        elif con.sense == GE:
            a_diag[r, slack_col[i]] = -1.0
        b_vec[r] = con.rhs

    # constant rows are either trivially satisfiable or witness infeasibility
    keep_mask = np.ones(m, dtype=bool)
    for r, i in enumerate(kept):
        norm = sum(float(np.abs(ab[r]).max(initial=0.0)) for ab in a_blocks)
        norm += float(np.abs(a_diag[r]).max(initial=0.0))
        if norm > _ZERO_ROW_TOL:
            continue
        sense, rhs = problem.constraints[i].sense, b_vec[r]
        ok = (
            (sense == EQ and abs(rhs) <= 1e-12)
            or (sense == LE and rhs >= -1e-12)
            or (sense == GE and rhs <= 1e-12)
        )
        if not ok:
            std.infeasible_at_compile = True
        keep_mask[r] = False
        std.row_of_constraint[i] = -1
    if not keep_mask.all():
        remap = np.cumsum(keep_mask) - 1
        std.row_of_constraint = [
            (int(remap[r]) if (r >= 0 and keep_mask[r]) else -1)
            for r in std.row_of_constraint
        ]
        a_blocks = [ab[keep_mask] for ab in a_blocks]
        a_diag = a_diag[keep_mask]
        b_vec = b_vec[keep_mask]
        m = int(keep_mask.sum())

    c_blocks = [np.zeros((d, d)) for d in std.block_dims]
    c_diag = np.zeros(std.diag_dim)
    for k, b in enumerate(live):
        if b in obj_blocks:
            c_blocks[k] = std.sign * emb(k, obj_blocks[b])
    for j, cj in problem.obj_scalars.items():
        if std.scalar_col[j] >= 0:
            c_diag[std.scalar_col[j]] = std.sign * cj

    # equilibration: rows, then block columns, then rows again (Ruiz-style);
    # column scales re-center the interior start across badly mixed units
    row_scale = np.ones(m)

    def scale_rows():
        for r in range(m):
            norm = np.sqrt(
                sum(float(np.sum(ab[r] ** 2)) for ab in a_blocks)
                + float(np.sum(a_diag[r] ** 2))
            )
            norm = max(norm, 1e-10)
            row_scale[r] *= norm
            for ab in a_blocks:
                ab[r] /= norm
            if std.diag_dim:
                a_diag[r] /= norm
            b_vec[r] /= norm

    scale_rows()
    block_col_scale = np.ones(len(std.block_dims))
    for k in range(len(std.block_dims)):
        norm = np.sqrt(float(np.sum(a_blocks[k] ** 2)) / max(m, 1))
        if norm > 1e-10:
            block_col_scale[k] = norm
            a_blocks[k] /= norm
            c_blocks[k] = c_blocks[k] / norm
    diag_col_scale = np.ones(std.diag_dim)
    for j in range(std.diag_dim):
        norm = np.sqrt(float(np.sum(a_diag[:, j] ** 2)) / max(m, 1))
        if norm > 1e-10:
            diag_col_scale[j] = norm
            a_diag[:, j] /= norm
            c_diag[j] = c_diag[j] / norm
    scale_rows()

    obj_norm = np.sqrt(sum(float(np.sum(cb**2)) for cb in c_blocks) + float(np.sum(c_diag**2)))
    std.obj_scale = max(obj_norm, 1.0)
    std.a_blocks = a_blocks
    std.a_diag = a_diag
    std.b = b_vec
    std.c_blocks = [cb / std.obj_scale for cb in c_blocks]
    std.c_diag = c_diag / std.obj_scale
    std.row_scale = row_scale
    std.block_col_scale = block_col_scale
    std.diag_col_scale = diag_col_scale
    return std


# ---------------------------------------------------------------------------
# HKM predictor-corrector on standard form

class _Point:
    def __init__(self, dims: list[int], diag_dim: int):
        self.blocks = [np.eye(d) for d in dims]
        self.diag = np.ones(diag_dim)


def _inner(xb, xd, sb, sd) -> float:
    tot = float(np.dot(xd, sd)) if xd.size else 0.0
    for x, s in zip(xb, sb):
        tot += float(np.sum(x * s))
    return tot


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha keeping x + alpha*dx PSD, for symmetric PD x."""
    try:
        lam = scipy.linalg.eigvalsh(
            0.5 * (dx + dx.T), 0.5 * (x + x.T), check_finite=False,
            subset_by_index=(0, 0),
        )[0]
    except (scipy.linalg.LinAlgError, ValueError):
        vals, vecs = scipy.linalg.eigh(0.5 * (x + x.T), check_finite=False)
        vals = np.maximum(vals, 1e-14 * max(float(vals[-1]), 1e-300))
        low = vecs * np.sqrt(vals)
        w = np.linalg.solve(low, np.linalg.solve(low, dx).T).T
        lam = scipy.linalg.eigvalsh(0.5 * (w + w.T), check_finite=False)[0]
    return np.inf if lam >= -1e-14 else -1.0 / lam


def _max_step_diag(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _flush_tiny(a: np.ndarray) -> np.ndarray:
    """Zero structurally-dead entries so GEMM intermediates avoid denormals."""
    cutoff = 1e-30 * max(float(np.abs(a).max(initial=0.0)), 1e-200)
    a[np.abs(a) < cutoff] = 0.0
    return a


class _IPM:
    """One interior-point run over a fixed standard-form problem."""

    def __init__(self, std: _Std, opts: SolverOptions):
        self.std = std
        self.opts = opts
        self.m = std.b.shape[0]
        self.nu = max(sum(std.block_dims) + std.diag_dim, 1)
        self.x = _Point(std.block_dims, std.diag_dim)
        self.s = _Point(std.block_dims, std.diag_dim)
        self.y = np.zeros(self.m)
        self.iterations = 0
        self.hint_unbounded = False
        self.hint_infeasible = False
        self._bnorm = 1.0 + float(np.linalg.norm(std.b))
        self._cnorm = 1.0 + np.sqrt(
            sum(float(np.sum(cb**2)) for cb in std.c_blocks) + float(np.sum(std.c_diag**2))
        )
        # flattened coefficient stacks: every A-apply/adjoint is one GEMV,
        # and the Schur assembly three big GEMMs per block
        self._a_flat = [ab.reshape(self.m, -1) for ab in std.a_blocks]
        self._a_mid = [
            ab.transpose(1, 0, 2).reshape(d, self.m * d)
            for ab, d in zip(std.a_blocks, std.block_dims)
        ]

    def apply_a(self, xb, xd) -> np.ndarray:
        out = self.std.a_diag @ xd if self.std.diag_dim else np.zeros(self.m)
        for af, x in zip(self._a_flat, xb):
            out = out + af @ x.reshape(-1)
        return out

    def adjoint_a(self, y):
        blocks = [
            (y @ af).reshape(d, d)
            for af, d in zip(self._a_flat, self.std.block_dims)
        ]
        diag = self.std.a_diag.T @ y if self.std.diag_dim else np.zeros(0)
        return blocks, diag

    def pobj(self) -> float:
        val = float(np.dot(self.std.c_diag, self.x.diag)) if self.std.diag_dim else 0.0
        for c, x in zip(self.std.c_blocks, self.x.blocks):
            val += float(np.sum(c * x))
        return val

    def metrics(self):
        rp = self.std.b - self.apply_a(self.x.blocks, self.x.diag)
        aty_b, aty_d = self.adjoint_a(self.y)
        rd_b = [c - at - s for c, at, s in zip(self.std.c_blocks, aty_b, self.s.blocks)]
        rd_d = self.std.c_diag - aty_d - self.s.diag
        mu = _inner(self.x.blocks, self.x.diag, self.s.blocks, self.s.diag) / self.nu
        pres = float(np.linalg.norm(rp)) / self._bnorm
        dres = np.sqrt(
            sum(float(np.sum(rb**2)) for rb in rd_b) + float(np.sum(rd_d**2))
        ) / self._cnorm
        return rp, rd_b, rd_d, mu, pres, dres

    def converged(self, mu, pres, dres) -> bool:
        gap = mu * self.nu
        return (
            pres <= self.opts.tol_feas
            and dres <= max(self.opts.tol_feas, 1e-9)
            and (gap <= self.opts.tol_gap_abs or gap / (1.0 + abs(self.pobj())) <= self.opts.tol_gap_rel)
        )

    def update_hints(self):
        ynorm = float(np.linalg.norm(self.y))
        if ynorm > 1e7:
            yhat = self.y / ynorm
            atb, atd = self.adjoint_a(yhat)
            max_eig = max(
                [scipy.linalg.eigvalsh(0.5 * (ab + ab.T))[-1] for ab in atb if ab.size],
                default=0.0,
            )
            if atd.size:
                max_eig = max(max_eig, float(atd.max()))
            if max_eig <= 1e-8 and float(np.dot(self.std.b, yhat)) > 1e-8:
                self.hint_infeasible = True
        xnorm = sum(float(np.trace(x)) for x in self.x.blocks) + float(self.x.diag.sum())
        if xnorm > 1e9:
            inv = 1.0 / xnorm
            ax = self.apply_a([inv * x for x in self.x.blocks], inv * self.x.diag)
            if float(np.linalg.norm(ax)) <= 1e-8 and inv * self.pobj() < -1e-9:
                self.hint_unbounded = True

    def _schur(self, sinv):
        schur = np.zeros((self.m, self.m))
        if self.std.diag_dim:
            w = self.x.diag / self.s.diag
            schur += (self.std.a_diag * w[None, :]) @ self.std.a_diag.T
        m = self.m
        for am, af, x, si, d in zip(
            self._a_mid, self._a_flat, self.x.blocks, sinv, self.std.block_dims
        ):
            t1 = (x @ am).reshape(d, m, d).transpose(1, 0, 2).reshape(m * d, d)
            p = (t1 @ si).reshape(m, d, d)       # p[i] = X A_i Sinv
            schur += af @ p.transpose(0, 2, 1).reshape(m, -1).T
        return 0.5 * (schur + schur.T)

    def _solve_schur(self, schur_f, rhs):
        dy = scipy.linalg.cho_solve(schur_f[0], rhs, check_finite=False)
        resid = rhs - schur_f[1] @ dy
        if float(np.linalg.norm(resid)) > 1e-13 * (1.0 + float(np.linalg.norm(rhs))):
            dy = dy + scipy.linalg.cho_solve(schur_f[0], resid, check_finite=False)
        return dy

    def _direction(self, schur_f, sinv, rp, rd_b, rd_d, r3_b, r3_d):
        h_b = [(r3 - x @ rd) @ si for r3, x, rd, si in zip(r3_b, self.x.blocks, rd_b, sinv)]
        h_d = (r3_d - self.x.diag * rd_d) / self.s.diag if self.std.diag_dim else np.zeros(0)
        rhs = rp - self.apply_a(h_b, h_d)
        dy = self._solve_schur(schur_f, rhs)
        aty_b, aty_d = self.adjoint_a(dy)
        ds_b = [rd - at for rd, at in zip(rd_b, aty_b)]
        ds_d = rd_d - aty_d if self.std.diag_dim else np.zeros(0)
        dx_b = []
        for r3, x, dsb, si in zip(r3_b, self.x.blocks, ds_b, sinv):
            d = (r3 - x @ dsb) @ si
            dx_b.append(0.5 * (d + d.T))
        dx_d = (r3_d - self.x.diag * ds_d) / self.s.diag if self.std.diag_dim else np.zeros(0)
        # KKT-level refinement: badly conditioned Schur systems leave
        # A(dX) short of rp; push the leftover through the same operator
        for _ in range(2):
            leftover = rp - self.apply_a(dx_b, dx_d)
            if float(np.linalg.norm(leftover)) <= 1e-11 * (1.0 + float(np.linalg.norm(rp))):
                break
            dy2 = self._solve_schur(schur_f, leftover)
            aty_b2, aty_d2 = self.adjoint_a(dy2)
            for k, (x, si) in enumerate(zip(self.x.blocks, sinv)):
                d = x @ aty_b2[k] @ si
                dx_b[k] = dx_b[k] + 0.5 * (d + d.T)
                ds_b[k] = ds_b[k] - aty_b2[k]
            if self.std.diag_dim:
                dx_d = dx_d + self.x.diag * aty_d2 / self.s.diag
                ds_d = ds_d - aty_d2
            dy = dy + dy2
        for arr in dx_b + ds_b + [dx_d, ds_d, dy]:
            if not np.all(np.isfinite(arr)):
                return None
        return (dx_b, dx_d), dy, (ds_b, ds_d)

    def _step_len(self, pt: _Point, d_blocks, d_diag, frac: float) -> float:
        alpha = np.inf
        for x, dx in zip(pt.blocks, d_blocks):
            alpha = min(alpha, _max_step(x, dx))
        if pt.diag.size:
            alpha = min(alpha, _max_step_diag(pt.diag, d_diag))
        return min(1.0, frac * alpha)

    def step(self) -> SolveStatus | None:
        """One predictor-corrector iteration; None while progressing."""
        rp, rd_b, rd_d, mu, _, _ = self.metrics()
        if not np.isfinite(mu) or mu > 1e32 or mu < 1e-18:
            # above: blown up; below: nothing left to gain and denormal
            # arithmetic would crawl
            return SolveStatus.NUMERICAL_FAILURE
        if float(np.linalg.norm(self.y)) > 1e14:
            return SolveStatus.NUMERICAL_FAILURE
        sinv = []
        for s in self.s.blocks:
            try:
                low = scipy.linalg.cholesky(s, lower=True, check_finite=False)
            except scipy.linalg.LinAlgError:
                return SolveStatus.NUMERICAL_FAILURE
            inv = scipy.linalg.cho_solve((low, True), np.eye(s.shape[0]), check_finite=False)
            sinv.append(_flush_tiny(0.5 * (inv + inv.T)))
        schur = self._schur(sinv)
        if not np.all(np.isfinite(schur)):
            return SolveStatus.NUMERICAL_FAILURE
        ridge = max(1.0, float(np.trace(schur)) / max(self.m, 1))
        schur_f = None
        for reg in (1e-13, 1e-9, 1e-6):
            try:
                reg_mat = schur + reg * ridge * np.eye(self.m)
                schur_f = (scipy.linalg.cho_factor(reg_mat), reg_mat)
                break
            except scipy.linalg.LinAlgError:
                continue
        if schur_f is None:
            return SolveStatus.NUMERICAL_FAILURE

        r3_b = [-(x @ s) for x, s in zip(self.x.blocks, self.s.blocks)]
        r3_d = -(self.x.diag * self.s.diag)
        aff = self._direction(schur_f, sinv, rp, rd_b, rd_d, r3_b, r3_d)
        if aff is None:
            return SolveStatus.NUMERICAL_FAILURE
        dxa, _, dsa = aff
        if self.opts.sigma is None:
            ap = self._step_len(self.x, dxa[0], dxa[1], 1.0)
            ad = self._step_len(self.s, dsa[0], dsa[1], 1.0)
            mu_aff = _inner(
                [x + ap * d for x, d in zip(self.x.blocks, dxa[0])],
                self.x.diag + ap * dxa[1],
                [s + ad * d for s, d in zip(self.s.blocks, dsa[0])],
                self.s.diag + ad * dsa[1],
            ) / self.nu
            sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-10, 0.99))
        else:
            sigma = float(self.opts.sigma)
        r3_b = [
            sigma * mu * np.eye(x.shape[0]) - x @ s - dx @ ds
            for x, s, dx, ds in zip(self.x.blocks, self.s.blocks, dxa[0], dsa[0])
        ]
        r3_d = sigma * mu - self.x.diag * self.s.diag - dxa[1] * dsa[1]
        out = self._direction(schur_f, sinv, rp, rd_b, rd_d, r3_b, r3_d)
        if out is None:
            return SolveStatus.NUMERICAL_FAILURE
        dx, dy, ds = out
        ap = self._step_len(self.x, dx[0], dx[1], self.opts.step_frac)
        ad = self._step_len(self.s, ds[0], ds[1], self.opts.step_frac)
        if min(ap, ad) < 1e-11:
            return SolveStatus.NUMERICAL_FAILURE
        for k in range(len(self.x.blocks)):
            xk = self.x.blocks[k] + ap * dx[0][k]
            sk = self.s.blocks[k] + ad * ds[0][k]
            self.x.blocks[k] = _flush_tiny(0.5 * (xk + xk.T))
            self.s.blocks[k] = _flush_tiny(0.5 * (sk + sk.T))
        self.x.diag = self.x.diag + ap * dx[1]
        self.s.diag = self.s.diag + ad * ds[1]
        self.y = self.y + ad * dy
        return None

    def run(self) -> SolveStatus:
        for it in range(self.opts.max_iters):
            self.iterations = it + 1
            _, _, _, mu, pres, dres = self.metrics()
            if self.converged(mu, pres, dres):
                return SolveStatus.OPTIMAL
            self.update_hints()
            if self.hint_infeasible:
                return SolveStatus.INFEASIBLE
            if self.hint_unbounded:
                return SolveStatus.UNBOUNDED
            status = self.step()
            if status is not None:
                return status
        return SolveStatus.NUMERICAL_FAILURE


# ---------------------------------------------------------------------------
# phase 1 feasibility:  min s  s.t.  A(X) + s*r0 = b,  cones

def phase1(std: _Std, opts: SolverOptions) -> tuple[Feasibility, "_IPM"]:
    aug = _Std()
    aug.block_dims = list(std.block_dims)
    aug.diag_dim = std.diag_dim + 1
    x0 = _Point(std.block_dims, std.diag_dim)
    base = np.zeros(std.b.shape[0])
    if std.diag_dim:
        base += std.a_diag @ x0.diag
    for ab, x in zip(std.a_blocks, x0.blocks):
        base += np.einsum("iab,ab->i", ab, x)
    r0 = std.b - base
    aug.a_blocks = [ab for ab in std.a_blocks]
    aug.a_diag = np.hstack([std.a_diag, r0[:, None]]) if std.diag_dim else r0[:, None]
    aug.b = std.b.copy()
    aug.c_blocks = [np.zeros((d, d)) for d in std.block_dims]
    aug.c_diag = np.zeros(aug.diag_dim)
    aug.c_diag[-1] = 1.0
    r0norm = 1.0 + float(np.linalg.norm(r0))

    ipm = _IPM(aug, opts)
    feas_eps = opts.feas_eps
    bnorm = 1.0 + float(np.linalg.norm(std.b))

    def original_violation() -> float:
        """||A(X) - b|| of the de-augmented point, relative."""
        rp = aug.b - ipm.apply_a(ipm.x.blocks, ipm.x.diag)
        s0 = float(ipm.x.diag[-1])
        return float(np.linalg.norm(rp + s0 * r0)) / bnorm

    best_viol = np.inf
    stall = 0
    for it in range(opts.max_iters):
        ipm.iterations = it + 1
        _, _, _, mu, pres, dres = ipm.metrics()
        lower = float(np.dot(aug.b, ipm.y))
        viol = original_violation()
        if viol <= 0.1 * feas_eps:
            return Feasibility.FEASIBLE, ipm
        if dres <= 1e-9 and lower > 20 * feas_eps:
            return Feasibility.INFEASIBLE, ipm
        if viol < best_viol * (1.0 - 1e-3):
            best_viol, stall = viol, 0
        else:
            stall += 1
        if stall >= 12 or ipm.converged(mu, pres, dres):
            break
        status = ipm.step()
        if status is not None:
            break
    viol = original_violation()
    lower = float(np.dot(aug.b, ipm.y))
    _, _, _, _, _, dres = ipm.metrics()
    if viol <= feas_eps:
        return Feasibility.FEASIBLE, ipm
    if dres <= 1e-7 and lower > 20 * feas_eps:
        return Feasibility.INFEASIBLE, ipm
    return Feasibility.UNKNOWN, ipm
