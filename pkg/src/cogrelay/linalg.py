"""Complex dense linear-algebra primitives used by every solver module.

Matrices are numpy complex arrays; "vec" always stacks columns
(Fortran order), which is what every vectorization identity here assumes.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    EmptyNullSpace,
    NotPositiveDefinite,
    RankDeficient,
)

# Central tolerance table.  Everything numerical in this module keys off
# these four values.
FACTOR_TOL = 1e-10   # orthonormality / nulling residuals of factorizations
RECON_TOL = 1e-9     # eigen/QR reconstruction residuals
RANK_CUTOFF = 1e-12  # relative cutoff below which a pivot counts as zero
PD_CUTOFF = 1e-12    # smallest eigenvalue accepted as positive definite


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape {v.size} entries to {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def herm(m: np.ndarray) -> np.ndarray:
    """Hermitian part (m + m^H)/2."""
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: np.ndarray, tol: float = FACTOR_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return float(np.abs(m - m.conj().T).max(initial=0.0)) <= tol * scale


def qr_thin(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with real nonnegative R diagonal.

    The sign/phase convention makes the factorization deterministic:
    M = Q R, Q^H Q = I, R upper triangular with R[i, i] >= 0 real.
    Raises RankDeficient when the smallest diagonal of R falls below
    RANK_CUTOFF times the largest.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionMismatch(f"qr_thin needs rows >= cols, got {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    d = np.diagonal(r).copy()
    mags = np.abs(d)
    if mags.min(initial=np.inf) < RANK_CUTOFF * max(mags.max(initial=0.0), RANK_CUTOFF):
        raise RankDeficient(f"R diagonal magnitudes {mags} below rank cutoff")
    phases = d / mags
    q = q * phases[np.newaxis, :]
    r = r * phases.conj()[:, np.newaxis]
    return q, r


def herm_eig(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized as (H + H^H)/2 before factoring so that
    round-off off the Hermitian manifold is absorbed.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"herm_eig needs a square matrix, got {h.shape}")
    vals, vecs = scipy.linalg.eigh(herm(h))
    return vals, vecs


def generalized_eig_max(cm: np.ndarray, dm: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest generalized Rayleigh quotient of the pair (cm, dm).

    Returns (lambda_max, v) with lambda_max = max_a (a^H cm a)/(a^H dm a)
    and ||v|| = 1 attaining it.  Computed by Cholesky whitening
    dm = L L^H followed by a Hermitian eigensolve of L^-1 cm L^-H.
    """
    cm = herm(np.asarray(cm, dtype=complex))
    dm = herm(np.asarray(dm, dtype=complex))
    if cm.shape != dm.shape or cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise DimensionMismatch(f"incompatible pair {cm.shape} vs {dm.shape}")
    scale = max(float(np.abs(dm).max(initial=0.0)), 1e-300)
    try:
        low = scipy.linalg.cholesky(dm, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("second matrix of the pair is not PD") from exc
    if float(np.abs(np.diagonal(low)).min()) ** 2 <= PD_CUTOFF * scale:
        raise NotPositiveDefinite("second matrix of the pair is numerically singular")
    w = scipy.linalg.solve_triangular(low, cm, lower=True)
    w = scipy.linalg.solve_triangular(low, w.conj().T, lower=True).conj().T
    vals, vecs = scipy.linalg.eigh(herm(w))
    u = vecs[:, -1]
    v = scipy.linalg.solve_triangular(low.conj().T, u, lower=False)
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    phase = v[k] / abs(v[k])
    return float(vals[-1]), v * phase.conj()


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (thin wrapper so callers share one entry point)."""
    return np.kron(np.asarray(a), np.asarray(b))


def commutation_matrix(m: int, n: int) -> np.ndarray:
    """Permutation P with P vec(F) = vec(F^T) for every m x n matrix F."""
    if m < 1 or n < 1:
        raise DimensionMismatch("commutation_matrix needs m, n >= 1")
    p = np.zeros((m * n, m * n))
    cols = np.arange(m * n)
    i, j = cols % m, cols // m
    p[j + i * n, cols] = 1.0
    return p


def block_ones_mask(m: int) -> np.ndarray:
    """The m^2 x m^2 mask I_m (x) J_m selecting diagonal blocks.

    For f = vec(F) it satisfies
    (1^T (x) I) (mask . f f^H) (1 (x) I) = F F^H,
    the masked-Gram identity the robust solver relies on.
    """
    if m < 1:
        raise DimensionMismatch("block_ones_mask needs m >= 1")
    return np.kron(np.eye(m), np.ones((m, m)))


def null_space_basis(m: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the right null space, via SVD.

    Columns of the result V satisfy m @ V = 0 and V^H V = I.  Raises
    EmptyNullSpace when the null space is trivial (e.g. full-rank square
    input).
    """
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    basis = scipy.linalg.null_space(m, rcond=RANK_CUTOFF * 10)
    if basis.shape[1] == 0:
        raise EmptyNullSpace(f"matrix of shape {m.shape} has no null space")
    return basis


def dominant_rank1(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Dominant-eigenpair factor of a Hermitian PSD matrix.

    Returns (v, ratio) where v = sqrt(lam_max) * unit eigenvector with a
    deterministic phase (largest-magnitude entry real positive) and ratio
    is lam_2nd / lam_max, the rank-one quality measure.
    """
    vals, vecs = herm_eig(x)
    lam = float(max(vals[-1], 0.0))
    u = vecs[:, -1]
    k = int(np.argmax(np.abs(u)))
    if abs(u[k]) > 0:
        u = u * (u[k].conj() / abs(u[k]))
    second = float(max(vals[-2], 0.0)) if len(vals) > 1 else 0.0
    ratio = second / lam if lam > 0 else 0.0
    return np.sqrt(lam) * u, ratio
