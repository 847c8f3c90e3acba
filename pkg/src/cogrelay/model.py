"""Problem data, channel generation, and exact physical-quantity evaluators.

Units: every power and noise variance is in milliwatts internally; the CLI
converts dBm at its boundary.  Rates are bps/Hz with R = log2(1 + SINR);
the PU demand maps through gamma_p_min = 2**rate - 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, OutOfUncertaintyBall


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True)
class SystemParams:
    """Scalar constants of the network (powers in mW)."""

    m_antennas: int = 4
    p_pt: float = 1000.0
    p_pr: float = 1000.0
    p_sr: float = 1000.0
    sigma_r2: float = 1.0
    sigma_c2: float = 1.0
    sigma_p2: float = 1.0
    sigma_s2: float = 1.0
    xi: float = 0.5
    r_p_min: float = 2.5

    def __post_init__(self):
        if self.m_antennas < 1:
            raise ValueError("antenna count must be >= 1")
        if min(self.p_pt, self.p_pr, self.p_sr) < 0:
            raise ValueError("powers must be nonnegative")
        if min(self.sigma_r2, self.sigma_c2, self.sigma_p2, self.sigma_s2) <= 0:
            raise ValueError("noise variances must be positive")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError("energy conversion efficiency must be in (0, 1]")
        if self.r_p_min < 0:
            raise ValueError("PU rate demand must be nonnegative")

    @property
    def gamma_p_min(self) -> float:
        return 2.0**self.r_p_min - 1.0


@dataclass(frozen=True)
class ChannelSet:
    """Channel vectors source->relay (g), PU dest->relay, SU dest->relay."""

    g: np.ndarray
    h_p: np.ndarray
    h_s: np.ndarray

    def __post_init__(self):
        for name in ("g", "h_p", "h_s"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        if not (self.g.shape == self.h_p.shape == self.h_s.shape) or self.g.ndim != 1:
            raise DimensionMismatch("channel vectors must share one dimension")
        if not all(np.all(np.isfinite(v.view(float))) for v in (self.g, self.h_p, self.h_s)):
            raise ValueError("channel entries must be finite")

    @property
    def m(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class UncertainChannelSet:
    """Estimated destination channels inside norm balls; g known exactly."""

    g: np.ndarray
    h_p_est: np.ndarray
    h_s_est: np.ndarray
    eps_p: float
    eps_s: float

    def __post_init__(self):
        for name in ("g", "h_p_est", "h_s_est"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        if not (self.g.shape == self.h_p_est.shape == self.h_s_est.shape) or self.g.ndim != 1:
            raise DimensionMismatch("channel vectors must share one dimension")
        if self.eps_p < 0 or self.eps_s < 0:
            raise ValueError("uncertainty radii must be nonnegative")

    @property
    def m(self) -> int:
        return self.g.shape[0]

    def nominal(self) -> ChannelSet:
        return ChannelSet(g=self.g, h_p=self.h_p_est, h_s=self.h_s_est)

    def perturbed(self, dh_p: np.ndarray, dh_s: np.ndarray) -> ChannelSet:
        return ChannelSet(g=self.g, h_p=self.h_p_est + dh_p, h_s=self.h_s_est + dh_s)


@dataclass(frozen=True)
class Design:
    """Candidate solution: relay matrix, beamforming vector, power split."""

    f_mat: np.ndarray
    w: np.ndarray
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "f_mat", np.asarray(self.f_mat, dtype=complex))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=complex))
        if self.w.ndim != 1:
            raise DimensionMismatch("beamformer must be a vector")
        m = self.w.shape[0]
        if self.f_mat.shape != (m, m):
            raise DimensionMismatch("relay matrix must be M x M")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("power splitter must lie in [0, 1]")

    def scaled(self, f_scale: float = 1.0, w_scale: float = 1.0) -> "Design":
        return Design(f_mat=f_scale * self.f_mat, w=w_scale * self.w, rho=self.rho)


@dataclass(frozen=True)
class Geometry:
    """2-D node placement in meters; default layout of the reference studies."""

    pt: tuple[float, float] = (-5.0, 0.0)
    st: tuple[float, float] = (0.0, 0.0)
    pr: tuple[float, float] = (5.0, -1.0)
    sr: tuple[float, float] = (5.0, 1.0)
    pathloss_exponent: float = 2.0

    def __post_init__(self):
        nodes = [self.pt, self.st, self.pr, self.sr]
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if math.dist(nodes[i], nodes[j]) == 0.0:
                    raise ValueError("nodes must not be coincident")

    def link_variance(self, node: tuple[float, float]) -> float:
        return math.dist(node, self.st) ** (-self.pathloss_exponent)


DEFAULT_GEOMETRY = Geometry()
DEFAULT_PARAMS = SystemParams()


# ---------------------------------------------------------------------------
# exact evaluators

def harvested_power(p: SystemParams, c: ChannelSet, rho: float) -> float:
    """Energy scavenged by the relay during phase one (mW)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    total = (
        p.p_pt * float(np.vdot(c.g, c.g).real)
        + p.p_pr * float(np.vdot(c.h_p, c.h_p).real)
        + p.p_sr * float(np.vdot(c.h_s, c.h_s).real)
        + p.sigma_r2
    )
    return p.xi * (1.0 - rho) * total


def st_transmit_power(p: SystemParams, c: ChannelSet, d: Design) -> float:
    """Average relay transmit power of the phase-two signal (mW)."""
    f, w = d.f_mat, d.w
    fro2 = float(np.sum(np.abs(f) ** 2))
    return (
        d.rho
        * (
            p.p_pt * float(np.sum(np.abs(f @ c.g) ** 2))
            + p.p_pr * float(np.sum(np.abs(f @ c.h_p) ** 2))
            + p.p_sr * float(np.sum(np.abs(f @ c.h_s) ** 2))
            + p.sigma_r2 * fro2
        )
        + p.sigma_c2 * fro2
        + float(np.vdot(w, w).real)
    )


def sinr_pr(p: SystemParams, c: ChannelSet, d: Design) -> float:
    """Received SINR of the primary link."""
    f, w, rho = d.f_mat, d.w, d.rho
    hpf = c.h_p.conj() @ f
    num = rho * p.p_pt * abs(hpf @ c.g) ** 2
    den = (
        rho * p.p_sr * abs(hpf @ c.h_s) ** 2
        + (rho * p.sigma_r2 + p.sigma_c2) * float(np.sum(np.abs(hpf) ** 2))
        + abs(np.vdot(c.h_p, w)) ** 2
        + p.sigma_p2
    )
    return float(num / den)


def sinr_sr(p: SystemParams, c: ChannelSet, d: Design) -> float:
    """Received SINR of the secondary link."""
    f, w, rho = d.f_mat, d.w, d.rho
    hsf = c.h_s.conj() @ f
    num = abs(np.vdot(c.h_s, w)) ** 2
    den = (
        rho * (p.p_pt * abs(hsf @ c.g) ** 2 + p.p_pr * abs(hsf @ c.h_p) ** 2)
        + (rho * p.sigma_r2 + p.sigma_c2) * float(np.sum(np.abs(hsf) ** 2))
        + p.sigma_s2
    )
    return float(num / den)


def rate_from_sinr(gamma: float) -> float:
    return math.log2(1.0 + gamma)


def rates(p: SystemParams, c: ChannelSet, d: Design) -> tuple[float, float]:
    """(primary, secondary) rates in bps/Hz."""
    return rate_from_sinr(sinr_pr(p, c, d)), rate_from_sinr(sinr_sr(p, c, d))


def robust_sinrs(
    p: SystemParams,
    uc: UncertainChannelSet,
    d: Design,
    dh_p: np.ndarray,
    dh_s: np.ndarray,
    check_ball: bool = True,
) -> tuple[float, float]:
    """Exact perturbed SINRs with residual self-interference, no truncation.

    Under imperfect knowledge only the estimated part of each destination's
    self-interference can be cancelled, so a residual quadratic in the
    error vector survives in both denominators.
    """
    dh_p = np.asarray(dh_p, dtype=complex)
    dh_s = np.asarray(dh_s, dtype=complex)
    if check_ball:
        if np.linalg.norm(dh_p) > uc.eps_p * (1 + 1e-9) + 1e-15:
            raise OutOfUncertaintyBall("dh_p outside its ball")
        if np.linalg.norm(dh_s) > uc.eps_s * (1 + 1e-9) + 1e-15:
            raise OutOfUncertaintyBall("dh_s outside its ball")
    f, w, rho = d.f_mat, d.w, d.rho
    g = uc.g
    h_p = uc.h_p_est + dh_p
    h_s = uc.h_s_est + dh_s
    noise_eff = rho * p.sigma_r2 + p.sigma_c2

    hpf = h_p.conj() @ f
    mu1 = rho * p.p_pt * abs(hpf @ g) ** 2
    mu2 = rho * p.p_pr * abs(dh_p.conj() @ f @ h_p + uc.h_p_est.conj() @ f @ dh_p) ** 2
    mu3 = rho * p.p_sr * abs(hpf @ h_s) ** 2 + abs(np.vdot(h_p, w)) ** 2
    mu4 = noise_eff * float(np.sum(np.abs(hpf) ** 2)) + p.sigma_p2

    hsf = h_s.conj() @ f
    eta1 = abs(np.vdot(h_s, w)) ** 2
    eta2 = rho * p.p_sr * abs(dh_s.conj() @ f @ h_s + uc.h_s_est.conj() @ f @ dh_s) ** 2
    eta3 = rho * (p.p_pr * abs(hsf @ h_p) ** 2 + p.p_pt * abs(hsf @ g) ** 2)
    eta4 = noise_eff * float(np.sum(np.abs(hsf) ** 2)) + p.sigma_s2

    return float(mu1 / (mu2 + mu3 + mu4)), float(eta1 / (eta2 + eta3 + eta4))


def robust_power_margin(
    p: SystemParams,
    uc: UncertainChannelSet,
    d: Design,
    dh_p: np.ndarray,
    dh_s: np.ndarray,
) -> float:
    """Transmit power minus harvested power at a perturbed channel (<= 0 ok)."""
    c = uc.perturbed(np.asarray(dh_p, dtype=complex), np.asarray(dh_s, dtype=complex))
    return st_transmit_power(p, c, d) - harvested_power(p, c, d.rho)


# ---------------------------------------------------------------------------
# generators

def generate_channels(geom: Geometry, p: SystemParams, seed: int) -> ChannelSet:
    """I.i.d. Rayleigh-fading channels with pathloss-scaled entry variance.

    Draw order is fixed (g, then h_p, then h_s) so a seed pins the set.
    """
    rng = np.random.default_rng(seed)
    m = p.m_antennas

    def draw(node):
        var = geom.link_variance(node)
        re_im = rng.standard_normal((2, m))
        return math.sqrt(var / 2.0) * (re_im[0] + 1j * re_im[1])

    return ChannelSet(g=draw(geom.pt), h_p=draw(geom.pr), h_s=draw(geom.sr))


def sample_uncertainty(
    uc: UncertainChannelSet, seed: int, boundary: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (dh_p, dh_s) uniformly from the closed error balls.

    Direction uniform on the complex sphere; radius density proportional
    to r**(2M-1), i.e. uniform over the 2M-real-dimensional ball.  With
    boundary=True the radius sticks to the ball surface for adversarial
    stress tests.
    """
    rng = np.random.default_rng(seed)
    m = uc.m

    def draw(eps: float) -> np.ndarray:
        re_im = rng.standard_normal((2, m))
        u = rng.uniform()
        vec = re_im[0] + 1j * re_im[1]
        nrm = np.linalg.norm(vec)
        if nrm == 0.0 or eps == 0.0:
            return np.zeros(m, dtype=complex)
        radius = eps if boundary else eps * u ** (1.0 / (2 * m))
        return (radius / nrm) * vec

    return draw(uc.eps_p), draw(uc.eps_s)


# ---------------------------------------------------------------------------
# channel JSON interchange (arrays of [re, im] pairs)

def channels_to_json(c: ChannelSet) -> str:
    def enc(v):
        return [[float(z.real), float(z.imag)] for z in v]

    return json.dumps({"g": enc(c.g), "h_p": enc(c.h_p), "h_s": enc(c.h_s)}, indent=2)


def channels_from_json(text: str) -> ChannelSet:
    raw = json.loads(text)

    def dec(pairs):
        return np.array([complex(re, im) for re, im in pairs])

    return ChannelSet(g=dec(raw["g"]), h_p=dec(raw["h_p"]), h_s=dec(raw["h_s"]))


def save_channels(c: ChannelSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(channels_to_json(c))


def load_channels(path) -> ChannelSet:
    with open(path, "r", encoding="utf-8") as fh:
        return channels_from_json(fh.read())


def with_powers(p: SystemParams, **overrides) -> SystemParams:
    return replace(p, **overrides)
