"""Downlink model: Rayleigh channels, Haar random beams, per-user SINRs.

The SINR of user i on beam m under random beamforming with p simultaneous
beams at per-beam SNR rho is

    SINR_{i,m} = |h_i phi_m|^2 / (1/rho + sum_{k != m} |h_i phi_k|^2)

whose marginal CCDF is exp(-z/rho) / (1+z)^(p-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemParams",
    "DownlinkRealization",
    "SinrTable",
    "generate_downlink",
    "compute_sinr",
    "sinr_ccdf",
    "sinr_cdf",
    "sinr_pdf",
    "sinr_ccdf_inverse",
]


@dataclass(frozen=True)
class SystemParams:
    """Cell configuration: n users, p transmit beams, per-user SNR rho (linear)."""

    n: int
    p: int
    rho: float

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need at least one transmit beam")
        if self.n < self.p:
            raise ValueError("need at least as many users as beams (n >= p)")
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    @property
    def total_power(self) -> float:
        """Total transmit power when rho is interpreted per user, P = p * rho."""
        return self.p * self.rho


@dataclass
class DownlinkRealization:
    """One channel draw: h is (n, p) complex, beams is (p, p) unitary (columns)."""

    h: np.ndarray
    beams: np.ndarray


@dataclass
class SinrTable:
    """Per-user, per-beam SINRs plus each user's best beam index."""

    sinr: np.ndarray        # (n, p)
    best_beam: np.ndarray   # (n,), ties resolved to the lowest index


def generate_downlink(params: SystemParams, rng: np.random.Generator) -> DownlinkRealization:
    """Draw an i.i.d. CN(0,1) channel matrix and a Haar-distributed beam set.

    Beams come from the QR decomposition of a complex Gaussian matrix with the
    phases of diag(R) absorbed into Q so the factorization is unique and the
    columns are Haar distributed.
    """
    n, p = params.n, params.p
    h = (rng.standard_normal((n, p)) + 1j * rng.standard_normal((n, p))) / np.sqrt(2.0)
    z = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return DownlinkRealization(h=h, beams=q)


def compute_sinr(real: DownlinkRealization, params: SystemParams) -> SinrTable:
    """SINR of every user on every beam for one realization."""
    g = real.h @ real.beams
    pw = np.abs(g) ** 2
    tot = pw.sum(axis=1, keepdims=True)
    interf = tot - pw
    sinr = pw / (1.0 / params.rho + interf)
    best = np.argmax(sinr, axis=1)
    return SinrTable(sinr=sinr, best_beam=best)


def sinr_ccdf(zeta, params: SystemParams):
    """P[SINR > zeta] for the marginal per-beam SINR. Accepts scalars or arrays."""
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise ValueError("zeta must be nonnegative")
    out = np.exp(-z / params.rho) / (1.0 + z) ** (params.p - 1)
    return float(out) if np.isscalar(zeta) or out.ndim == 0 else out


def sinr_cdf(zeta, params: SystemParams):
    """P[SINR <= zeta], the complement of sinr_ccdf."""
    return 1.0 - sinr_ccdf(zeta, params)


def sinr_pdf(zeta, params: SystemParams):
    """Density of the marginal SINR, -d/dz of the CCDF."""
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise ValueError("zeta must be nonnegative")
    haz = 1.0 / params.rho + (params.p - 1) / (1.0 + z)
    out = sinr_ccdf(z, params) * haz
    return float(out) if np.isscalar(zeta) or out.ndim == 0 else out


def sinr_ccdf_inverse(u: float, params: SystemParams, tol: float = 1e-10,
                      max_iter: int = 200) -> float:
    """Solve sinr_ccdf(zeta) = u by bisection with a doubling upper bracket.

    u must lie in (0, 1]; u = 1 maps to zeta = 0.
    """
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    if u == 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while sinr_ccdf(hi, params) > u:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("bracket expansion failed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = sinr_ccdf(mid, params)
        if abs(val - u) <= tol:
            return mid
        if val > u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
