"""Distribution of the least-squares refinement error through the smallest
eigenvalue of the support Gram matrix.

The real-stacked measurement block A_s is 2r x s with i.i.d. N(0, 1/2)
entries (the real decomposition of CN(0,1) columns), so A_s^T A_s is a real
Wishart matrix with 2r degrees of freedom and scale 1/2. Everything here
evaluates or estimates E[1/(1 + rho * lambda_min(A_s^T A_s))], the factor
bounding the refined error variance relative to a dedicated channel.

Closed forms are stated in the entry-variance-1/2 convention so they agree
with the Monte-Carlo sampler; literal=True evaluates the unit-variance forms
as printed elsewhere, which sit at twice the effective SNR.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy import integrate
from scipy import special

__all__ = [
    "WishartSpec",
    "EcmReport",
    "DivergenceError",
    "mc_min_eig_expectation",
    "closed_form_s1",
    "closed_form_s2",
    "asymptotic_beta",
    "dedicated_ecm",
    "ecm_report",
]

log = logging.getLogger(__name__)


class DivergenceError(ArithmeticError):
    """A literal-form integral diverges as printed."""


@dataclass(frozen=True)
class WishartSpec:
    """Support size s, channel count r, and feedback SNR for the Gram ensemble."""

    s: int
    r: int
    rho_fb: float

    def __post_init__(self):
        if self.s < 1 or self.r < 1:
            raise ValueError("need s >= 1 and r >= 1")
        if self.s > 2 * self.r:
            raise ValueError("Gram matrix needs s <= 2r")
        if self.rho_fb <= 0:
            raise ValueError("rho_fb must be positive")

    @property
    def beta_ar(self) -> float:
        """Aspect ratio s / (2r) of the real-stacked block."""
        return self.s / (2.0 * self.r)


def _lambda_min_batch(b: np.ndarray) -> np.ndarray:
    """Smallest Gram eigenvalue for a (batch, m, s) stack of blocks."""
    g = np.matmul(b.swapaxes(1, 2), b)
    s = g.shape[-1]
    if s == 1:
        return g[:, 0, 0]
    if s == 2:
        half_tr = 0.5 * (g[:, 0, 0] + g[:, 1, 1])
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
        disc = np.maximum(half_tr * half_tr - det, 0.0)
        return half_tr - np.sqrt(disc)
    return np.linalg.eigvalsh(g)[:, 0]


def mc_min_eig_expectation(spec: WishartSpec, trials: int,
                           rng: np.random.Generator,
                           block_elems: int = 2 ** 24) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of 1/(1 + rho * lambda_min).

    Samples A_s as 2r x s real Gaussian with per-entry variance 1/2 and takes
    lambda_min of A_s^T A_s. Processed in blocks to bound memory.
    """
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    m = 2 * spec.r
    per = max(1, block_elems // (m * spec.s))
    vals = np.empty(trials)
    done = 0
    scale = 1.0 / math.sqrt(2.0)
    while done < trials:
        b = min(per, trials - done)
        blk = rng.standard_normal((b, m, spec.s)) * scale
        lam = _lambda_min_batch(blk)
        vals[done:done + b] = 1.0 / (1.0 + spec.rho_fb * lam)
        done += b
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials))


def closed_form_s1(r: int, rho_fb: float, *, literal: bool = False) -> float:
    """E[1/(1 + rho * lambda)] for s = 1, where lambda ~ Gamma(r, 1).

    Equals rho^{-r} e^{1/rho} Gamma(1-r, 1/rho) with the upper incomplete
    gamma continued to nonpositive order. literal=True evaluates the
    unit-entry-variance form rho^{-r} e^{1/(2 rho)} 2^{-r} Gamma(1-r, 1/(2 rho)),
    which overstates the effective SNR by 2x relative to the sampler.
    """
    if r < 1:
        raise ValueError("need r >= 1")
    if rho_fb <= 0:
        raise ValueError("rho_fb must be positive")
    with mp.workdps(60):
        rho = mp.mpf(rho_fb)
        if literal:
            x = 1 / (2 * rho)
            val = rho ** (-r) * mp.e ** x * mp.mpf(2) ** (-r) * mp.gammainc(1 - r, x)
        else:
            x = 1 / rho
            val = rho ** (-r) * mp.e ** x * mp.gammainc(1 - r, x)
        return float(val)


def _s2_log_density(lam: np.ndarray, r: int) -> np.ndarray:
    """Log of the unnormalized lambda_min density for s = 2.

    The ordered-eigenvalue density of the 2x2 Gram is proportional to
    (l1*l2)^(r-3/2) (l1-l2) exp(-l1-l2); integrating out the larger eigenvalue
    gives lambda^(2r-1) exp(-2 lambda) U(2, r+3/2, lambda) with Tricomi's U.
    """
    with np.errstate(over="ignore"):
        u = special.hyperu(2.0, r + 1.5, lam)
    return (2 * r - 1) * np.log(lam) - 2.0 * lam + np.log(u)


def closed_form_s2(r: int, rho_fb: float, *, literal: bool = False) -> float:
    """E[1/(1 + rho * lambda_min)] for s = 2 by quadrature of the exact density.

    literal=True instead attempts the printed three-integral unit-variance
    expression, whose first integrand carries e^{+lambda}; the divergence is
    detected and reported rather than silently mis-evaluated.
    """
    if r < 2:
        raise ValueError("need r >= 2 for a 2x2 Gram")
    if rho_fb <= 0:
        raise ValueError("rho_fb must be positive")
    if literal:
        _literal_s2_probe(r, rho_fb)
        raise DivergenceError(
            "the printed s=2 expression diverges: its first integrand grows "
            "like lambda^(2r-2) e^{+lambda}")

    grid = np.geomspace(1e-6, 40.0 * r, 512)
    ref = float(np.max(_s2_log_density(grid, r)))

    def density(lam):
        return math.exp(_s2_log_density(np.asarray(lam), r) - ref)

    peak = max(0.5 * (2 * r - 1), 1e-3)
    cut = 10.0 * peak + 20.0

    def piecewise(f):
        lo, _ = integrate.quad(f, 1e-12, cut, points=[peak], limit=200)
        hi, _ = integrate.quad(f, cut, np.inf, limit=200)
        return lo + hi

    z = piecewise(density)
    num = piecewise(lambda lam: density(lam) / (1.0 + rho_fb * lam))
    return num / z


def _literal_s2_probe(r: int, rho_fb: float) -> None:
    """Confirm the printed first integral blows up before reporting it."""
    lam = np.linspace(1.0, 60.0 + 4.0 * r, 8)
    first = (2 * r - 2) * np.log(lam) + lam - np.log1p(rho_fb * lam)
    if not np.all(np.diff(first) > 0):  # pragma: no cover
        log.warning("literal s=2 integrand did not grow on the probe grid")


def asymptotic_beta(r: int, beta_ar: float, rho_fb: float, *,
                    literal: bool = False) -> float:
    """Large-system value 1/(1 + rho * r * (1 - sqrt(beta))^2).

    beta_ar = s/(2r) is held fixed as r grows; the hard edge of the spectrum
    of the variance-1/2 Gram sits at r (1 - sqrt(beta))^2. literal=True keeps
    the unit-variance edge 2 r (1 - sqrt(beta))^2 as printed.
    """
    if r < 1:
        raise ValueError("need r >= 1")
    if not 0.0 <= beta_ar <= 1.0:
        raise ValueError("beta_ar must lie in [0, 1]")
    if rho_fb <= 0:
        raise ValueError("rho_fb must be positive")
    edge = r * (1.0 - math.sqrt(beta_ar)) ** 2
    if literal:
        edge *= 2.0
    return 1.0 / (1.0 + rho_fb * edge)


def dedicated_ecm(sigma_v: float, rho_fb: float) -> float:
    """Per-user error variance of a dedicated feedback channel,
    sigma_v^2 / (1 + rho). rho = 0 leaves the full prior variance."""
    if sigma_v < 0:
        raise ValueError("sigma_v must be nonnegative")
    if rho_fb < 0:
        raise ValueError("rho_fb must be nonnegative")
    return sigma_v ** 2 / (1.0 + rho_fb)


@dataclass
class EcmReport:
    """Shared-channel error-variance bound next to the dedicated value."""

    shared_bound: float
    dedicated_value: float
    mc_estimate: float
    mc_stderr: float


def ecm_report(spec: WishartSpec, sigma_v: float, trials: int,
               rng: np.random.Generator) -> EcmReport:
    """Monte-Carlo bound sigma_v^2 * E[1/(1 + rho lambda_min)] on the largest
    diagonal entry of the shared-channel error covariance, with the dedicated
    reference value."""
    mean, se = mc_min_eig_expectation(spec, trials, rng)
    sv2 = sigma_v ** 2
    return EcmReport(shared_bound=sv2 * mean,
                     dedicated_value=dedicated_ecm(sigma_v, spec.rho_fb),
                     mc_estimate=mean, mc_stderr=se)
