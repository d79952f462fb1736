"""Sparse recovery at the base station: real decomposition of the complex
measurement, LASSO by cyclic coordinate descent, max-correlation support
detection, and least-squares refinement on the recovered support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import linalg as sla

from .feedback import FeedbackMatrix, Measurement

__all__ = [
    "ConvergenceError",
    "SingularSupportError",
    "RecoveryResult",
    "RecoveryConditions",
    "default_alpha",
    "decompose_real",
    "lasso_solve",
    "maxcorr_support",
    "correlation_active_set",
    "ls_refine",
    "recovery_conditions",
    "cs_success_probability",
]


class ConvergenceError(RuntimeError):
    """Coordinate descent hit its sweep cap without closing the duality gap."""


class SingularSupportError(np.linalg.LinAlgError):
    """The selected support columns are rank deficient."""


@dataclass
class RecoveryResult:
    """Recovered support, refined values in original units, and the per-entry
    refinement noise scales sigma_e, aligned with support_hat."""

    support_hat: np.ndarray
    v_ls: np.ndarray
    sigma_e: np.ndarray
    method: str = "ls"


@dataclass(frozen=True)
class RecoveryConditions:
    """Sufficient-condition bounds for support recovery from r shared channels.

    min_signal_bound: smallest active value the guarantee covers,
        8 * sigma * sqrt(ln(n) / r).
    sparsity_bound: admissible sparsity c0 * 2r / ln(n).
    success_prob: 1 - (2/n) * (1/sqrt(2 pi ln n) + s/n), the analytic support
        and sign recovery probability (lower-order corrections dropped).
    sigma_ceiling: largest noise level keeping unit entries recoverable,
        (1/8) * sqrt(r / ln(n)).
    """

    min_signal_bound: float
    sparsity_bound: float
    success_prob: float
    sigma_ceiling: float


def default_alpha(n: int) -> float:
    """Regularization weight 2 * sqrt(2 ln n)."""
    if n < 2:
        raise ValueError("need at least two users")
    return 2.0 * math.sqrt(2.0 * math.log(n))


def decompose_real(measurement: Measurement, matrix: FeedbackMatrix):
    """Stack the complex system into its real form.

    Returns (y_real, a_hat, scale): y_real = [Re(y); Im(y)], a_hat the
    column-normalized real matrix, and scale = sqrt(r) tracking the implied
    solution scale v_hat = scale * v.
    """
    y_real = np.concatenate([measurement.y.real, measurement.y.imag])
    return y_real, matrix.a_hat, math.sqrt(matrix.r)


@njit(cache=True)
def _cd_engine(a, y, v, resid, cn, thr, max_sweeps, tol):  # pragma: no cover
    m, n = a.shape
    sweeps = 0
    for it in range(max_sweeps):
        sweeps = it + 1
        maxupd = 0.0
        for j in range(n):
            cj = cn[j]
            if cj <= 0.0:
                continue
            old = v[j]
            rho = old * cj
            for i in range(m):
                rho += a[i, j] * resid[i]
            if rho > thr:
                new = (rho - thr) / cj
            elif rho < -thr:
                new = (rho + thr) / cj
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                for i in range(m):
                    resid[i] -= a[i, j] * d
                v[j] = new
                ad = abs(d)
                if ad > maxupd:
                    maxupd = ad
        if maxupd < tol:
            return sweeps, True
    return sweeps, False


def _duality_gap(a, y, v, lam, fidelity_half):
    resid = y - a @ v
    corr = a.T @ resid
    cmax = np.max(np.abs(corr))
    if fidelity_half:
        primal = 0.5 * resid @ resid + lam * np.sum(np.abs(v))
        scale = 1.0 if cmax <= lam or cmax == 0.0 else lam / cmax
        theta = scale * resid
        dual = theta @ y - 0.5 * theta @ theta
    else:
        primal = resid @ resid + lam * np.sum(np.abs(v))
        scale = 1.0 if 2.0 * cmax <= lam or cmax == 0.0 else lam / (2.0 * cmax)
        theta = 2.0 * scale * resid
        dual = theta @ y - 0.25 * theta @ theta
    return primal - dual


def lasso_solve(y: np.ndarray, a: np.ndarray, sigma: float,
                alpha: float | None = None, *, penalty_multiplier: float = 1.0,
                fidelity_half: bool = False, max_sweeps: int = 100_000,
                tol: float = 1e-10) -> np.ndarray:
    """Minimize ||y - A v||^2 + alpha*sigma*||v||_1 by cyclic coordinate descent.

    The fidelity term carries no 1/2 factor by default; fidelity_half=True
    switches to the (1/2)||.||^2 convention, which doubles the effective
    soft threshold. alpha defaults to 2*sqrt(2 ln n). sigma is the noise
    standard deviation of the system being solved (after real decomposition
    that is the per-component value). sigma = 0 reduces to unpenalized least
    squares. Raises ConvergenceError when the sweep cap is reached with the
    duality gap still above 1e-8 * (1 + ||y||^2).
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    a = np.asfortranarray(a, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    m, n = a.shape
    if y.shape != (m,):
        raise ValueError("y length must match the row count of A")
    if alpha is None:
        alpha = default_alpha(n)
    lam = penalty_multiplier * alpha * sigma
    thr = lam if fidelity_half else 0.5 * lam

    v = np.zeros(n)
    resid = y.copy()
    cn = np.sum(a * a, axis=0)
    gap_tol = 1e-8 * (1.0 + y @ y)

    budget = max_sweeps
    cur_tol = tol
    while True:
        used, converged = _cd_engine(a, y, v, resid, cn, thr, budget, cur_tol)
        budget -= used
        if lam == 0.0:
            if converged:
                return v
            raise ConvergenceError("coordinate descent did not converge (sigma = 0)")
        gap = _duality_gap(a, y, v, lam, fidelity_half)
        if gap <= gap_tol:
            return v
        if budget <= 0:
            raise ConvergenceError(
                f"duality gap {gap:.3e} above tolerance {gap_tol:.3e} "
                f"after {max_sweeps} sweeps")
        cur_tol *= 0.1


def maxcorr_support(y: np.ndarray, a: np.ndarray, s_max: int) -> np.ndarray:
    """Indices of the s_max largest |A^T y|, descending, ties to the lowest index."""
    n = a.shape[1]
    if not 1 <= s_max <= n:
        raise ValueError("need 1 <= s_max <= n")
    corr = np.abs(a.T @ y)
    order = np.argsort(-corr, kind="stable")
    return order[:s_max]


def correlation_active_set(y: np.ndarray, a: np.ndarray, scale: float,
                           fraction: float = 0.5) -> np.ndarray:
    """Indices whose correlation clears a calibrated activity threshold.

    A unit entry of the original vector produces an idealized correlation of
    `scale` (= sqrt(r)) against its own normalized column, so activity is
    declared above fraction * scale. Used for the on/off entries of digital
    feedback where the support size is not known in advance.
    """
    corr = np.abs(a.T @ y)
    return np.flatnonzero(corr > fraction * scale)


def ls_refine(y: np.ndarray, a: np.ndarray, support: np.ndarray,
              sigma: float = 0.0, scale: float = 1.0,
              method: str = "ls") -> RecoveryResult:
    """Least squares on the support columns, mapped back to original units.

    Solves min ||y - A_S v_hat|| over the support, returns v_ls = v_hat/scale
    and sigma_e[j] = (sigma/sqrt(2)) * sqrt(diag((A_S^T A_S)^{-1})_j) / scale,
    the per-entry standard deviation of the refinement error when the complex
    noise has standard deviation sigma (sigma^2/2 per real component).
    """
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return RecoveryResult(support_hat=support, v_ls=np.empty(0),
                              sigma_e=np.empty(0), method=method)
    if support.size > y.size:
        raise ValueError("support larger than the measurement dimension")
    a_s = a[:, support]
    gram = a_s.T @ a_s
    try:
        cho = sla.cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSupportError(str(exc)) from exc
    except sla.LinAlgError as exc:
        raise SingularSupportError(str(exc)) from exc
    v_hat = sla.cho_solve(cho, a_s.T @ y)
    inv_diag = np.diag(sla.cho_solve(cho, np.eye(support.size)))
    sigma_e = (sigma / math.sqrt(2.0)) * np.sqrt(np.maximum(inv_diag, 0.0)) / scale
    return RecoveryResult(support_hat=support, v_ls=v_hat / scale,
                          sigma_e=sigma_e, method=method)


def cs_success_probability(n: int, s: int, include_s_term: bool = True) -> float:
    """Analytic support-and-sign recovery probability for the tuned LASSO.

    1 - (2/n) * (1/sqrt(2 pi ln n) + s/n); include_s_term=False drops the s/n
    term, the variant some throughput expressions use.
    """
    if n < 2:
        raise ValueError("need at least two users")
    term = 1.0 / math.sqrt(2.0 * math.pi * math.log(n))
    if include_s_term:
        term += s / n
    return 1.0 - (2.0 / n) * term


def recovery_conditions(n: int, r: int, s: int, sigma: float,
                        c0: float = 1.0) -> RecoveryConditions:
    """Bounds under which the tuned LASSO recovers support and signs.

    c0 is the unspecified constant of the sparsity condition s <= c0*2r/ln(n);
    it is the reciprocal of the calibrated channel-budget constant c and is
    estimated empirically (see harness.calibrate_c).
    """
    if n < 2 or r < 1 or s < 0:
        raise ValueError("need n >= 2, r >= 1, s >= 0")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    ln_n = math.log(n)
    return RecoveryConditions(
        min_signal_bound=8.0 * sigma * math.sqrt(ln_n / r),
        sparsity_bound=c0 * 2.0 * r / ln_n,
        success_prob=cs_success_probability(n, s),
        sigma_ceiling=0.125 * math.sqrt(r / ln_n),
    )
