"""User selection, rate back-off against refinement noise, and the analytic
throughput expressions the simulator is checked against.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import SystemParams, SinrTable, sinr_cdf
from .feedback import ThresholdSet
from .recovery import RecoveryResult, cs_success_probability

__all__ = [
    "BackoffPolicy",
    "ThroughputRecord",
    "qfunc",
    "extreme_value_beta",
    "extreme_value_rate",
    "event_b_probability",
    "analog_rate_analytic",
    "optimal_backoff",
    "make_backoff_policy",
    "effective_rate_analytic",
    "digital_selection_expectation",
    "digital_rate_analytic",
    "select_and_score_analog",
    "select_and_score_digital",
]

log = logging.getLogger(__name__)


def qfunc(x: float) -> float:
    """Standard normal tail probability Q(x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class BackoffPolicy:
    """Back-off delta applied to a refined value before committing a rate.

    eta = 1 - Q(delta / sigma_e) is the no-outage probability of the committed
    rate; it sits in [1/2, 1] because delta is never negative.
    """

    delta: float
    sigma_e: float
    beta_t: float
    eta: float


@dataclass
class ThroughputRecord:
    """Empirical rate with its analytic companions for one operating point."""

    rate_emp: float
    rate_se: float
    rate_R: float
    rate_Ra: float = 0.0
    rate_Reff: float = 0.0
    rate_Rd: float = 0.0


def extreme_value_beta(n: int, p: int, rho: float) -> float:
    """Concentration point of 1 + max-SINR: 1 + rho*ln(n) - rho*(p-2)*ln(ln(n))."""
    if n < 3:
        raise ValueError("extreme-value expressions need n >= 3")
    if p < 1 or rho <= 0:
        raise ValueError("need p >= 1 and rho > 0")
    return 1.0 + rho * math.log(n) - rho * (p - 2) * math.log(math.log(n))


def extreme_value_rate(n: int, p: int, rho: float) -> float:
    """Asymptotic full-feedback sum rate R = p * log2(beta_t)."""
    beta_t = extreme_value_beta(n, p, rho)
    if beta_t <= 0:
        raise ValueError("beta_t is nonpositive; the asymptotic form does not apply")
    return p * math.log2(beta_t)


def event_b_probability(n: int, s: int, k: int = 1) -> float:
    """P(at least one user clears the lowest threshold) = 1 - (1 - s*k/n)^n."""
    if not 0 <= s * k <= n:
        raise ValueError("need 0 <= s*k <= n")
    return 1.0 - (1.0 - s * k / n) ** n


def analog_rate_analytic(n: int, p: int, rho: float, s: int,
                         include_s_term: bool = True) -> float:
    """Analog shared-feedback rate: R scaled by the recovery and occupancy
    probabilities, R_a = p log2(beta_t) P(A) P(B)."""
    pa = cs_success_probability(n, s, include_s_term)
    pb = event_b_probability(n, s)
    return extreme_value_rate(n, p, rho) * pa * pb


def optimal_backoff(beta_t: float, sigma_e: float, tol: float = 1e-9,
                    max_iter: int = 200) -> float:
    """Back-off maximizing (1 - Q(delta/sigma_e)) * log2(beta_t - delta).

    Solves the stationarity condition
        Q(d/se) + ((beta_t - d)/(sqrt(2 pi) se)) exp(-d^2/(2 se^2)) ln(beta_t - d) = 1
    by bisection on [0, beta_t - 1]. sigma_e = 0 returns 0. When the equation
    has no sign change the maximum sits at the boundary delta = 0.
    """
    if beta_t <= 1.0:
        raise ValueError("need beta_t > 1")
    if sigma_e < 0:
        raise ValueError("sigma_e must be nonnegative")
    if sigma_e == 0.0:
        return 0.0

    def g(d: float) -> float:
        z = d / sigma_e
        spread = (beta_t - d) / (math.sqrt(2.0 * math.pi) * sigma_e)
        return qfunc(z) + spread * math.exp(-0.5 * z * z) * math.log(beta_t - d) - 1.0

    lo, hi = 0.0, beta_t - 1.0
    if g(lo) <= 0.0:
        log.debug("backoff stationarity has no root; boundary delta = 0")
        return 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def make_backoff_policy(beta_t: float, sigma_e: float) -> BackoffPolicy:
    delta = optimal_backoff(beta_t, sigma_e)
    eta = 1.0 if sigma_e == 0.0 else 1.0 - qfunc(delta / sigma_e)
    return BackoffPolicy(delta=delta, sigma_e=sigma_e, beta_t=beta_t, eta=eta)


def effective_rate_analytic(n: int, p: int, rho: float, s: int, sigma_e: float,
                            include_s_term: bool = True) -> float:
    """Analog rate after the optimal back-off against refinement noise:
    R_eff = p P(A) P(B) (1 - Q(delta*/sigma_e)) log2(beta_t - delta*)."""
    if sigma_e == 0.0:
        return analog_rate_analytic(n, p, rho, s, include_s_term)
    beta_t = extreme_value_beta(n, p, rho)
    policy = make_backoff_policy(beta_t, sigma_e)
    headroom = beta_t - policy.delta
    if headroom <= 1.0:
        log.warning("back-off consumed the whole rate margin (beta_t - delta <= 1)")
        return 0.0
    pa = cs_success_probability(n, s, include_s_term)
    pb = event_b_probability(n, s)
    return p * pa * pb * policy.eta * math.log2(headroom)


def digital_selection_expectation(thresholds: ThresholdSet, n: int,
                                  params: SystemParams,
                                  corrected: bool = True) -> float:
    """Expected per-beam committed rate of threshold-interval selection.

    The scheduler picks a member of the highest occupied interval, so interval
    i wins with probability F(zeta_{i+1})^n - F(zeta_i)^n (F(zeta_{k+1}) = 1)
    and the expectation is sum_i log2(1 + zeta_i) * that difference.
    corrected=False keeps an extra 1/n factor that some closed forms carry;
    it understates the selection expectation by roughly that factor.
    """
    zetas = thresholds.zetas
    cdf = np.array([sinr_cdf(z, params) for z in zetas] + [1.0])
    powers = cdf ** n
    total = float(np.sum(np.log2(1.0 + zetas) * np.diff(powers)))
    return total / n if not corrected else total


def digital_rate_analytic(params: SystemParams, s: int, k: int,
                          thresholds: ThresholdSet, *, corrected: bool = True,
                          include_s_term: bool = True) -> float:
    """Digital shared-feedback sum rate.

    R_d = p * P(A) * E[selection] with the corrected selection expectation, or
    p * P(A) * P(B) * (1/n) * sum_i ... in the literal variant.
    """
    n, p = params.n, params.p
    pa = cs_success_probability(n, s, include_s_term)
    sel = digital_selection_expectation(thresholds, n, params, corrected=corrected)
    if corrected:
        return p * pa * sel
    pb = event_b_probability(n, s, k)
    return p * pa * pb * sel


def select_and_score_analog(recoveries: Sequence[RecoveryResult],
                            deltas: Sequence[float | np.ndarray],
                            table: SinrTable) -> float:
    """Realized sum rate of per-beam selection from recovered analog values.

    deltas[beam] is one back-off for the whole beam or an array with one value
    per recovered entry. Each beam schedules the user with the largest
    backed-off value and commits log2(1 + value - delta). The committed rate
    is realized only when it does not exceed what the user's actual SINR
    supports; otherwise the beam is in outage and contributes 0. Beams with no
    recovered user contribute 0.
    """
    total = 0.0
    for beam, (res, delta) in enumerate(zip(recoveries, deltas)):
        if res.support_hat.size == 0:
            continue
        backed = res.v_ls - np.asarray(delta)
        pick = int(np.argmax(backed))
        committed = backed[pick]
        if committed <= 0.0:
            continue
        user = int(res.support_hat[pick])
        if committed <= table.sinr[user, beam]:
            total += math.log2(1.0 + committed)
    return total


def select_and_score_digital(supports: Sequence[Sequence[np.ndarray]],
                             thresholds: ThresholdSet, table: SinrTable,
                             rng: np.random.Generator) -> float:
    """Realized sum rate of per-beam selection from detected interval supports.

    supports[beam][i] lists the users detected in interval i. Each beam takes
    the highest nonempty interval, draws one member uniformly, and commits
    log2(1 + zeta_i); the rate is realized only if the user's actual SINR
    clears zeta_i.
    """
    total = 0.0
    for beam, per_interval in enumerate(supports):
        for i in range(len(per_interval) - 1, -1, -1):
            members = per_interval[i]
            if len(members) == 0:
                continue
            user = int(members[rng.integers(len(members))])
            zeta = thresholds.zetas[i]
            if table.sinr[user, beam] >= zeta:
                total += math.log2(1.0 + zeta)
            break
    return total
