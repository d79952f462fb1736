"""Uplink training: LMMSE estimation of feedback channel gains, the channel
budget it implies, grouped (block-diagonal) budgeting, and non-fading chip
sequence matrices that need no training at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .feedback import FeedbackConfig, FeedbackMatrix, generate_feedback_matrix
from .feedback import required_channels

__all__ = [
    "TrainingEstimate",
    "BudgetReport",
    "BlockBudget",
    "lmmse_gain_estimate",
    "channel_budget",
    "block_diagonal_budget",
    "chip_sequence_matrix",
]


@dataclass
class TrainingEstimate:
    """LMMSE gain estimate and its analytic error variance."""

    a_hat: complex
    error_var: float


@dataclass(frozen=True)
class BudgetReport:
    """Channel budgets under perfect and estimated gain knowledge.

    penalty_ratio is the multiplicative channel overhead caused by estimation
    error; rho_equiv is the reduced SNR at which a perfectly known gain would
    need the same budget.
    """

    r_perfect: int
    r_noisy: int
    penalty_ratio: float
    rho_equiv: float


@dataclass(frozen=True)
class BlockBudget:
    """Grouped feedback budget: total channels and per-group training length."""

    channels: int
    per_group: int
    training_symbols: int


def lmmse_gain_estimate(pilots: np.ndarray, received: np.ndarray,
                        rho_tr: float) -> TrainingEstimate:
    """LMMSE estimate of a unit-variance complex gain from pilot observations.

    Model: received = sqrt(rho_tr) * a * pilots + w with unit-variance complex
    noise. The estimate is (1/sqrt(rho)) * (1/rho + ||s||^2)^{-1} * s^H y and
    its error variance is 1/(1 + rho * ||s||^2).
    """
    pilots = np.asarray(pilots, dtype=complex)
    received = np.asarray(received, dtype=complex)
    if pilots.shape != received.shape:
        raise ValueError("pilot and received lengths differ")
    if rho_tr <= 0:
        raise ValueError("training SNR must be positive")
    energy = float(np.vdot(pilots, pilots).real)
    if energy == 0.0:
        raise ValueError("pilot sequence has zero energy")
    a_hat = (1.0 / math.sqrt(rho_tr)) * np.vdot(pilots, received) / (1.0 / rho_tr + energy)
    return TrainingEstimate(a_hat=complex(a_hat), error_var=1.0 / (1.0 + rho_tr * energy))


def channel_budget(n: int, support_size: int, rho: float, a_hat_sq: float,
                   a_tilde_sq: float) -> BudgetReport:
    """Channels needed to resolve the strongest of n - k + 1 candidates.

    r_perfect = ln(n-k+1) / ln(1 + rho * a_hat_sq) and the noisy variant
    replaces the effective SNR with rho * a_hat_sq / (rho * a_tilde_sq + 1).
    Both are rounded up to whole channels. The unrounded ratio and the
    equivalent perfect-knowledge SNR are reported alongside.
    """
    if not 1 <= support_size < n:
        raise ValueError("need 1 <= support_size < n")
    if rho <= 0 or a_hat_sq <= 0:
        raise ValueError("rho and a_hat_sq must be positive")
    if a_tilde_sq < 0:
        raise ValueError("a_tilde_sq must be nonnegative")
    num = math.log(n - support_size + 1)
    denom_perfect = math.log1p(rho * a_hat_sq)
    snr_noisy = rho * a_hat_sq / (rho * a_tilde_sq + 1.0)
    denom_noisy = math.log1p(snr_noisy)
    return BudgetReport(
        r_perfect=math.ceil(num / denom_perfect),
        r_noisy=math.ceil(num / denom_noisy),
        penalty_ratio=denom_perfect / denom_noisy,
        rho_equiv=snr_noisy / a_hat_sq,
    )


def block_diagonal_budget(n: int, s: int, groups: int, c_half_prime: float,
                          *, ceil: bool = False) -> BlockBudget:
    """Channel budget when users are split into g independent groups.

    Each group solves an (s/g)-sparse problem over n/g users, so the total is
    g * (c'/2) * (s/g) * ln(n/g) channels while training shortens from n to
    n/g symbols. Group sizes must divide evenly: g | n and g | s.
    """
    if groups < 1:
        raise ValueError("groups must be at least 1")
    if n % groups or s % groups:
        raise ValueError("grouping requires g | n and g | s")
    per_group = required_channels(n // groups, s // groups, c_half_prime, ceil=ceil)
    return BlockBudget(channels=groups * per_group, per_group=per_group,
                       training_symbols=n // groups)


def chip_sequence_matrix(n: int, r: int, rng: np.random.Generator) -> FeedbackMatrix:
    """Non-fading +-1 chip-sequence matrix: each user keys r chips.

    Known at the base station by construction, so no uplink training is spent
    on it.
    """
    cfg = FeedbackConfig(r=r, s=1, matrix_kind="chip")
    return generate_feedback_matrix(cfg, n, rng)
