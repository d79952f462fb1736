"""Shared feedback link: channel budgeting, SINR thresholds, sparse encodings,
measurement matrices, and the noisy uplink transmission y = A v + w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .channels import SystemParams, SinrTable, sinr_ccdf, sinr_ccdf_inverse, sinr_pdf

__all__ = [
    "FeedbackConfig",
    "FeedbackMatrix",
    "ThresholdSet",
    "SparseFeedbackVector",
    "Measurement",
    "required_channels",
    "single_threshold",
    "multi_thresholds",
    "generate_feedback_matrix",
    "encode_analog",
    "encode_digital",
    "transmit",
    "analog_value_second_moment",
    "sigma_for_feedback_snr",
]

MATRIX_KINDS = ("gaussian", "bernoulli", "block_diagonal", "identity", "chip")


@dataclass
class FeedbackConfig:
    """Shared feedback channel configuration.

    sigma is the complex noise standard deviation per channel use; alpha is the
    LASSO regularization weight, None meaning the 2*sqrt(2 log n) default.
    """

    r: int
    s: int
    k: int = 1
    c_half: float = 0.0
    sigma: float = 0.0
    alpha: float | None = None
    mode: str = "analog"
    matrix_kind: str = "gaussian"
    groups: int = 1

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("need at least one feedback channel")
        if self.s < 1:
            raise ValueError("target sparsity must be at least 1")
        if self.k < 1:
            raise ValueError("threshold count must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.mode not in ("analog", "digital"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.matrix_kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix kind {self.matrix_kind!r}")
        if self.groups < 1:
            raise ValueError("groups must be at least 1")


@dataclass
class FeedbackMatrix:
    """Measurement matrix plus its real decomposition.

    a is the complex (r, n) matrix. a_real stacks [Re(a); Im(a)] into (2r, n)
    and a_hat = a_real * column_scale with column_scale = 1/sqrt(r), giving
    E||column of a_hat||^2 = 1. A solution of the normalized system relates to
    the original one through v_hat = sqrt(r) * v.
    """

    a: np.ndarray
    kind: str = "gaussian"
    groups: int = 1
    a_real: np.ndarray = field(init=False, repr=False)
    a_hat: np.ndarray = field(init=False, repr=False)
    column_scale: float = field(init=False)

    def __post_init__(self):
        r = self.a.shape[0]
        self.a_real = np.vstack([self.a.real, self.a.imag])
        self.column_scale = 1.0 / math.sqrt(r)
        self.a_hat = self.a_real * self.column_scale

    @property
    def r(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]


@dataclass
class ThresholdSet:
    """Ascending SINR thresholds defining k disjoint intervals.

    Interval i (0-based) is [zetas[i], zetas[i+1]) with the last one open to
    infinity.
    """

    zetas: np.ndarray

    def __post_init__(self):
        self.zetas = np.asarray(self.zetas, dtype=float)
        if np.any(np.diff(self.zetas) <= 0):
            raise ValueError("thresholds must be strictly ascending")

    @property
    def k(self) -> int:
        return self.zetas.size

    def interval(self, i: int) -> tuple[float, float]:
        lo = self.zetas[i]
        hi = self.zetas[i + 1] if i + 1 < self.k else np.inf
        return float(lo), float(hi)


@dataclass
class SparseFeedbackVector:
    """Length-n feedback vector with its active support."""

    v: np.ndarray
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        self.support = np.flatnonzero(self.v)


@dataclass
class Measurement:
    """Received uplink signal y = A v + w with the realized noise kept for tests."""

    y: np.ndarray
    w: np.ndarray
    sigma: float


def required_channels(n: int, s: int, c_half: float, *, ceil: bool = False) -> int:
    """Feedback channel count r = (c/2) * s * ln(n).

    Rounds half up by default; ceil=True rounds up, which is the conservative
    choice when the product is fractional.
    """
    if n < 2:
        raise ValueError("need at least two users")
    if s < 0:
        raise ValueError("sparsity must be nonnegative")
    if c_half <= 0:
        raise ValueError("c_half must be positive")
    raw = c_half * s * math.log(n)
    if ceil:
        return math.ceil(raw)
    return math.floor(raw + 0.5)


def single_threshold(n: int, s: int, params: SystemParams) -> float:
    """SINR threshold giving expected per-beam sparsity s, the CCDF inverse at s/n."""
    if not 1 <= s <= n:
        raise ValueError("need 1 <= s <= n")
    return sinr_ccdf_inverse(s / n, params)


def multi_thresholds(n: int, s: int, k: int, params: SystemParams) -> ThresholdSet:
    """k ascending thresholds with equal expected occupancy s per interval.

    zeta_i = ccdf_inverse(s * (k - i + 1) / n) for i = 1..k, so the span above
    zeta_1 holds s*k users in expectation and the top interval holds s.
    """
    if k < 1:
        raise ValueError("need at least one threshold")
    if s < 1 or s * k > n:
        raise ValueError("need 1 <= s and s * k <= n")
    zetas = np.array([sinr_ccdf_inverse(s * (k - i) / n, params) for i in range(k)])
    return ThresholdSet(zetas=zetas)


def generate_feedback_matrix(config: FeedbackConfig, n: int,
                             rng: np.random.Generator) -> FeedbackMatrix:
    """Draw the (r, n) measurement matrix for the configured kind.

    gaussian: i.i.d. CN(0,1). bernoulli/chip: +-1 entries (real). identity:
    one dedicated channel per user, requires r == n. block_diagonal: groups
    independent (r/g, n/g) CN(0,1) blocks; requires g | n, g | r and g | s.
    """
    r, kind, g = config.r, config.matrix_kind, config.groups
    if kind == "gaussian":
        a = (rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n))) / np.sqrt(2.0)
    elif kind in ("bernoulli", "chip"):
        a = (2.0 * rng.integers(0, 2, size=(r, n)) - 1.0).astype(complex)
    elif kind == "identity":
        if r != n:
            raise ValueError("identity (dedicated) matrix requires r == n")
        a = np.eye(n, dtype=complex)
    elif kind == "block_diagonal":
        if n % g or r % g or config.s % g:
            raise ValueError("block_diagonal requires g | n, g | r and g | s")
        a = np.zeros((r, n), dtype=complex)
        rb, nb = r // g, n // g
        for b in range(g):
            blk = (rng.standard_normal((rb, nb)) + 1j * rng.standard_normal((rb, nb)))
            a[b * rb:(b + 1) * rb, b * nb:(b + 1) * nb] = blk / np.sqrt(2.0)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    return FeedbackMatrix(a=a, kind=kind, groups=g)


def encode_analog(table: SinrTable, beam: int, zeta: float) -> SparseFeedbackVector:
    """Per-beam analog feedback: v_i = SINR_{i,beam} when beam is user i's best
    beam and the SINR clears zeta, else 0."""
    col = table.sinr[:, beam]
    mask = (table.best_beam == beam) & (col > zeta)
    return SparseFeedbackVector(v=np.where(mask, col, 0.0))


def encode_digital(table: SinrTable, beam: int, interval: tuple[float, float]) -> SparseFeedbackVector:
    """Per-beam, per-interval digital feedback: v_i = 1 when beam is user i's
    best beam and the SINR falls in [lo, hi), else 0."""
    lo, hi = interval
    col = table.sinr[:, beam]
    mask = (table.best_beam == beam) & (col >= lo) & (col < hi)
    return SparseFeedbackVector(v=mask.astype(float))


def transmit(matrix: FeedbackMatrix, v: np.ndarray, sigma: float,
             rng: np.random.Generator) -> Measurement:
    """One shared-channel use: y = A v + w with w i.i.d. CN(0, sigma^2).

    sigma = 0 returns the exact product.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    r = matrix.r
    if sigma == 0.0:
        w = np.zeros(r, dtype=complex)
    else:
        w = sigma * (rng.standard_normal(r) + 1j * rng.standard_normal(r)) / np.sqrt(2.0)
    return Measurement(y=matrix.a @ v + w, w=w, sigma=sigma)


def analog_value_second_moment(params: SystemParams, zeta: float) -> float:
    """E[SINR^2 | SINR > zeta], the mean square of an active analog entry."""
    tail = sinr_ccdf(zeta, params)
    if tail <= 0:
        raise ValueError("threshold leaves no tail mass")
    num, _ = integrate.quad(lambda x: x * x * sinr_pdf(x, params), zeta, np.inf)
    return num / tail


def sigma_for_feedback_snr(snr_linear: float, mode: str, params: SystemParams,
                           zeta: float = 0.0) -> float:
    """Noise level realizing a per-active-entry feedback SNR E[|a|^2 v^2]/sigma^2.

    E|a_ij|^2 = 1 for every supported matrix kind, so sigma^2 is the active
    entry's mean square over the SNR. Digital entries are unit, analog entries
    are SINRs above zeta.
    """
    if snr_linear <= 0:
        raise ValueError("feedback SNR must be positive")
    if mode == "digital":
        return math.sqrt(1.0 / snr_linear)
    return math.sqrt(analog_value_second_moment(params, zeta) / snr_linear)
