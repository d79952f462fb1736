"""Experiment runner: seeded Monte-Carlo sweeps of the full feedback protocol.

Expands a configuration into sweep points, runs the per-trial pipeline
(downlink -> SINR -> thresholds -> encode -> transmit -> recover -> refine ->
back off -> select -> score) for each point, attaches the analytic reference
curves, and emits CSV or gnuplot-style plot data. Trials are reproducible for
a fixed seed regardless of worker count: every trial draws from counter-based
substreams keyed by (seed, point index, trial index, stream). The downlink
stream is keyed without the point index so all points of a run see the same
channel realizations, which makes cross-row comparisons matched-seed.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .channels import SystemParams, compute_sinr, generate_downlink
from .feedback import (FeedbackConfig, ThresholdSet,
                       analog_value_second_moment, encode_analog,
                       encode_digital, generate_feedback_matrix,
                       multi_thresholds, required_channels,
                       sigma_for_feedback_snr, single_threshold, transmit)
from .recovery import (ConvergenceError, RecoveryResult, SingularSupportError,
                       correlation_active_set, decompose_real, lasso_solve,
                       ls_refine, maxcorr_support)
from .throughput import (analog_rate_analytic, digital_rate_analytic,
                         digital_selection_expectation, effective_rate_analytic,
                         extreme_value_beta, extreme_value_rate,
                         make_backoff_policy, optimal_backoff,
                         select_and_score_analog, select_and_score_digital)
from .wishart import (DivergenceError, WishartSpec, asymptotic_beta,
                      closed_form_s1, closed_form_s2, dedicated_ecm,
                      mc_min_eig_expectation)

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)

CSV_COLUMNS = ("scenario", "n", "p", "rho", "mode", "recovery", "r", "s", "k",
               "c_half", "sigma", "delta_star", "rate_emp", "rate_se",
               "rate_R", "rate_Ra", "rate_Reff", "rate_Rd", "recov_rate",
               "bits_fed")

THROUGHPUT_SCENARIOS = ("fig2", "fig3", "fig4", "fig5", "fig6", "custom")
WISHART_SCENARIOS = ("fig1", "fig7", "fig8")
SCENARIOS = THROUGHPUT_SCENARIOS + WISHART_SCENARIOS

RECOVERY_LABELS = ("maxcorr", "lasso", "maxcorr_bd", "dedicated")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class SweepPoint:
    """One cell of the sweep grid, fully resolved."""

    mode: str
    recovery: str
    r: int
    s: int
    k: int = 1
    c_half: float = 0.0
    sigma: float = 0.0
    matrix_kind: str = "gaussian"
    groups: int = 1


@dataclass
class ResultRow:
    """One emitted row; fields mirror the CSV schema in order."""

    scenario: str
    n: int
    p: int
    rho: float
    mode: str
    recovery: str
    r: int
    s: int
    k: int
    c_half: float
    sigma: float
    delta_star: float
    rate_emp: float
    rate_se: float
    rate_R: float
    rate_Ra: float
    rate_Reff: float
    rate_Rd: float
    recov_rate: float
    bits_fed: int

    def formatted(self) -> list[str]:
        """Cells as strings; floats use shortest round-trip repr."""
        out = []
        for name in CSV_COLUMNS:
            val = getattr(self, name)
            out.append(repr(float(val)) if isinstance(val, float) else str(val))
        return out


@dataclass
class ExperimentConfig:
    """Sweep description: system, grids, trial count, seed, and baselines."""

    params: SystemParams = field(default_factory=lambda: SystemParams(n=100, p=4, rho=10.0))
    scenario: str = "custom"
    mode: str = "analog"
    recovery: str = "maxcorr"
    recoveries: tuple[str, ...] = ()
    trials: int = 10_000
    seed: int = 42
    s_grid: tuple[int, ...] = (5,)
    c_half_grid: tuple[float, ...] = (0.8,)
    k_grid: tuple[int, ...] = (1,)
    budget_bits: tuple[int, ...] = ()
    fb_snr: float = 10.0
    sigma: float | None = None
    matrix_kind: str = "gaussian"
    groups: int = 1
    ceil_channels: bool = False
    dedicated_noisy: bool = False
    dedicated_noiseless: bool = True
    enforce_admissibility: bool = True
    literal_wishart: bool = False
    rho_fb: float = 2.0
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.mode not in ("analog", "digital"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for rec in self.recoveries or (self.recovery,):
            if rec not in RECOVERY_LABELS:
                raise ConfigError(f"unknown recovery {rec!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.s_grid or not self.c_half_grid or not self.k_grid:
            raise ConfigError("sweep grids must be nonempty")
        if any(s < 1 for s in self.s_grid):
            raise ConfigError("sparsity grid must be positive")
        if any(c <= 0 for c in self.c_half_grid):
            raise ConfigError("c_half grid must be positive")
        if any(k < 1 for k in self.k_grid):
            raise ConfigError("threshold grid must be positive")
        if self.budget_bits and self.mode != "digital":
            raise ConfigError("bit budgets apply to digital mode only")
        if any(b < 1 for b in self.budget_bits):
            raise ConfigError("bit budgets must be positive")
        if self.fb_snr <= 0:
            raise ConfigError("feedback SNR must be positive")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")


def preset(scenario: str, **overrides) -> ExperimentConfig:
    """Named scenario with its figure defaults; overrides win."""
    grid = tuple(round(0.2 * i, 1) for i in range(1, 11))
    base: dict = {
        "fig1": dict(mode="analog", trials=10 ** 6, rho_fb=10.0),
        "fig2": dict(mode="analog", recovery="maxcorr", s_grid=(2, 3, 4, 5, 6),
                     c_half_grid=grid, ceil_channels=True,
                     enforce_admissibility=False, dedicated_noiseless=True),
        "fig3": dict(mode="analog", recoveries=("lasso", "maxcorr", "maxcorr_bd"),
                     s_grid=(6,), c_half_grid=grid, groups=2, ceil_channels=True,
                     enforce_admissibility=False),
        "fig4": dict(mode="analog", recovery="maxcorr", sigma=0.0, s_grid=(5,),
                     c_half_grid=grid, ceil_channels=True,
                     enforce_admissibility=False),
        "fig5": dict(mode="digital", recovery="maxcorr", s_grid=(1,),
                     k_grid=(1, 2, 3, 4), c_half_grid=grid, sigma=0.1,
                     ceil_channels=True, enforce_admissibility=False),
        "fig6": dict(mode="digital", recovery="maxcorr", s_grid=(1,),
                     k_grid=(1, 2, 3, 4, 5, 6), budget_bits=(120, 240, 360),
                     sigma=0.1, enforce_admissibility=False),
        "fig7": dict(trials=10 ** 6, rho_fb=2.0),
        "fig8": dict(trials=10 ** 6, rho_fb=2.0),
        "custom": {},
    }.get(scenario)
    if base is None:
        raise ConfigError(f"unknown scenario {scenario!r}")
    base.update(overrides)
    return ExperimentConfig(scenario=scenario, **base)


def _point_sigma(config: ExperimentConfig, s: int) -> float:
    if config.sigma is not None:
        return config.sigma
    zeta = single_threshold(config.params.n, s, config.params) \
        if config.mode == "analog" else 0.0
    return sigma_for_feedback_snr(config.fb_snr, config.mode, config.params, zeta)


def sweep_points(config: ExperimentConfig) -> list[SweepPoint]:
    """Resolved grid cells plus the toggled dedicated baselines.

    List order is stable and feeds the per-point RNG substreams, so it is part
    of the reproducibility contract.
    """
    if config.scenario in WISHART_SCENARIOS:
        return []
    n, p = config.params.n, config.params.p
    recoveries = config.recoveries or (config.recovery,)
    points: list[SweepPoint] = []
    for s in config.s_grid:
        sigma = _point_sigma(config, s)
        for k in config.k_grid if config.mode == "digital" else (1,):
            if config.budget_bits:
                cells = []
                for budget in config.budget_bits:
                    r = budget // (p * k)
                    if r < 1:
                        log.warning("budget %d leaves no channels at k=%d", budget, k)
                        continue
                    cells.append((r, r / (s * math.log(n))))
            else:
                cells = [(required_channels(n, s, c, ceil=config.ceil_channels), c)
                         for c in config.c_half_grid]
            for r, c_half in cells:
                for rec in recoveries:
                    kind = "block_diagonal" if rec == "maxcorr_bd" else config.matrix_kind
                    g = config.groups if kind == "block_diagonal" else 1
                    if kind == "block_diagonal" and r % g:
                        r_adj = r + (-r) % g
                    else:
                        r_adj = r
                    points.append(SweepPoint(mode=config.mode, recovery=rec,
                                             r=r_adj, s=s, k=k, c_half=c_half,
                                             sigma=sigma, matrix_kind=kind,
                                             groups=g))
        for k in config.k_grid if config.mode == "digital" else (1,):
            if config.dedicated_noisy and config.mode == "analog":
                points.append(SweepPoint(mode=config.mode, recovery="dedicated",
                                         r=n, s=s, k=k, sigma=sigma))
            if config.dedicated_noiseless:
                points.append(SweepPoint(mode=config.mode, recovery="dedicated",
                                         r=n, s=s, k=k, sigma=0.0))
    return points


def infeasible_reason(point: SweepPoint, params: SystemParams,
                      enforce: bool = True) -> str | None:
    """Why a sweep point cannot run, or None. Structural violations are always
    reported; the recoverability bounds only when enforce is set."""
    n = params.n
    if point.mode == "digital" and point.s * point.k > n:
        return f"thresholds need s*k <= n, got {point.s}*{point.k}"
    if point.recovery == "dedicated":
        return None
    if point.mode == "analog" and point.recovery in ("maxcorr", "maxcorr_bd") \
            and point.s > 2 * point.r:
        return f"maxcorr support {point.s} exceeds {2 * point.r} real measurements"
    if point.recovery == "lasso" and point.sigma == 0.0:
        return "lasso needs sigma > 0; use maxcorr when the uplink is noiseless"
    if point.matrix_kind == "block_diagonal":
        g = point.groups
        if n % g or point.r % g or point.s % g:
            return f"block structure needs g | n, g | r and g | s with g={g}"
    if not enforce:
        return None
    logn = math.log(n)
    min_signal = 8.0 * point.sigma * math.sqrt(logn / point.r)
    if point.mode == "analog":
        zeta = single_threshold(n, point.s, params)
        if zeta <= min_signal:
            return (f"threshold {zeta:.4f} below the minimum recoverable "
                    f"value {min_signal:.4f}")
    else:
        if min_signal >= 1.0:
            return (f"sigma {point.sigma:.4f} above the digital ceiling "
                    f"{math.sqrt(point.r / logn) / 8.0:.4f}")
    return None


def _true_interval_supports(table, beam: int, ths: ThresholdSet) -> list[np.ndarray]:
    return [encode_digital(table, beam, ths.interval(i)).support
            for i in range(ths.k)]


def _top_nonempty(per_interval: Sequence[np.ndarray]) -> int:
    for i in range(len(per_interval) - 1, -1, -1):
        if len(per_interval[i]):
            return i
    return -1


def _dedicated_analog_rate(table, params: SystemParams, sigma: float,
                           rng: np.random.Generator | None) -> float:
    n = params.n
    vals = table.sinr[np.arange(n), table.best_beam]
    est = vals if sigma == 0.0 else vals + rng.normal(0.0, sigma / _SQRT2, n)
    se = sigma / _SQRT2
    total = 0.0
    for m in range(params.p):
        idx = np.flatnonzero(table.best_beam == m)
        if idx.size == 0:
            continue
        backed = est[idx].copy()
        if se > 0.0:
            for j, e in enumerate(backed):
                if e > 1.0:
                    backed[j] = e - optimal_backoff(e, se)
        jbest = int(np.argmax(backed))
        u = int(idx[jbest])
        committed = backed[jbest]
        if 0.0 < committed <= table.sinr[u, m]:
            total += math.log2(1.0 + committed)
    return total


# Support budget for max-correlation detection: room for active counts above
# their mean plus noise spillover, capped so LS keeps r + 1 degrees of freedom.
def _maxcorr_budget(s: int, r: int) -> int:
    return max(1, min(2 * s + 8, r - 1))


_EMPTY_RECOVERY = RecoveryResult(support_hat=np.empty(0, dtype=int),
                                 v_ls=np.empty(0), sigma_e=np.empty(0),
                                 method="ls")
_CULL_PASSES = 3


def _analog_decode(y: np.ndarray, a_hat: np.ndarray, scale: float,
                   pt: SweepPoint, zeta: float) -> RecoveryResult:
    """Detect the support, refine by LS, and prune threshold-inconsistent
    entries. A recovered value at or below zeta/2 cannot belong to a user who
    cleared zeta; dropping it and refitting bleeds its fitted energy back into
    the surviving entries."""
    if pt.recovery == "lasso":
        try:
            vhat = lasso_solve(y, a_hat, pt.sigma / _SQRT2)
        except ConvergenceError:
            return _EMPTY_RECOVERY
        support = np.flatnonzero(vhat > 0.0)
        if support.size > y.size:
            keep = np.argsort(-vhat[support], kind="stable")[:y.size]
            support = np.sort(support[keep])
        if support.size == 0:
            return _EMPTY_RECOVERY
    else:
        support = maxcorr_support(y, a_hat, _maxcorr_budget(pt.s, pt.r))
    try:
        res = ls_refine(y, a_hat, support, sigma=pt.sigma, scale=scale)
    except SingularSupportError:
        return _EMPTY_RECOVERY
    for _ in range(_CULL_PASSES):
        keep = res.v_ls > 0.5 * zeta
        if keep.all():
            break
        if not keep.any():
            return _EMPTY_RECOVERY
        try:
            res = ls_refine(y, a_hat, res.support_hat[keep],
                            sigma=pt.sigma, scale=scale)
        except SingularSupportError:
            return _EMPTY_RECOVERY
    return res


def _entry_backoffs(y: np.ndarray, a_hat: np.ndarray, res: RecoveryResult,
                    scale: float, sigma: float) -> np.ndarray:
    """Per-entry back-offs sized to the refinement noise, inflated by the fit
    residual when it exceeds what the channel noise alone explains (support
    misses leak unmodeled interference into the refined values)."""
    k = res.support_hat.size
    sig = res.sigma_e
    base = 0.5 * sigma * sigma
    dof = y.size - k
    if k and dof > 0:
        cols = a_hat[:, res.support_hat]
        fit = cols @ (res.v_ls * scale)
        resid_var = float(np.sum((y - fit) ** 2)) / dof
        if resid_var > base:
            try:
                inv_diag = np.diag(np.linalg.inv(cols.T @ cols))
                sig = np.sqrt(resid_var * np.maximum(inv_diag, 0.0)) / scale
            except np.linalg.LinAlgError:
                if base > 0.0:
                    sig = sig * math.sqrt(resid_var / base)
    deltas = np.zeros(k)
    for j in range(k):
        if res.v_ls[j] > 1.0 and sig[j] > 0.0:
            deltas[j] = optimal_backoff(res.v_ls[j], sig[j])
    return deltas


def _analog_trial(params: SystemParams, pt: SweepPoint, zeta: float,
                  seed: int, point_idx: int, t: int) -> tuple[float, float]:
    table = compute_sinr(
        generate_downlink(params, np.random.default_rng((seed, 0, t, 0))), params)
    if pt.recovery == "dedicated":
        rng = np.random.default_rng((seed, point_idx + 1, t, 2))
        rate = _dedicated_analog_rate(table, params, pt.sigma, rng)
        return rate, 1.0

    n, p = params.n, params.p
    cfg = FeedbackConfig(r=pt.r, s=pt.s, sigma=pt.sigma, mode="analog",
                         matrix_kind=pt.matrix_kind, groups=pt.groups)
    matrix = generate_feedback_matrix(
        cfg, n, np.random.default_rng((seed, point_idx + 1, t, 1)))
    rng_ns = np.random.default_rng((seed, point_idx + 1, t, 2))
    recoveries, deltas = [], []
    hits = 0
    for m in range(p):
        sv = encode_analog(table, m, zeta)
        meas = transmit(matrix, sv.v, pt.sigma, rng_ns)
        y, a_hat, scale = decompose_real(meas, matrix)
        res = _analog_decode(y, a_hat, scale, pt, zeta)
        hits += bool(np.isin(sv.support, res.support_hat).all())
        recoveries.append(res)
        deltas.append(_entry_backoffs(y, a_hat, res, scale, pt.sigma))
    rate = select_and_score_analog(recoveries, deltas, table)
    return rate, hits / p


def _digital_trial(params: SystemParams, pt: SweepPoint, zetas: tuple,
                   seed: int, point_idx: int, t: int) -> tuple[float, float]:
    table = compute_sinr(
        generate_downlink(params, np.random.default_rng((seed, 0, t, 0))), params)
    ths = ThresholdSet(zetas=np.asarray(zetas))
    n, p = params.n, params.p
    if pt.recovery == "dedicated":
        supports = [_true_interval_supports(table, m, ths) for m in range(p)]
        rate = select_and_score_digital(supports, ths, table,
                                        np.random.default_rng((seed, 0, t, 5)))
        return rate, 1.0

    cfg = FeedbackConfig(r=pt.r, s=pt.s, k=pt.k, sigma=pt.sigma, mode="digital",
                         matrix_kind=pt.matrix_kind, groups=pt.groups)
    matrix = generate_feedback_matrix(
        cfg, n, np.random.default_rng((seed, point_idx + 1, t, 1)))
    rng_ns = np.random.default_rng((seed, point_idx + 1, t, 2))
    rng_sel = np.random.default_rng((seed, point_idx + 1, t, 3))
    supports = []
    hits = 0
    for m in range(p):
        truth = _true_interval_supports(table, m, ths)
        per = []
        for i in range(ths.k):
            sv = encode_digital(table, m, ths.interval(i))
            meas = transmit(matrix, sv.v, pt.sigma, rng_ns)
            y, a_hat, scale = decompose_real(meas, matrix)
            if pt.recovery == "lasso":
                try:
                    vhat = lasso_solve(y, a_hat, pt.sigma / _SQRT2)
                    rec = np.flatnonzero(vhat > 0.5 * scale)
                except ConvergenceError:
                    rec = np.empty(0, dtype=int)
            else:
                support = maxcorr_support(y, a_hat, _maxcorr_budget(pt.s, pt.r))
                try:
                    res = ls_refine(y, a_hat, support, sigma=pt.sigma, scale=scale)
                    rec = res.support_hat[res.v_ls > 0.5]
                except SingularSupportError:
                    rec = correlation_active_set(y, a_hat, scale)
            per.append(rec)
        supports.append(per)
        hits += _top_nonempty(per) == _top_nonempty(truth)
    rate = select_and_score_digital(supports, ths, table, rng_sel)
    return rate, hits / p


@dataclass(frozen=True)
class _PointRuntime:
    """Everything a worker needs to run one point's trial slice."""

    params: SystemParams
    point: SweepPoint
    point_idx: int
    seed: int
    zeta: float = 0.0
    zetas: tuple = ()


def _trial_block(payload: tuple[_PointRuntime, int, int]) -> np.ndarray:
    rt, lo, hi = payload
    out = np.empty((hi - lo, 2))
    for j, t in enumerate(range(lo, hi)):
        if rt.point.mode == "analog":
            out[j] = _analog_trial(rt.params, rt.point, rt.zeta, rt.seed,
                                   rt.point_idx, t)
        else:
            out[j] = _digital_trial(rt.params, rt.point, rt.zetas, rt.seed,
                                    rt.point_idx, t)
    return out


def _point_runtime(config: ExperimentConfig, point: SweepPoint,
                   point_idx: int) -> _PointRuntime:
    params = config.params
    if point.mode == "analog":
        zeta = single_threshold(params.n, point.s, params)
        return _PointRuntime(params=params, point=point, point_idx=point_idx,
                             seed=config.seed, zeta=zeta)
    ths = multi_thresholds(params.n, point.s, point.k, params)
    return _PointRuntime(params=params, point=point, point_idx=point_idx,
                         seed=config.seed, zetas=tuple(ths.zetas))


def run_point(config: ExperimentConfig, point: SweepPoint,
              point_idx: int) -> np.ndarray:
    """(trials, 2) array of per-trial (rate, recovery fraction), trial order."""
    rt = _point_runtime(config, point, point_idx)
    trials, workers = config.trials, config.workers
    if workers == 1 or trials < 2 * workers:
        return _trial_block((rt, 0, trials))
    bounds = np.linspace(0, trials, workers + 1, dtype=int)
    payloads = [(rt, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        blocks = list(pool.map(_trial_block, payloads))
    return np.vstack(blocks)


def _nan() -> float:
    return float("nan")


def _build_row(config: ExperimentConfig, point: SweepPoint,
               stats: np.ndarray) -> ResultRow:
    params = config.params
    n, p, rho = params.n, params.p, params.rho
    rates, recov = stats[:, 0], stats[:, 1]
    rate_emp = float(rates.mean())
    rate_se = float(rates.std(ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else 0.0
    rate_r = extreme_value_rate(n, p, rho)
    beta_t = extreme_value_beta(n, p, rho)
    delta_star = 0.0
    rate_ra = rate_reff = rate_rd = _nan()
    if point.mode == "analog":
        if point.recovery == "dedicated":
            rate_ra = rate_r
            if point.sigma > 0.0:
                policy = make_backoff_policy(beta_t, point.sigma / _SQRT2)
                delta_star = policy.delta
                head = beta_t - policy.delta
                rate_reff = p * policy.eta * math.log2(head) if head > 1.0 else 0.0
            else:
                rate_reff = rate_r
        else:
            sigma_e = point.sigma / math.sqrt(2.0 * point.r)
            delta_star = optimal_backoff(beta_t, sigma_e) if sigma_e > 0 else 0.0
            rate_ra = analog_rate_analytic(n, p, rho, point.s)
            rate_reff = effective_rate_analytic(n, p, rho, point.s, sigma_e)
        bits = n if point.recovery == "dedicated" else p * point.r
    else:
        ths = multi_thresholds(n, point.s, point.k, params)
        if point.recovery == "dedicated":
            rate_rd = p * digital_selection_expectation(ths, n, params)
            bits = n * max(1, math.ceil(math.log2(point.k + 1)))
        else:
            rate_rd = digital_rate_analytic(params, point.s, point.k, ths)
            bits = p * point.k * point.r
    return ResultRow(scenario=config.scenario, n=n, p=p, rho=rho,
                     mode=point.mode, recovery=point.recovery, r=point.r,
                     s=point.s, k=point.k, c_half=point.c_half,
                     sigma=point.sigma, delta_star=delta_star,
                     rate_emp=rate_emp, rate_se=rate_se, rate_R=rate_r,
                     rate_Ra=rate_ra, rate_Reff=rate_reff, rate_Rd=rate_rd,
                     recov_rate=float(recov.mean()), bits_fed=bits)


def _wishart_rows(config: ExperimentConfig) -> Iterator[ResultRow]:
    params = config.params
    literal = config.literal_wishart
    base = dict(scenario=config.scenario, n=params.n, p=params.p,
                mode="wishart", k=1, delta_star=0.0, rate_Ra=_nan(),
                rate_Reff=_nan(), rate_Rd=_nan(), recov_rate=_nan(),
                bits_fed=0)

    def mc(spec: WishartSpec, tag: int) -> tuple[float, float]:
        rng = np.random.default_rng((config.seed, spec.s, spec.r, tag))
        return mc_min_eig_expectation(spec, config.trials, rng)

    if config.scenario == "fig7":
        for s in (1, 2):
            for r in (1, 2, 3, 4, 5, 6, 8, 10):
                if r < s:
                    continue
                spec = WishartSpec(s=s, r=r, rho_fb=config.rho_fb)
                try:
                    closed = (closed_form_s1 if s == 1 else closed_form_s2)(
                        r, config.rho_fb, literal=literal)
                except DivergenceError as exc:
                    log.warning("skipping s=%d r=%d: %s", s, r, exc)
                    continue
                mean, se = mc(spec, 7)
                yield ResultRow(rho=config.rho_fb, recovery=f"s{s}", r=r, s=s,
                                c_half=0.0, sigma=0.0, rate_emp=mean,
                                rate_se=se, rate_R=closed, **base)
    elif config.scenario == "fig8":
        for beta in (0.2, 0.5):
            for r in (5, 10, 25, 50):
                s = round(beta * 2 * r)
                spec = WishartSpec(s=s, r=r, rho_fb=config.rho_fb)
                asym = asymptotic_beta(r, beta, config.rho_fb, literal=literal)
                mean, se = mc(spec, 8)
                yield ResultRow(rho=config.rho_fb, recovery="asymptotic", r=r,
                                s=s, c_half=beta, sigma=0.0, rate_emp=mean,
                                rate_se=se, rate_R=asym, **base)
    else:
        for s in (1, 2):
            zeta = single_threshold(params.n, s, params)
            sigma_v = math.sqrt(analog_value_second_moment(params, zeta))
            ded = s * dedicated_ecm(sigma_v, config.rho_fb)
            for r in (1, 2, 3, 4, 6, 8, 10, 12):
                spec = WishartSpec(s=s, r=r, rho_fb=config.rho_fb)
                mean, se = mc(spec, 1)
                sv2 = sigma_v ** 2
                yield ResultRow(rho=config.rho_fb, recovery="ecm_shared", r=r,
                                s=s, c_half=0.0, sigma=sigma_v,
                                rate_emp=s * sv2 * mean, rate_se=s * sv2 * se,
                                rate_R=ded, **base)
            yield ResultRow(rho=config.rho_fb, recovery="ecm_dedicated",
                            r=params.n, s=s, c_half=0.0, sigma=sigma_v,
                            rate_emp=ded, rate_se=0.0, rate_R=ded, **base)


def run_experiment(config: ExperimentConfig) -> Iterator[ResultRow]:
    """Yield one ResultRow per feasible sweep point, in point order.

    Infeasible points are skipped with a logged reason. Wishart-flavored
    scenarios sweep the ensemble dimension instead of the protocol grids.
    """
    if config.scenario in WISHART_SCENARIOS:
        yield from _wishart_rows(config)
        return
    points = sweep_points(config)
    for idx, point in enumerate(points):
        reason = infeasible_reason(point, config.params,
                                   config.enforce_admissibility)
        if reason is not None:
            log.warning("skipping point %d %s: %s", idx, point, reason)
            continue
        stats = run_point(config, point, idx)
        yield _build_row(config, point, stats)


def calibrate_c(n: int, s: int, target: float, rng: np.random.Generator,
                trials: int = 10_000, sigma: float = 0.1,
                grid: Sequence[float] | None = None, *,
                ceil: bool = True) -> float:
    """Smallest grid c/2 whose channel count hits the target support-recovery
    rate, measured on unit-valued sparse vectors at the given noise level.

    Success means every true active index appears in the LASSO support (false
    extras are tolerated; the refinement stage prunes them). Walks the grid in
    ascending order and returns the first value whose success rate over the
    trials reaches the target; if none does, returns the largest grid value
    with a warning. At n=100, s=6, target 0.95 the calibration lands near
    c/2 = 0.6.
    """
    if not 0.5 < target < 1.0:
        raise ValueError("target must lie in (0.5, 1)")
    if grid is None:
        grid = [round(0.1 * i, 1) for i in range(1, 31)]
    grid = sorted(grid)
    sigma_real = sigma / _SQRT2
    needed = math.ceil(target * trials)
    for c_half in grid:
        r = required_channels(n, s, c_half, ceil=ceil)
        wins = 0
        for done in range(trials):
            if wins + (trials - done) < needed:
                break
            cfg = FeedbackConfig(r=r, s=s)
            matrix = generate_feedback_matrix(cfg, n, rng)
            sup = rng.choice(n, size=s, replace=False)
            v = np.zeros(n)
            v[sup] = 1.0
            meas = transmit(matrix, v, sigma, rng)
            y, a_hat, _ = decompose_real(meas, matrix)
            try:
                vhat = lasso_solve(y, a_hat, sigma_real)
            except ConvergenceError:
                continue
            wins += bool(np.isin(sup, np.flatnonzero(vhat > 0.0)).all())
        if wins >= needed:
            return c_half
    log.warning("target %.3f unreachable on the grid; returning %.2f",
                target, grid[-1])
    return grid[-1]


def emit_csv(rows: Sequence[ResultRow], path: str) -> None:
    """Write rows under the fixed header; floats keep full precision."""
    if not rows:
        raise ValueError("no rows to write")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow(row.formatted())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_plot_data(rows: Sequence[ResultRow], path: str) -> None:
    """Gnuplot-style blocks: rows grouped by curve family (mode, recovery,
    s, k), blank-line separated, with a column header comment."""
    if not rows:
        raise ValueError("no rows to write")
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.mode, row.recovery, row.s, row.k), []).append(row)
    try:
        with open(path, "w") as fh:
            fh.write("# " + " ".join(CSV_COLUMNS) + "\n")
            for (mode, rec, s, k), members in groups.items():
                fh.write(f"\n# mode={mode} recovery={rec} s={s} k={k}\n")
                for row in members:
                    fh.write(" ".join(row.formatted()) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def parse_csv(path: str) -> list[ResultRow]:
    """Read back a CSV produced by emit_csv."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(CSV_COLUMNS):
            raise ValueError(f"unexpected header in {path}")
        for rec in reader:
            rows.append(ResultRow(
                scenario=rec["scenario"], n=int(rec["n"]), p=int(rec["p"]),
                rho=float(rec["rho"]), mode=rec["mode"],
                recovery=rec["recovery"], r=int(rec["r"]), s=int(rec["s"]),
                k=int(rec["k"]), c_half=float(rec["c_half"]),
                sigma=float(rec["sigma"]), delta_star=float(rec["delta_star"]),
                rate_emp=float(rec["rate_emp"]), rate_se=float(rec["rate_se"]),
                rate_R=float(rec["rate_R"]), rate_Ra=float(rec["rate_Ra"]),
                rate_Reff=float(rec["rate_Reff"]), rate_Rd=float(rec["rate_Rd"]),
                recov_rate=float(rec["recov_rate"]),
                bits_fed=int(rec["bits_fed"])))
    return rows
