"""Uplink training: LMMSE gain estimation, channel-budget penalties, block
grouping, and training-free chip matrices."""

import math

import numpy as np
import pytest

from csfb.feedback import required_channels
from csfb.harness import preset, run_experiment
from csfb.training import (block_diagonal_budget, channel_budget,
                           chip_sequence_matrix, lmmse_gain_estimate)


def test_lmmse_noiseless_limit():
    rho = 1e12
    a = 0.7 - 0.2j
    pilots = np.array([1.0 + 0.0j])
    received = math.sqrt(rho) * a * pilots
    est = lmmse_gain_estimate(pilots, received, rho)
    assert est.a_hat == pytest.approx(a, abs=1e-9)
    assert est.error_var < 1e-10


def test_lmmse_unit_pilot_variance():
    est = lmmse_gain_estimate(np.array([1.0]), np.array([0.3 + 0.1j]), 1.0)
    assert est.error_var == pytest.approx(0.5)


def test_lmmse_rejections():
    with pytest.raises(ValueError):
        lmmse_gain_estimate(np.zeros(2), np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        lmmse_gain_estimate(np.ones(2), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        lmmse_gain_estimate(np.ones(2), np.zeros(2), 0.0)


def test_lmmse_empirical_mse_matches_analytic():
    rho, tau, trials = 2.0, 2, 100_000
    rng = np.random.default_rng(61)
    pilots = np.ones(tau, dtype=complex)
    a = (rng.standard_normal(trials) + 1j * rng.standard_normal(trials)) / math.sqrt(2)
    w = (rng.standard_normal((trials, tau))
         + 1j * rng.standard_normal((trials, tau))) / math.sqrt(2)
    y = math.sqrt(rho) * a[:, None] * pilots + w
    # vectorized copy of the estimator, tied to the scalar path on a sample
    energy = float(np.vdot(pilots, pilots).real)
    a_hat = (y @ pilots.conj()) / math.sqrt(rho) / (1.0 / rho + energy)
    for i in range(50):
        est = lmmse_gain_estimate(pilots, y[i], rho)
        assert est.a_hat == pytest.approx(a_hat[i], abs=1e-12)
    var = lmmse_gain_estimate(pilots, y[0], rho).error_var
    mse = float(np.mean(np.abs(a_hat - a) ** 2))
    assert abs(mse - var) / var < 0.02


def test_lmmse_variance_decreases_with_pilots_and_snr():
    def var(tau, rho):
        return lmmse_gain_estimate(np.ones(tau), np.zeros(tau), rho).error_var

    taus = [var(t, 1.0) for t in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(taus, taus[1:]))
    rhos = [var(2, r) for r in (0.5, 1.0, 4.0, 16.0)]
    assert all(b < a for a, b in zip(rhos, rhos[1:]))


def test_channel_budget_perfect_knowledge_fixed_point():
    rep = channel_budget(100, 1, 10.0, 1.0, 0.0)
    assert rep.penalty_ratio == pytest.approx(1.0)
    assert rep.rho_equiv == pytest.approx(10.0)
    assert rep.r_noisy == rep.r_perfect


def test_channel_budget_reference_point():
    rep = channel_budget(100, 1, 10.0, 1.0, 0.1)
    assert rep.r_perfect == 2
    assert rep.r_noisy == 3
    assert rep.penalty_ratio == pytest.approx(1.3382908331057726, abs=1e-12)
    assert rep.penalty_ratio == pytest.approx(
        math.log(11.0) / math.log(6.0), abs=1e-12)
    assert rep.rho_equiv == pytest.approx(5.0)


def test_channel_budget_noise_never_helps():
    for tilde in (0.01, 0.1, 0.5, 2.0):
        rep = channel_budget(100, 3, 8.0, 1.2, tilde)
        assert rep.r_noisy >= rep.r_perfect
        assert rep.penalty_ratio > 1.0


def test_channel_budget_equivalent_snr_consistency():
    rng = np.random.default_rng(62)
    for _ in range(10):
        n = int(rng.integers(10, 500))
        k = int(rng.integers(1, n))
        rho = float(rng.uniform(0.5, 20.0))
        ahat = float(rng.uniform(0.2, 2.0))
        atil = float(rng.uniform(0.0, 1.0))
        rep = channel_budget(n, k, rho, ahat, atil)
        again = channel_budget(n, k, rep.rho_equiv, ahat, 0.0)
        assert again.r_perfect == rep.r_noisy
        assert abs(math.log1p(rep.rho_equiv * ahat)
                   - math.log1p(rho * ahat / (rho * atil + 1.0))) < 1e-9


def test_block_budget_single_group_collapses():
    assert (block_diagonal_budget(100, 6, 1, 0.4).channels
            == required_channels(100, 6, 0.4))


def test_block_budget_two_groups_reference():
    rep = block_diagonal_budget(100, 6, 2, 0.7)
    assert rep.channels == 16
    assert rep.per_group == 8
    assert rep.training_symbols == 50


def test_block_budget_divisibility():
    with pytest.raises(ValueError):
        block_diagonal_budget(100, 5, 2, 0.7)
    with pytest.raises(ValueError):
        block_diagonal_budget(99, 6, 2, 0.7)


def test_chip_matrix_entries_and_balance():
    mat = chip_sequence_matrix(100, 400, np.random.default_rng(55))
    assert mat.kind == "chip"
    assert np.all(np.isin(mat.a.real, (-1.0, 1.0)))
    assert not np.any(mat.a.imag)
    assert np.max(np.abs(mat.a.real.mean(axis=0))) <= 4.0 / math.sqrt(400)


def _shared_maxcorr_rate(kind, c_half):
    cfg = preset("custom", mode="analog", recovery="maxcorr", s_grid=(5,),
                 c_half_grid=(c_half,), ceil_channels=True, trials=2000,
                 seed=42, enforce_admissibility=False, matrix_kind=kind,
                 dedicated_noiseless=False, dedicated_noisy=False)
    rows = [row for row in run_experiment(cfg) if row.recovery == "maxcorr"]
    assert len(rows) == 1
    return rows[0].r, rows[0].rate_emp


def test_bernoulli_needs_extra_channels_for_parity():
    # real +-1 chips lose the phase averaging of complex Gaussian entries, so
    # the real-part cross-talk variance doubles and 19 channels are NOT within
    # a few percent of the Gaussian matrix; parity arrives near twice the
    # channel count
    r_g, gauss = _shared_maxcorr_rate("gaussian", 0.8)
    r_b, bern = _shared_maxcorr_rate("bernoulli", 0.8)
    assert (r_g, r_b) == (19, 19)
    assert gauss == pytest.approx(7.847121098772711, abs=1e-6)
    assert bern == pytest.approx(5.131567035711663, abs=1e-6)
    assert bern < 0.75 * gauss
    r_b2, bern2 = _shared_maxcorr_rate("bernoulli", 1.6)
    assert r_b2 == 37
    assert bern2 == pytest.approx(7.962674248068437, abs=1e-6)
    assert abs(bern2 - gauss) / gauss < 0.05
