import math

import numpy as np
import pytest

from csfb.channels import SystemParams, compute_sinr, generate_downlink
from csfb.feedback import (FeedbackConfig, analog_value_second_moment,
                           encode_analog, encode_digital,
                           generate_feedback_matrix, multi_thresholds,
                           required_channels, sigma_for_feedback_snr,
                           single_threshold, transmit)
from csfb.recovery import decompose_real

P4 = SystemParams(n=100, p=4, rho=10.0)


def test_required_channels_reference_points():
    assert required_channels(100, 6, 0.4) == 11
    assert required_channels(100, 1, 2.0, ceil=True) == 10


def test_required_channels_degenerate_sparsity():
    assert required_channels(100, 0, 0.4) == 0
    with pytest.raises(ValueError):
        required_channels(100, -1, 0.4)


def test_threshold_everyone_feeds_back():
    assert single_threshold(100, 100, P4) == 0.0


def test_threshold_reference_points():
    assert abs(single_threshold(100, 6, P4) - 1.435053) < 1e-6
    assert abs(single_threshold(100, 1, P4) - 3.175400) < 1e-6
    # coarse values quoted alongside the operating points
    assert abs(single_threshold(100, 6, P4) - 1.431) < 0.01
    assert abs(single_threshold(100, 1, P4) - 3.17) < 0.01


def test_multi_threshold_k1_matches_single():
    ths = multi_thresholds(100, 3, 1, P4)
    assert ths.k == 1
    assert abs(ths.zetas[0] - single_threshold(100, 3, P4)) < 1e-12


def test_multi_threshold_reference_points():
    ths = multi_thresholds(100, 1, 4, P4)
    assert abs(ths.zetas[0] - 1.757628) < 1e-6
    assert abs(ths.zetas[-1] - 3.175400) < 1e-6


def test_multi_threshold_equal_occupancy():
    from csfb.channels import sinr_ccdf
    n, s, k = 100, 2, 5
    ths = multi_thresholds(n, s, k, P4)
    tail = np.append(sinr_ccdf(ths.zetas, P4), 0.0)
    per = n * (tail[:-1] - tail[1:])
    assert np.allclose(per, s, atol=1e-7)


def test_identity_matrix_is_transparent_channel():
    cfg = FeedbackConfig(r=8, s=1, matrix_kind="identity")
    mat = generate_feedback_matrix(cfg, 8, np.random.default_rng(0))
    v = np.arange(8.0)
    meas = transmit(mat, v, 0.0, np.random.default_rng(1))
    assert np.allclose(meas.y, v)


def test_gaussian_matrix_entry_variance():
    cfg = FeedbackConfig(r=100, s=1)
    acc, cnt = 0.0, 0
    rng = np.random.default_rng(172)
    for _ in range(10):
        mat = generate_feedback_matrix(cfg, 100, rng)
        acc += np.sum(np.abs(mat.a) ** 2)
        cnt += mat.a.size
    var = acc / cnt
    assert 0.99 <= var <= 1.01


def test_block_diagonal_structure_count():
    cfg = FeedbackConfig(r=20, s=2, matrix_kind="block_diagonal", groups=2)
    mat = generate_feedback_matrix(cfg, 100, np.random.default_rng(0))
    assert np.count_nonzero(mat.a) == 2 * (10 * 50)


def test_encode_analog_infinite_threshold_empty():
    table = compute_sinr(generate_downlink(P4, np.random.default_rng(4)), P4)
    sv = encode_analog(table, 0, np.inf)
    assert sv.support.size == 0
    assert not np.any(sv.v)


def test_encode_analog_zero_threshold_single_beam():
    params = SystemParams(n=30, p=1, rho=1.0)
    table = compute_sinr(generate_downlink(params, np.random.default_rng(5)),
                         params)
    sv = encode_analog(table, 0, 0.0)
    assert sv.support.size == 30


def test_encode_analog_mean_support_targets_sparsity():
    # the threshold pins the per-beam tail at s/n, so each of the p beams
    # carries mean s members and the cross-beam total is p*s
    zeta = single_threshold(100, 6, P4)
    rng = np.random.default_rng(182)
    total = 0
    trials = 3000
    for _ in range(trials):
        table = compute_sinr(generate_downlink(P4, rng), P4)
        total += sum(encode_analog(table, m, zeta).support.size
                     for m in range(4))
    mean = total / trials
    assert abs(mean - 24.0) < 0.5
    assert abs(mean / 4 - 6.0) < 0.125


def test_encode_digital_disjoint_intervals():
    table = compute_sinr(generate_downlink(P4, np.random.default_rng(6)), P4)
    ths = multi_thresholds(100, 1, 4, P4)
    seen = [encode_digital(table, 0, ths.interval(i)).support
            for i in range(ths.k)]
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            assert np.intersect1d(seen[i], seen[j]).size == 0


def test_encode_digital_full_interval_single_beam():
    params = SystemParams(n=20, p=1, rho=1.0)
    table = compute_sinr(generate_downlink(params, np.random.default_rng(7)),
                         params)
    sv = encode_digital(table, 0, (0.0, np.inf))
    assert np.array_equal(sv.v, np.ones(20))


def test_encode_digital_mean_total_membership():
    # equal-occupancy intervals hold s users apiece per beam, so the grand
    # total across k intervals and p beams is p*k*s
    ths = multi_thresholds(100, 1, 4, P4)
    rng = np.random.default_rng(191)
    total = 0
    trials = 3000
    for _ in range(trials):
        table = compute_sinr(generate_downlink(P4, rng), P4)
        total += sum(encode_digital(table, m, ths.interval(i)).support.size
                     for m in range(4) for i in range(ths.k))
    mean = total / trials
    assert abs(mean - 16.0) < 0.4


def test_transmit_zero_vector_passes_noise():
    cfg = FeedbackConfig(r=6, s=1)
    mat = generate_feedback_matrix(cfg, 20, np.random.default_rng(8))
    meas = transmit(mat, np.zeros(20), 0.5, np.random.default_rng(9))
    assert np.allclose(meas.y, meas.w)


def test_transmit_noiseless_identity():
    cfg = FeedbackConfig(r=5, s=1, matrix_kind="identity")
    mat = generate_feedback_matrix(cfg, 5, np.random.default_rng(10))
    v = np.array([1.0, 0.0, 2.0, 0.0, 3.0])
    meas = transmit(mat, v, 0.0, np.random.default_rng(11))
    assert np.array_equal(meas.y, v.astype(complex))


def test_feedback_snr_sanity_single_active():
    # energy-ratio check pinned at s=1 where the per-active definition and
    # the aggregate ratio coincide
    zeta = single_threshold(100, 1, P4)
    sigma = sigma_for_feedback_snr(10.0, "analog", P4, zeta)
    second = analog_value_second_moment(P4, zeta)
    cfg = FeedbackConfig(r=10, s=1, sigma=sigma)
    rng = np.random.default_rng(200)
    sig_acc, noise_acc = 0.0, 0.0
    for _ in range(10 ** 4):
        mat = generate_feedback_matrix(cfg, 100, rng)
        v = np.zeros(100)
        v[rng.integers(100)] = math.sqrt(second)
        meas = transmit(mat, v, sigma, rng)
        sig_acc += np.sum(np.abs(meas.y - meas.w) ** 2)
        noise_acc += np.sum(np.abs(meas.w) ** 2)
    assert abs(sig_acc / noise_acc - 10.0) < 0.2


def test_decompose_real_imaginary_half_of_real_matrix():
    cfg = FeedbackConfig(r=7, s=1, matrix_kind="bernoulli")
    mat = generate_feedback_matrix(cfg, 25, np.random.default_rng(12))
    v = np.zeros(25)
    v[3] = 2.0
    meas = transmit(mat, v, 0.3, np.random.default_rng(13))
    y, a_hat, scale = decompose_real(meas, mat)
    assert np.allclose(y[7:], meas.w.imag)


def test_decompose_real_roundtrip():
    cfg = FeedbackConfig(r=9, s=2)
    mat = generate_feedback_matrix(cfg, 40, np.random.default_rng(14))
    v = np.zeros(40)
    v[[5, 17]] = [1.5, 0.7]
    meas = transmit(mat, v, 0.0, np.random.default_rng(15))
    y, a_hat, scale = decompose_real(meas, mat)
    assert np.max(np.abs(a_hat @ (scale * v) - y)) < 1e-12


def test_decompose_real_noise_halves():
    cfg = FeedbackConfig(r=50, s=1)
    rng = np.random.default_rng(249)
    acc, cnt = 0.0, 0
    for _ in range(400):
        mat = generate_feedback_matrix(cfg, 10, rng)
        meas = transmit(mat, np.zeros(10), 1.0, rng)
        y, a_hat, scale = decompose_real(meas, mat)
        acc += np.sum(y ** 2)
        cnt += y.size
    assert abs(acc / cnt - 0.5) < 0.01
