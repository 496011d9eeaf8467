import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
)  # noqa: E402
from comms import polar  # noqa: E402
from comms.channel import awgn, snr_db_to_sigma  # noqa: E402
from comms.evaluate import StopRule, estimate_bler, standard_error  # noqa: E402
from utils.random_streams import EVALUATION, POLAR, make_rng  # noqa: E402


def noisy_llrs(cfg, blocks, snr_db, seed=0):
    rng = make_rng(seed, POLAR)
    bits = rng.integers(0, 2, size=(blocks, cfg.k_info)).astype(np.int8)
    sigma = snr_db_to_sigma(snr_db)
    y = awgn(polar.bpsk_modulate(polar.encode_messages(bits, cfg)), sigma, rng)
    return bits, polar.bpsk_llr(y, sigma)


def test_construct_5g_32_16():
    cfg = polar.construct(32, 16, crc_len=6)
    assert len(cfg.frozen) == 10
    most_reliable = set(polar.NR_RELIABILITY_32[-22:])
    assert not set(cfg.frozen) & most_reliable
    assert list(cfg.info_positions) == sorted(most_reliable)
    assert cfg.order == 5


def test_construct_without_frozen_channels():
    cfg = polar.construct(32, 32, crc_len=0)
    assert cfg.frozen == ()
    assert not cfg.frozen_mask.any()


def test_construct_is_deterministic():
    assert polar.construct(32, 16) == polar.construct(32, 16)
    a = polar.construct(64, 20, construction=polar.BHATTACHARYYA, design_snr_db=1.0)
    b = polar.construct(64, 20, construction=polar.BHATTACHARYYA, design_snr_db=1.0)
    assert a == b


def test_construct_rejects_bad_parameters():
    with pytest.raises(polar.PolarConfigError):
        polar.construct(32, 30, crc_len=6)
    with pytest.raises(polar.PolarConfigError):
        polar.construct(24, 8)
    with pytest.raises(polar.PolarConfigError):
        polar.construct(64, 16)  # 5G table stops at 32
    with pytest.raises(polar.PolarConfigError):
        polar.construct(32, 16, crc_len=5)


def test_bhattacharyya_order_extremes():
    order = polar.reliability_order(32, polar.BHATTACHARYYA, design_snr_db=2.0)
    assert sorted(order) == list(range(32))
    assert order[0] == 0
    assert order[-1] == 31


def test_crc_of_zero_message_is_zero():
    assert not polar.crc_remainder(np.zeros((1, 16), dtype=np.int8)).any()


def test_crc_detects_every_single_bit_flip():
    rng = np.random.default_rng(0)
    words = polar.crc_attach(rng.integers(0, 2, size=(200, 16)))
    assert polar.crc_check(words).all()
    for position in range(words.shape[1]):
        flipped = words.copy()
        flipped[:, position] ^= 1
        assert not polar.crc_check(flipped).any()


def test_crc_passes_attached_words():
    words = polar.crc_attach(np.random.default_rng(1).integers(0, 2, size=(10_000, 16)))
    assert polar.crc_check(words).all()
    assert words.shape == (10_000, 22)


def test_crc_false_pass_rate_on_random_words():
    trials = 200_000
    words = np.random.default_rng(2).integers(0, 2, size=(trials, 22))
    rate = polar.crc_check(words).mean()
    expected = 1.0 / 64.0
    assert abs(rate - expected) < 4 * np.sqrt(expected * (1 - expected) / trials)


def test_polar_encode_examples():
    assert not polar.polar_encode(np.zeros(8, dtype=np.int8)).any()
    assert list(polar.polar_encode([0, 1])) == [1, 1]
    assert list(polar.polar_encode([1, 0])) == [1, 0]


@pytest.mark.parametrize("n_code", [2, 4, 8, 16, 32])
def test_polar_encode_matches_generator_matrix(n_code):
    u = np.random.default_rng(n_code).integers(0, 2, size=(64, n_code))
    expected = (u @ polar.generator_matrix(n_code)) % 2
    assert np.array_equal(polar.polar_encode(u), expected)


def test_bpsk_mapping_and_llr():
    assert list(polar.bpsk_modulate([0, 1])) == [1.0, -1.0]
    assert polar.bpsk_llr(np.array([0.5]), 1.0)[0] == pytest.approx(1.0)
    assert polar.bpsk_llr(np.array([-2.0]), 2.0)[0] == pytest.approx(-1.0)
    assert not polar.bpsk_llr(np.array([3.0, -1.0]), float("inf")).any()


@pytest.mark.parametrize("list_size", [1, 2, 4, 8])
def test_noiseless_decoding_recovers_messages(list_size):
    cfg = polar.construct(32, 16, crc_len=6, list_size=list_size)
    bits = np.random.default_rng(list_size).integers(0, 2, size=(100, 16)).astype(np.int8)
    llrs = polar.bpsk_llr(polar.bpsk_modulate(polar.encode_messages(bits, cfg)), 1.0)
    decoded, crc_ok = polar.scl_decode(llrs, cfg)
    assert np.array_equal(decoded, bits)
    assert crc_ok.all()


def test_noiseless_sc_decoding():
    cfg = polar.construct(16, 8, crc_len=0, list_size=1)
    bits = np.random.default_rng(3).integers(0, 2, size=(20, 8)).astype(np.int8)
    llrs = polar.bpsk_llr(polar.bpsk_modulate(polar.encode_messages(bits, cfg)), 0.5)
    assert np.array_equal(polar.sc_decode(llrs, cfg), bits)


def test_list_of_one_matches_plain_successive_cancellation():
    cfg = polar.construct(32, 16, crc_len=6, list_size=1)
    _, llrs = noisy_llrs(cfg, 10_000, 1.0)
    decoded, _ = polar.scl_decode(llrs, cfg)
    assert np.array_equal(decoded, polar.sc_decode(llrs, cfg))


def test_larger_list_makes_fewer_errors():
    bits, llrs = noisy_llrs(polar.construct(32, 16), 2000, 1.0, seed=4)
    errors = {}
    for list_size in (1, 8):
        cfg = polar.construct(32, 16, crc_len=6, list_size=list_size)
        decoded, _ = polar.scl_decode(llrs, cfg)
        errors[list_size] = int(np.any(decoded != bits, axis=1).sum())
    assert errors[8] < errors[1]


def test_surviving_paths_have_non_negative_metrics():
    cfg = polar.construct(32, 16, crc_len=6, list_size=4)
    _, llrs = noisy_llrs(cfg, 50, 2.0, seed=5)
    u, metric = polar.scl_decode_paths(llrs, cfg)
    assert u.shape == (50, 4, 32)
    assert np.all(metric >= 0)
    assert np.all(np.isfinite(metric))
    assert not u[:, :, list(cfg.frozen)].any()


def test_decoder_rejects_bad_llrs():
    cfg = polar.construct(32, 16)
    with pytest.raises(polar.PolarConfigError):
        polar.scl_decode(np.zeros((2, 16)), cfg)
    with pytest.raises(ValueError):
        polar.scl_decode(np.full((1, 32), np.nan), cfg)


def test_polar_system_transmit():
    cfg = polar.construct(32, 16, list_size=2)
    system = polar.PolarSystem(cfg, chunk=300)
    bits = np.random.default_rng(6).integers(0, 2, size=(700, 16)).astype(np.float64)
    decoded = system.transmit(bits, 30.0, make_rng(0, EVALUATION))
    assert decoded.shape == bits.shape
    assert np.array_equal(decoded, bits)
    assert system.name == "polar-L2"
    assert (system.k, system.n) == (16, 32)


@pytest.mark.slow
def test_bler_at_3_5_db_meets_target():
    cfg = polar.construct(32, 16, crc_len=6, list_size=8)
    point = estimate_bler(
        polar.PolarSystem(cfg),
        3.5,
        StopRule(min_block_errors=100, max_blocks=1_000_000, batch=5000),
        make_rng(0, EVALUATION, 0),
    )
    assert point.bler <= 1e-3


@pytest.mark.slow
def test_bler_non_increasing_in_list_size_at_2_5_db():
    stop = StopRule(min_block_errors=200, max_blocks=2_000_000, batch=5000)
    points = []
    for list_size in (2, 4, 8):
        cfg = polar.construct(32, 16, crc_len=6, list_size=list_size)
        point = estimate_bler(polar.PolarSystem(cfg), 2.5, stop, make_rng(0, EVALUATION, 1))
        points.append(point)
    for short_list, long_list in zip(points, points[1:]):
        slack = 2.0 * math.hypot(standard_error(short_list), standard_error(long_list))
        assert long_list.bler <= short_list.bler + slack
