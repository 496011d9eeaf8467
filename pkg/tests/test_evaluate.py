import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
)  # noqa: E402
from comms import evaluate, polar  # noqa: E402
from comms.evaluate import BlerCurve, BlerPoint, StopRule, UnbracketedError  # noqa: E402
from utils.random_streams import EVALUATION, make_rng  # noqa: E402


class IdentitySystem:
    k = 8

    def transmit(self, bits, snr_db, rng):
        return bits.copy()


class GuessingSystem:
    k = 16

    def transmit(self, bits, snr_db, rng):
        return rng.integers(0, 2, size=bits.shape)


class AlwaysWrongSystem:
    k = 4

    def transmit(self, bits, snr_db, rng):
        return 1 - bits


def curve_of(*points):
    return BlerCurve([BlerPoint(snr, blocks, errors) for snr, blocks, errors in points])


def test_hard_decision():
    assert list(evaluate.hard_decision([0.3, 0.7, 0.5, 0.51])) == [0, 1, 0, 1]


def test_perfect_system_runs_to_block_budget():
    point = evaluate.estimate_bler(
        IdentitySystem(), 5.0, StopRule(max_blocks=1000, batch=300), make_rng(0, 1)
    )
    assert (point.blocks, point.block_errors, point.bler) == (1000, 0, 0.0)


def test_guessing_system_fails_nearly_every_block():
    point = evaluate.estimate_bler(
        GuessingSystem(), 0.0, StopRule(min_block_errors=100), make_rng(0, 2)
    )
    assert point.block_errors == 100
    assert abs(point.bler - (1 - 2.0**-16)) < 0.02


def test_error_target_cuts_inside_a_batch():
    point = evaluate.estimate_bler(
        AlwaysWrongSystem(), 0.0, StopRule(min_block_errors=37, batch=1000), make_rng(0, 3)
    )
    assert (point.blocks, point.block_errors) == (37, 37)


def test_estimate_is_reproducible():
    cfg = polar.construct(16, 6, crc_len=0, list_size=1)
    stop = StopRule(min_block_errors=20, max_blocks=5000, batch=500)
    a = evaluate.estimate_bler(polar.PolarSystem(cfg), 1.0, stop, make_rng(5, EVALUATION, 0))
    b = evaluate.estimate_bler(polar.PolarSystem(cfg), 1.0, stop, make_rng(5, EVALUATION, 0))
    assert a == b


def test_stop_rule_and_point_validation():
    with pytest.raises(ValueError):
        StopRule(min_block_errors=0)
    with pytest.raises(ValueError):
        BlerPoint(1.0, 10, 11)
    with pytest.raises(ValueError):
        BlerPoint(1.0, 0, 0)


def test_standard_error():
    assert evaluate.standard_error(BlerPoint(0.0, 100, 50)) == pytest.approx(0.05)
    assert evaluate.standard_error(BlerPoint(0.0, 100, 0)) == 0.0


def test_curve_requires_increasing_snr():
    with pytest.raises(ValueError):
        curve_of((1.0, 10, 1), (1.0, 10, 1))


def test_curve_csv_round_trip():
    curve = BlerCurve(
        [BlerPoint(0.0, 1000, 400), BlerPoint(0.5, 2000, 100)], {"seed": "3", "k": "16"}
    )
    text = curve.to_csv()
    assert text.splitlines()[2] == evaluate.CSV_HEADER
    parsed = BlerCurve.from_csv(text)
    assert parsed.points == curve.points
    assert parsed.metadata == curve.metadata
    with pytest.raises(ValueError):
        BlerCurve.from_csv("snr,blocks\n1,2\n")


def test_bler_curve_points_and_metadata():
    cfg = polar.construct(16, 6, crc_len=0, list_size=1)
    system = polar.PolarSystem(cfg)
    stop = StopRule(min_block_errors=20, max_blocks=4000, batch=1000)
    curve = evaluate.bler_curve(system, [0.0, 2.0, 4.0], stop, seed=9, metadata={"model": "sc"})
    assert list(curve.snr_db) == [0.0, 2.0, 4.0]
    assert curve.metadata["seed"] == "9"
    assert curve.metadata["k"] == "6"
    assert curve.metadata["n"] == "16"
    assert curve.metadata["model"] == "sc"
    # each point owns its stream, so a single-point run reproduces point 1
    alone = evaluate.estimate_bler(system, 2.0, stop, make_rng(9, EVALUATION, 1))
    assert curve.points[1] == alone


def test_worker_count_does_not_change_results():
    cfg = polar.construct(16, 6, crc_len=0, list_size=2)
    system = polar.PolarSystem(cfg)
    stop = StopRule(min_block_errors=10, max_blocks=2000, batch=500)
    serial = evaluate.bler_curve(system, [0.0, 1.0, 2.0], stop, seed=4, workers=1)
    parallel = evaluate.bler_curve(system, [0.0, 1.0, 2.0], stop, seed=4, workers=2)
    assert serial.to_csv() == parallel.to_csv()


def test_threshold_interpolates_on_log_bler():
    curve = curve_of((2.0, 10_000, 100), (3.0, 1_000_000, 100))
    assert evaluate.threshold_snr(curve, 1e-3) == pytest.approx(2.5)


def test_threshold_exact_hit():
    curve = curve_of((1.0, 1000, 100), (2.0, 100_000, 100), (3.0, 1_000_000, 10))
    assert evaluate.threshold_snr(curve, 1e-3) == 2.0


def test_threshold_zero_error_point_uses_one_over_blocks():
    curve = curve_of((1.0, 1000, 100), (2.0, 100_000, 0))
    assert evaluate.threshold_snr(curve, 1e-3) == pytest.approx(1.5)
    coarse = curve_of((2.0, 100_000, 200), (4.0, 1_000_000, 0))
    expected = 2.0 + 2.0 * math.log10(2.0) / math.log10(2000.0)
    assert evaluate.threshold_snr(coarse, 1e-3) == pytest.approx(expected)
    assert evaluate.threshold_snr(coarse, 1e-3) < 2.2


def test_threshold_zero_error_point_with_small_budget():
    curve = curve_of((1.0, 1000, 100), (2.0, 500, 0))
    assert evaluate.threshold_snr(curve, 1e-3) == 2.0


def test_threshold_unbracketed():
    above = curve_of((0.0, 1000, 500), (1.0, 1000, 100))
    with pytest.raises(UnbracketedError):
        evaluate.threshold_snr(above, 1e-3)
    below = curve_of((5.0, 1_000_000, 10), (6.0, 1_000_000, 1))
    with pytest.raises(UnbracketedError):
        evaluate.threshold_snr(below, 1e-3)


def test_identity_curve_bler_zero():
    curve = evaluate.bler_curve(
        IdentitySystem(), [0.0, 1.0], StopRule(max_blocks=500, batch=500), seed=0
    )
    assert np.all(curve.bler == 0.0)
