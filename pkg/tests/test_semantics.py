"""Score function tests: exact pins, frozen derived values, metric properties."""
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tosasched.semantics import (
    AoiConfig,
    SimilarityConfig,
    aoi_of_delivery,
    deadline_violated,
    freshness_score,
    max_novelty,
    raw_similarity,
    reward,
    similarity_score,
)
from tosasched.traffic import CncPacket

# Independently computed at 50-digit precision.
F_AT_ZERO = -0.98661429815143029
F_AT_POINT1 = 0.98661429815143029
AOI_128B_20MHZ_SNR3610 = 5.4153842090460502e-7


def packet(row=0.0, pitch=0.0, yaw=0.0, thrust=0.0, seq=0, run=0):
    return CncPacket(row, pitch, yaw, thrust, gen_time_s=seq * 1e-3, seq_index=seq, run_id=run)


def packets_strategy():
    return st.builds(
        packet,
        row=st.floats(-35, 35),
        pitch=st.floats(-35, 35),
        yaw=st.floats(-150, 150),
        thrust=st.floats(-5, 5),
    )


def test_identical_packets_have_zero_gap():
    cfg = SimilarityConfig()
    p = packet(yaw=30.0, thrust=3.0)
    assert raw_similarity(p, p, cfg) == 0.0


def test_yaw_step_gap_is_tenth():
    cfg = SimilarityConfig()
    assert raw_similarity(packet(yaw=30.0), packet(yaw=0.0), cfg) == pytest.approx(0.1, rel=1e-15)


def test_full_range_gap_is_four():
    cfg = SimilarityConfig()
    lo = packet(row=-35, pitch=-35, yaw=-150, thrust=-5)
    hi = packet(row=35, pitch=35, yaw=150, thrust=5)
    assert raw_similarity(lo, hi, cfg) == pytest.approx(4.0, rel=1e-15)


def test_max_novelty_is_weight_sum():
    assert max_novelty(SimilarityConfig()) == 4.0
    assert max_novelty(SimilarityConfig(weights=(0.5, 0.5, 1.0, 0.0))) == 2.0


@settings(max_examples=60)
@given(a=packets_strategy(), b=packets_strategy())
def test_gap_is_symmetric(a, b):
    cfg = SimilarityConfig()
    assert raw_similarity(a, b, cfg) == raw_similarity(b, a, cfg)


@settings(max_examples=60)
@given(a=packets_strategy(), b=packets_strategy(), c=packets_strategy())
def test_gap_triangle_inequality(a, b, c):
    cfg = SimilarityConfig()
    assert raw_similarity(a, c, cfg) <= raw_similarity(a, b, cfg) + raw_similarity(b, c, cfg) + 1e-12


def test_score_zero_at_cutoff_exactly():
    cfg = SimilarityConfig(kappa=100.0, zeta=0.05)
    assert similarity_score(cfg.zeta, cfg) == 0.0


def test_score_frozen_values():
    cfg = SimilarityConfig(kappa=100.0, zeta=0.05)
    assert similarity_score(0.0, cfg) == pytest.approx(F_AT_ZERO, rel=1e-12)
    assert similarity_score(0.1, cfg) == pytest.approx(F_AT_POINT1, rel=1e-12)


@settings(max_examples=60)
@given(x=st.floats(0.0, 0.05))
def test_score_antisymmetric_about_cutoff(x):
    cfg = SimilarityConfig(kappa=100.0, zeta=0.05)
    assert similarity_score(cfg.zeta + x, cfg) == pytest.approx(-similarity_score(cfg.zeta - x, cfg), abs=1e-12)


@settings(max_examples=60)
@given(l1=st.floats(0.0, 4.0), delta=st.floats(1e-6, 1.0))
def test_score_strictly_increasing_and_bounded(l1, delta):
    cfg = SimilarityConfig(kappa=3.0, zeta=0.5)
    s1 = similarity_score(l1, cfg)
    s2 = similarity_score(l1 + delta, cfg)
    assert s1 < s2
    assert -1 < s1 < 1 and -1 < s2 < 1


def test_score_rejects_negative_gap():
    with pytest.raises(ValueError):
        similarity_score(-0.01, SimilarityConfig())


def test_aoi_frozen_value():
    cfg = AoiConfig(tti_seconds=1e-3, payload_bits=128, bandwidth_hz=20e6)
    assert aoi_of_delivery(3.61e3, cfg) == pytest.approx(AOI_128B_20MHZ_SNR3610, rel=1e-12)


def test_aoi_at_unit_snr():
    cfg = AoiConfig()
    assert aoi_of_delivery(1.0, cfg) == pytest.approx(cfg.payload_bits / cfg.bandwidth_hz, rel=1e-15)


def test_aoi_monotone_in_snr():
    cfg = AoiConfig()
    snrs = [0.5, 1.0, 10.0, 100.0, 3.6e3]
    ages = [aoi_of_delivery(s, cfg) for s in snrs]
    assert all(a > b for a, b in zip(ages, ages[1:]))


def test_aoi_rejects_nonpositive_snr():
    for snr in (0.0, -1.0):
        with pytest.raises(ValueError):
            aoi_of_delivery(snr, AoiConfig())


def test_freshness_endpoints_exact():
    cfg = AoiConfig(tti_seconds=1e-3)
    assert freshness_score(0.0, cfg) == 1.0
    assert freshness_score(cfg.tti_seconds, cfg) == 0.0


def test_freshness_frozen_value():
    cfg = AoiConfig(tti_seconds=1e-3)
    assert freshness_score(5.41e-7, cfg) == pytest.approx(0.999459, abs=1e-6)


def test_freshness_clamps_and_flags_deadline():
    cfg = AoiConfig(tti_seconds=1e-3)
    assert freshness_score(2e-3, cfg) == 0.0
    assert deadline_violated(2e-3, cfg)
    assert not deadline_violated(0.5e-3, cfg)


def test_reward_table():
    assert reward(False, False, 0.9, 0.9) == 0.0
    assert reward(True, False, 0.9, 0.9) == 0.0
    assert reward(True, True, F_AT_POINT1, 0.99946) == pytest.approx(0.98661429815143029 * 0.99946, rel=1e-12)
    assert reward(True, True, F_AT_ZERO, 0.9) < 0  # duplicate content costs


@settings(max_examples=60)
@given(f=st.floats(-0.999, 0.999), g=st.floats(0.0, 1.0))
def test_reward_magnitude_bounded_by_score(f, g):
    r = reward(True, True, f, g)
    assert abs(r) <= abs(f)
    assert -1 < r < 1


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(weights=(0.0, 0.0, 0.0, 0.0)),
        dict(weights=(-1.0, 1.0, 1.0, 1.0)),
        dict(ranges=(70.0, 0.0, 300.0, 10.0)),
        dict(kappa=0.0),
        dict(zeta=-0.1),
        dict(zeta=4.0),
    ],
)
def test_similarity_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimilarityConfig(**kwargs)


def test_aoi_config_validation():
    with pytest.raises(ValueError):
        AoiConfig(tti_seconds=0.0)
    with pytest.raises(ValueError):
        AoiConfig(bandwidth_hz=-1.0)
