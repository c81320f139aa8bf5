"""Link model tests: frozen high-precision values, closed-form tails, seeding."""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tosasched.channel import (
    ChannelParams,
    Geometry,
    db_to_linear,
    dbm_to_watts,
    draw_link,
    los_probability,
    mean_channel_gain,
    realize_link,
    sample_position,
    success_probability,
)

# Values computed independently with 50-digit arithmetic.
P_LOS_AT_A = 0.07722007722007722
P_LOS_AT_90 = 0.99978534605798358
FREE_SPACE_100M_5GHZ = 2.2797266319525999e-9
SNR_100M_UNIT_ETA = 3613.1232196539779
GAMMA_TH_5_5DB = 3.5481338923357546


def unit_eta_params() -> ChannelParams:
    return ChannelParams(eta_los=1.0, eta_nlos=1.0)


def test_db_conversions():
    assert db_to_linear(0.0) == 1.0
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-15)
    assert db_to_linear(5.5) == pytest.approx(GAMMA_TH_5_5DB, rel=1e-15)


def test_los_probability_frozen_values():
    params = ChannelParams()
    assert los_probability(11.95, params) == pytest.approx(P_LOS_AT_A, rel=1e-12)
    assert los_probability(90.0, params) == pytest.approx(P_LOS_AT_90, rel=1e-12)


def test_los_probability_rejects_bad_angles():
    params = ChannelParams()
    for theta in (0.0, -5.0, 90.001, 180.0):
        with pytest.raises(ValueError):
            los_probability(theta, params)


@settings(max_examples=60)
@given(
    theta1=st.floats(0.1, 89.0),
    delta=st.floats(0.01, 1.0),
    a=st.floats(0.5, 30.0),
    b=st.floats(0.01, 1.0),
)
def test_los_probability_strictly_increasing(theta1, delta, a, b):
    theta2 = min(theta1 + delta, 90.0)
    # strictness is only observable below float64 saturation of the logistic
    assume(b * (theta2 - a) < 34.0)
    params = ChannelParams(env_a=a, env_b=b)
    assert los_probability(theta1, params) < los_probability(theta2, params)


@settings(max_examples=40)
@given(theta=st.floats(0.001, 90.0))
def test_los_plus_nlos_is_one(theta):
    params = ChannelParams()
    p = los_probability(theta, params)
    assert 0 < p < 1
    assert p + (1 - p) == 1.0


def test_mean_gain_equal_etas_ignores_angle():
    params = unit_eta_params()
    g1 = mean_channel_gain(200.0, 10.0, params)
    g2 = mean_channel_gain(200.0, 80.0, params)
    assert g1 == pytest.approx(g2, rel=1e-15)
    assert g1 == pytest.approx((4 * math.pi * 200.0 * 5e9 / 3e8) ** -2, rel=1e-14)


def test_mean_gain_frozen_value():
    assert mean_channel_gain(100.0, 45.0, unit_eta_params()) == pytest.approx(FREE_SPACE_100M_5GHZ, rel=1e-12)


def test_mean_gain_power_law():
    params = unit_eta_params()
    assert mean_channel_gain(100.0, 45.0, params) / mean_channel_gain(200.0, 45.0, params) == pytest.approx(4.0, rel=1e-12)


def test_mean_gain_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        mean_channel_gain(0.0, 45.0, ChannelParams())


def test_realize_link_snr_and_threshold():
    geom = Geometry.from_offset(100.0, 0.0, 0.0)
    link = realize_link(geom, unit_eta_params(), fading_power=1.0)
    assert link.snr_linear == pytest.approx(SNR_100M_UNIT_ETA, rel=1e-12)
    assert link.success  # ~35.6 dB >> 5.5 dB
    assert link.composite_gain == pytest.approx(link.mean_gain, rel=1e-15)


def test_zero_fading_never_succeeds():
    geom = Geometry.from_offset(100.0, 0.0, 0.0)
    link = realize_link(geom, ChannelParams(), fading_power=0.0)
    assert link.snr_linear == 0.0
    assert not link.success


def test_draw_link_seed_reproducibility():
    geom = Geometry.from_offset(100.0, 500.0, 300.0)
    params = ChannelParams()
    a = [draw_link(geom, params, np.random.default_rng(5)) for _ in range(1)]
    b = [draw_link(geom, params, np.random.default_rng(5)) for _ in range(1)]
    assert a == b


def test_success_matches_threshold_exactly():
    geom = Geometry.from_offset(100.0, 500.0, 400.0)
    params = ChannelParams()
    rng = np.random.default_rng(11)
    for _ in range(200):
        link = draw_link(geom, params, rng)
        assert link.success == (link.snr_linear >= params.snr_threshold_linear)


def test_monte_carlo_success_probability_matches_closed_form():
    params = ChannelParams()
    geom = Geometry.from_offset(100.0, 500.0, 350.0)
    p = success_probability(geom, params)
    rng = np.random.default_rng(42)
    n = 1_000_000
    fading = rng.exponential(size=n)
    link1 = realize_link(geom, params, 1.0)
    freq = np.mean(link1.snr_linear * fading >= params.snr_threshold_linear)
    assert abs(freq - p) < 0.005
    assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_sample_position_overhead_when_radius_zero():
    geom = sample_position(0.0, 100.0, np.random.default_rng(0))
    assert geom.distance_m == pytest.approx(100.0)
    assert geom.elevation_deg == pytest.approx(90.0)


def test_geometry_derivation_frozen():
    geom = Geometry.from_offset(100.0, 500.0, 100.0)
    assert geom.distance_m == pytest.approx(141.4213562373095, rel=1e-14)
    assert geom.elevation_deg == pytest.approx(45.0, rel=1e-14)


def test_sample_position_uniform_disk_moment():
    rng = np.random.default_rng(7)
    radius = 500.0
    r2 = np.array([sample_position(radius, 100.0, rng).horizontal_offset_m ** 2 for _ in range(100_000)])
    assert abs(r2.mean() - radius**2 / 2) < 0.02 * radius**2 / 2


def test_sample_position_within_disk_and_elevation_range():
    rng = np.random.default_rng(3)
    for _ in range(500):
        g = sample_position(250.0, 80.0, rng)
        assert 0 <= g.horizontal_offset_m <= 250.0
        assert g.distance_m >= 80.0
        assert 0 < g.elevation_deg <= 90.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(carrier_frequency_hz=0.0),
        dict(tx_power_w=-1.0),
        dict(noise_power_w=0.0),
        dict(eta_los=1.5),
        dict(eta_los=0.01, eta_nlos=0.5),
        dict(eta_nlos=0.0),
        dict(path_loss_exponent=2.0),
        dict(snr_threshold_linear=0.0),
        dict(env_a=-1.0),
    ],
)
def test_channel_params_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelParams(**kwargs)
