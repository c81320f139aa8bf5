"""Air-to-ground link model for the GCS -> UAV downlink.

Free-space path gain with an elevation-dependent LoS/NLoS excess-loss
mixture and Rayleigh small-scale fading. All quantities are linear
(watts, linear gains); dB/dBm conversion happens once at config load.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_M_S = 3.0e8


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget constants, all in linear units.

    The path gain convention is multiplicative: with a negative
    path-loss exponent the free-space factor (4*pi*d*fc/c)**alpha is
    below one, and the LoS/NLoS coefficients are excess-loss factors
    in (0, 1].
    """

    carrier_frequency_hz: float = 5.0e9
    speed_of_light_m_s: float = SPEED_OF_LIGHT_M_S
    path_loss_exponent: float = -2.0
    eta_los: float = db_to_linear(-1.0)
    eta_nlos: float = db_to_linear(-20.0)
    env_a: float = 11.95
    env_b: float = 0.14
    tx_power_w: float = dbm_to_watts(18.0)
    noise_power_w: float = dbm_to_watts(-104.0)
    snr_threshold_linear: float = db_to_linear(5.5)
    bandwidth_hz: float = 20.0e6

    def __post_init__(self) -> None:
        if self.carrier_frequency_hz <= 0:
            raise ValueError("carrier_frequency_hz must be > 0")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.tx_power_w <= 0:
            raise ValueError("tx_power_w must be > 0")
        if self.noise_power_w <= 0:
            raise ValueError("noise_power_w must be > 0")
        if not (0 < self.eta_nlos <= self.eta_los <= 1):
            raise ValueError("require 0 < eta_nlos <= eta_los <= 1")
        if self.path_loss_exponent >= 0:
            raise ValueError("path_loss_exponent must be < 0 under the gain convention")
        if self.snr_threshold_linear <= 0:
            raise ValueError("snr_threshold_linear must be > 0")
        if self.env_a <= 0 or self.env_b <= 0:
            raise ValueError("env_a and env_b must be > 0")


@dataclass(frozen=True)
class Geometry:
    """UAV position relative to the ground station antenna."""

    height_m: float
    ground_radius_m: float
    horizontal_offset_m: float
    distance_m: float
    elevation_deg: float

    @classmethod
    def from_offset(cls, height_m: float, ground_radius_m: float, horizontal_offset_m: float) -> "Geometry":
        if height_m <= 0:
            raise ValueError("height_m must be > 0")
        if not (0 <= horizontal_offset_m <= ground_radius_m) and ground_radius_m > 0:
            raise ValueError("horizontal_offset_m must lie in [0, ground_radius_m]")
        d = math.hypot(height_m, horizontal_offset_m)
        theta = math.degrees(math.asin(height_m / d))
        return cls(height_m, ground_radius_m, horizontal_offset_m, d, theta)


@dataclass(frozen=True)
class LinkRealization:
    """One channel draw: |beta|^2 times the deterministic gain, plus the decode outcome."""

    fading_power: float
    p_los: float
    mean_gain: float
    composite_gain: float
    snr_linear: float
    success: bool


def los_probability(theta_deg: float, params: ChannelParams) -> float:
    """LoS probability 1 / (1 + a*exp(-b*(theta - a))) for elevation theta in (0, 90]."""
    if not (0 < theta_deg <= 90):
        raise ValueError(f"elevation angle must be in (0, 90], got {theta_deg}")
    return 1.0 / (1.0 + params.env_a * math.exp(-params.env_b * (theta_deg - params.env_a)))


def mean_channel_gain(d_m: float, theta_deg: float, params: ChannelParams) -> float:
    """Deterministic part of the channel gain (fading factor excluded).

    Mixes the LoS/NLoS excess-loss coefficients by the LoS probability
    and applies the free-space power law (4*pi*d*fc/c)**alpha.
    """
    if d_m <= 0:
        raise ValueError(f"distance must be > 0, got {d_m}")
    p_los = los_probability(theta_deg, params)
    eta_mix = p_los * params.eta_los + (1.0 - p_los) * params.eta_nlos
    free_space = (4.0 * math.pi * d_m * params.carrier_frequency_hz / params.speed_of_light_m_s) ** params.path_loss_exponent
    return eta_mix * free_space


def realize_link(geometry: Geometry, params: ChannelParams, fading_power: float) -> LinkRealization:
    """Deterministic link outcome for a given squared-fading draw."""
    if fading_power < 0:
        raise ValueError("fading_power must be >= 0")
    p_los = los_probability(geometry.elevation_deg, params)
    mean_gain = mean_channel_gain(geometry.distance_m, geometry.elevation_deg, params)
    composite = mean_gain * fading_power
    snr = params.tx_power_w * composite / params.noise_power_w
    return LinkRealization(
        fading_power=fading_power,
        p_los=p_los,
        mean_gain=mean_gain,
        composite_gain=composite,
        snr_linear=snr,
        success=bool(snr >= params.snr_threshold_linear),
    )


def draw_link(geometry: Geometry, params: ChannelParams, rng: np.random.Generator) -> LinkRealization:
    """Draw one link realization; |beta|^2 of CN(0,1) fading is Exp(1)."""
    return realize_link(geometry, params, float(rng.exponential()))


def draw_fading_powers(rng: np.random.Generator, n: int) -> np.ndarray:
    """Pre-draw n squared-fading values, one per TTI, for counter-style indexing."""
    return rng.exponential(size=n)


def sample_position(ground_radius_m: float, height_m: float, rng: np.random.Generator) -> Geometry:
    """Sample the UAV uniformly over the horizontal disk of radius R at height H."""
    if ground_radius_m < 0:
        raise ValueError("ground_radius_m must be >= 0")
    r = ground_radius_m * math.sqrt(float(rng.uniform()))
    return Geometry.from_offset(height_m, ground_radius_m, r)


def success_probability(geometry: Geometry, params: ChannelParams) -> float:
    """Closed-form decode probability: exponential tail of the Exp(1) fading power.

    P[success] = P[|beta|^2 >= gamma_th * sigma^2 / (P * mean_gain)].
    """
    mean_gain = mean_channel_gain(geometry.distance_m, geometry.elevation_deg, params)
    threshold = params.snr_threshold_linear * params.noise_power_w / (params.tx_power_w * mean_gain)
    return math.exp(-threshold)
