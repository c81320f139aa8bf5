"""Semantic value of a command-and-control transmission.

Three ingredients: a weighted normalized field gap between two packets,
a sigmoid score mapping that gap into (-1, 1), and a freshness score
derived from the delivery latency within the TTI. The per-TTI reward is
their product on successful delivery and zero otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .traffic import CncPacket

FIELD_NAMES = ("row_deg", "pitch_deg", "yaw_deg_s", "thrust_m_s")
TABLE_RANGES = (70.0, 70.0, 300.0, 10.0)


@dataclass(frozen=True)
class SimilarityConfig:
    """Weights, normalization ranges, and sigmoid shape for the gap score.

    Note the inversion: large L means the packets *differ*; the sigmoid
    maps L > zeta to positive scores (novel content) and L < zeta to
    negative scores (near-duplicates).
    """

    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    ranges: tuple[float, float, float, float] = TABLE_RANGES
    kappa: float = 100.0
    zeta: float = 0.05

    def __post_init__(self) -> None:
        if len(self.weights) != 4 or len(self.ranges) != 4:
            raise ValueError("weights and ranges must have one entry per C&C field")
        if any(w < 0 for w in self.weights) or not any(w > 0 for w in self.weights):
            raise ValueError("weights must be >= 0 and not all zero")
        if any(r <= 0 for r in self.ranges):
            raise ValueError("ranges must be > 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if not (0 <= self.zeta < sum(self.weights)):
            raise ValueError("zeta must lie in [0, sum(weights))")


@dataclass(frozen=True)
class AoiConfig:
    """TTI duration, payload size, and bandwidth for the freshness score."""

    tti_seconds: float = 1.0e-3
    payload_bits: float = 128.0
    bandwidth_hz: float = 20.0e6

    def __post_init__(self) -> None:
        if self.tti_seconds <= 0 or self.payload_bits <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("AoiConfig fields must all be > 0")


def max_novelty(cfg: SimilarityConfig) -> float:
    """Gap value assigned to a packet with no predecessor: sum of weights."""
    return float(sum(cfg.weights))


def raw_similarity(curr: CncPacket, prev: CncPacket, cfg: SimilarityConfig) -> float:
    """Weighted normalized L1 gap between two packets' control fields.

    Zero iff all positively-weighted fields are identical; symmetric in
    its arguments and a metric over packet field space.
    """
    total = 0.0
    for name, mu, rng in zip(FIELD_NAMES, cfg.weights, cfg.ranges):
        total += mu * abs(getattr(curr, name) - getattr(prev, name)) / rng
    return total


def similarity_score(gap: float, cfg: SimilarityConfig) -> float:
    """Sigmoid score 2 / (1 + exp(-kappa*(L - zeta))) - 1, in (-1, 1)."""
    if gap < 0:
        raise ValueError("gap must be >= 0")
    return 2.0 / (1.0 + math.exp(-cfg.kappa * (gap - cfg.zeta))) - 1.0


def aoi_of_delivery(snr_linear: float, cfg: AoiConfig) -> float:
    """Delivery latency of a freshly generated packet: N_cc / (B * log2(1 + snr)).

    Each packet transmits in the TTI of its generation, so the age at
    the ACK equals the transmission time.
    """
    if snr_linear <= 0:
        raise ValueError("snr_linear must be > 0 (zero capacity has no delivery time)")
    return cfg.payload_bits / (cfg.bandwidth_hz * math.log2(1.0 + snr_linear))


def freshness_score(age_s: float, cfg: AoiConfig) -> float:
    """Normalized freshness 1 - I/dT, clamped to 0 when the TTI deadline is missed."""
    if age_s < 0:
        raise ValueError("age must be >= 0")
    return max(0.0, 1.0 - age_s / cfg.tti_seconds)


def deadline_violated(age_s: float, cfg: AoiConfig) -> bool:
    """True when delivery would not complete within one TTI."""
    return age_s > cfg.tti_seconds


def reward(transmitted: bool, success: bool, f_gap: float, g_age: float) -> float:
    """Per-TTI reward: score product on delivery, zero on failure or drop."""
    if transmitted and success:
        return f_gap * g_age
    return 0.0
