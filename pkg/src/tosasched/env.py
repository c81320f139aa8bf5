"""One-TTI-per-step scheduling environment for downlink C&C traffic.

Each step consumes exactly one packet from the stream. A transmit
action draws the link, and on success earns the product of the novelty
score and the freshness score; failed transmissions and drops earn
zero. Novelty is measured against the last packet the receiver actually
got (max novelty when nothing has been delivered yet), which is what
makes retrying an undelivered run worthwhile and re-sending a delivered
one wasteful.

Fading is pre-drawn per episode, indexed by TTI, so a drop consumes no
randomness and different policies see identical channel realizations on
the same seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import semantics
from .channel import ChannelParams, Geometry, LinkRealization, draw_fading_powers, realize_link, sample_position
from .semantics import AoiConfig, SimilarityConfig
from .traffic import CncPacket, DatasetConfig, build_stream

# Seed-stream purposes, mixed into per-episode SeedSequences.
_SEED_TRAFFIC = 0
_SEED_GEOMETRY = 1
_SEED_FADING = 2

LOG_FIELDS = ("tti", "run_id", "action", "success", "L", "f_L", "I", "g_I", "reward")


@dataclass(frozen=True)
class SiteConfig:
    """Deployment geometry: disk radius, flight height, optional pinned offset.

    When fixed_horizontal_offset_m is set the UAV sits at that offset
    every episode instead of being sampled over the disk; useful for
    operating-point studies at a known success probability.
    """

    ground_radius_m: float = 500.0
    height_m: float = 100.0
    fixed_horizontal_offset_m: float | None = None

    def __post_init__(self) -> None:
        if self.ground_radius_m < 0:
            raise ValueError("ground_radius_m must be >= 0")
        if self.height_m <= 0:
            raise ValueError("height_m must be > 0")
        if self.fixed_horizontal_offset_m is not None:
            if not (0 <= self.fixed_horizontal_offset_m <= max(self.ground_radius_m, self.fixed_horizontal_offset_m)):
                raise ValueError("fixed_horizontal_offset_m must be >= 0")


@dataclass(frozen=True)
class Observation:
    """What the scheduler sees before acting on the current packet.

    similarity_score scores the current packet against the last
    delivered one; freshness is the delivery freshness within the
    current run (1 until the run first succeeds); run_delivered is the
    'transmission result of similar packets' bit.
    """

    similarity_score: float
    freshness: float
    last_action: int
    last_success: bool
    run_delivered: bool

    N_FIELDS = 5

    def to_vector(self) -> np.ndarray:
        return np.array(
            [
                self.similarity_score,
                self.freshness,
                float(self.last_action),
                float(self.last_success),
                float(self.run_delivered),
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class StepResult:
    reward: float
    next_observation: Observation
    transmitted: bool
    success: bool
    tti_index: int
    run_id: int
    terminal: bool
    link: LinkRealization | None = None


@dataclass
class EpisodeState:
    """Mutable per-episode bookkeeping; owned by the environment."""

    stream: list[CncPacket]
    geometry: Geometry
    fading_powers: np.ndarray
    cursor: int = 0
    delivered_runs: set[int] = field(default_factory=set)
    attempt_counts: dict[int, int] = field(default_factory=dict)
    last_delivered: CncPacket | None = None
    run_freshness: float = 1.0
    transmit_count: int = 0
    cumulative_reward: float = 0.0
    deadline_violations: int = 0
    log_rows: list[tuple] = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return self.cursor >= len(self.stream)


@dataclass(frozen=True)
class EpisodeMetrics:
    transmit_count: int
    effective_deliveries: int
    effective_rate: float
    transmissions_per_effective_packet: float
    cumulative_reward: float


class CncEnv:
    """Episodic environment over one dataset; reset() rebuilds everything from a seed."""

    def __init__(
        self,
        channel_params: ChannelParams,
        site: SiteConfig,
        dataset: DatasetConfig,
        similarity: SimilarityConfig,
        aoi: AoiConfig,
    ):
        self.channel_params = channel_params
        self.site = site
        self.dataset = dataset
        self.similarity = similarity
        self.aoi = aoi
        self.state: EpisodeState | None = None
        self._pending: Observation | None = None

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int) -> tuple[EpisodeState, Observation]:
        """Build a fresh stream, geometry, and fading table; return the first observation.

        Traffic, geometry, and fading use separate child streams of the
        seed, so the same seed always reproduces the same episode
        bit-for-bit regardless of the actions taken.
        """
        traffic_rng = np.random.default_rng(np.random.SeedSequence([seed, _SEED_TRAFFIC]))
        stream = build_stream(self.dataset, traffic_rng, self.aoi.tti_seconds)

        if self.site.fixed_horizontal_offset_m is not None:
            geometry = Geometry.from_offset(
                self.site.height_m,
                max(self.site.ground_radius_m, self.site.fixed_horizontal_offset_m),
                self.site.fixed_horizontal_offset_m,
            )
        else:
            geo_rng = np.random.default_rng(np.random.SeedSequence([seed, _SEED_GEOMETRY]))
            geometry = sample_position(self.site.ground_radius_m, self.site.height_m, geo_rng)

        fading_rng = np.random.default_rng(np.random.SeedSequence([seed, _SEED_FADING]))
        fading = draw_fading_powers(fading_rng, len(stream))

        self.state = EpisodeState(stream=stream, geometry=geometry, fading_powers=fading)
        self._pending = Observation(
            similarity_score=self._novelty_score(stream[0]),
            freshness=1.0,
            last_action=0,
            last_success=False,
            run_delivered=False,
        )
        return self.state, self._pending

    def observation(self) -> Observation:
        if self._pending is None:
            raise RuntimeError("reset() the environment before observing")
        return self._pending

    def step(self, action: int) -> StepResult:
        """Apply transmit (1) or drop (0) to the current packet and advance one TTI."""
        if action not in (0, 1):
            raise ValueError(f"action must be 0 or 1, got {action}")
        state = self.state
        if state is None:
            raise RuntimeError("reset() the environment before stepping")
        if state.finished:
            raise RuntimeError("episode is finished; reset() to start a new one")

        packet = state.stream[state.cursor]
        obs = self._pending
        assert obs is not None
        gap = self._novelty_gap(packet)

        link: LinkRealization | None = None
        success = False
        age = math.nan
        g_age = math.nan
        if action == 1:
            state.transmit_count += 1
            state.attempt_counts[packet.run_id] = state.attempt_counts.get(packet.run_id, 0) + 1
            link = realize_link(state.geometry, self.channel_params, float(state.fading_powers[state.cursor]))
            success = link.success
            if success:
                age = semantics.aoi_of_delivery(link.snr_linear, self.aoi)
                if semantics.deadline_violated(age, self.aoi):
                    state.deadline_violations += 1
                g_age = semantics.freshness_score(age, self.aoi)
                state.delivered_runs.add(packet.run_id)
                state.last_delivered = packet
                state.run_freshness = g_age

        step_reward = semantics.reward(action == 1, success, obs.similarity_score, g_age if success else 0.0)
        state.cumulative_reward += step_reward
        state.log_rows.append(
            (
                state.cursor,
                packet.run_id,
                action,
                success,
                gap,
                obs.similarity_score,
                age,
                g_age,
                step_reward,
            )
        )

        state.cursor += 1
        terminal = state.finished
        if terminal:
            # Sentinel: never acted on, never bootstrapped from.
            next_obs = Observation(0.0, 1.0, action, success, False)
        else:
            nxt = state.stream[state.cursor]
            if nxt.run_id != packet.run_id:
                state.run_freshness = 1.0
            next_obs = Observation(
                similarity_score=self._novelty_score(nxt),
                freshness=state.run_freshness if nxt.run_id in state.delivered_runs else 1.0,
                last_action=action,
                last_success=success,
                run_delivered=nxt.run_id in state.delivered_runs,
            )
        self._pending = next_obs

        return StepResult(
            reward=step_reward,
            next_observation=next_obs,
            transmitted=action == 1,
            success=success,
            tti_index=state.cursor - 1,
            run_id=packet.run_id,
            terminal=terminal,
            link=link,
        )

    def episode_metrics(self) -> EpisodeMetrics:
        state = self.state
        if state is None or not state.finished:
            raise RuntimeError("episode_metrics() requires a finished episode")
        n = self.dataset.n_effective
        return EpisodeMetrics(
            transmit_count=state.transmit_count,
            effective_deliveries=len(state.delivered_runs),
            effective_rate=len(state.delivered_runs) / n,
            transmissions_per_effective_packet=state.transmit_count / n,
            cumulative_reward=state.cumulative_reward,
        )

    # -- helpers -----------------------------------------------------------

    def _novelty_gap(self, packet: CncPacket) -> float:
        state = self.state
        assert state is not None
        if state.last_delivered is None:
            return semantics.max_novelty(self.similarity)
        return semantics.raw_similarity(packet, state.last_delivered, self.similarity)

    def _novelty_score(self, packet: CncPacket) -> float:
        return semantics.similarity_score(self._novelty_gap(packet), self.similarity)


def rollout(env: CncEnv, policy, seed: int) -> tuple[EpisodeMetrics, list[tuple]]:
    """Run one full episode under a policy callable: observation -> action.

    Policies with per-episode state may expose reset(); it is called
    before the first observation.
    """
    if hasattr(policy, "reset"):
        policy.reset()
    _, obs = env.reset(seed)
    done = False
    while not done:
        result = env.step(policy(obs))
        obs = result.next_observation
        done = result.terminal
    assert env.state is not None
    return env.episode_metrics(), env.state.log_rows
