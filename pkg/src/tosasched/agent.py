"""DDQN scheduler plus reference policies.

The agent sees a sliding window of observation vectors, explores with a
linearly decaying epsilon, stores transitions in a FIFO replay memory,
and trains the recurrent Q-network against a periodically copied target
network. The bit-oriented baseline transmits everything; the analytic
oracle transmits exactly until the current run is delivered.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .env import CncEnv, Observation
from .neural import OptimizerState, QNetworkParams

# Seed-stream purposes for training.
_SEED_INIT = 10
_SEED_POLICY = 11
_SEED_REPLAY = 12
_SEED_EPISODE = 13

CURVE_FIELDS = ("episode", "cumulative_reward", "epsilon", "loss_mean")


class TrainingDivergedError(RuntimeError):
    """Raised when the loss or parameters stop being finite."""

    def __init__(self, episode: int, message: str):
        super().__init__(f"episode {episode}: {message}")
        self.episode = episode


@dataclass(frozen=True)
class NetworkConfig:
    n_in: int = Observation.N_FIELDS
    n_h: int = 32
    n_l: int = 1
    window: int = 8

    def __post_init__(self) -> None:
        if min(self.n_in, self.n_h, self.n_l, self.window) < 1:
            raise ValueError("network dimensions must all be >= 1")


@dataclass(frozen=True)
class AgentConfig:
    """Training hyperparameters.

    epsilon decays linearly from eps_start to eps_min over the first
    eps_decay_fraction of the episodes, then stays at eps_min;
    double_dqn=False falls back to the plain max-form target.
    """

    gamma: float = 0.1
    eps_start: float = 1.0
    eps_min: float = 0.01
    eps_decay_fraction: float = 0.5
    replay_capacity: int = 10_000
    batch_size: int = 32
    target_update_every: int = 200
    episodes: int = 1000
    double_dqn: bool = True

    def __post_init__(self) -> None:
        if not (0 <= self.gamma < 1):
            raise ValueError("gamma must lie in [0, 1)")
        for eps in (self.eps_start, self.eps_min):
            if not (0 <= eps <= 1):
                raise ValueError("epsilon values must lie in [0, 1]")
        if not (0 < self.eps_decay_fraction <= 1):
            raise ValueError("eps_decay_fraction must lie in (0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= replay_capacity")
        if self.target_update_every < 1 or self.episodes < 1:
            raise ValueError("target_update_every and episodes must be >= 1")

    def epsilon_at(self, episode: int) -> float:
        """Exploration rate for a 0-based episode index."""
        horizon = max(1, int(self.episodes * self.eps_decay_fraction))
        frac = min(1.0, episode / horizon)
        return self.eps_start + (self.eps_min - self.eps_start) * frac


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayMemory:
    """Bounded FIFO transition store; minibatches are sampled without replacement.

    Backed by a ring buffer so eviction is strictly oldest-first and
    random access is O(1).
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._buf: list[Transition] = []
        self._write = 0

    def __len__(self) -> int:
        return len(self._buf)

    def push(self, transition: Transition) -> None:
        if len(self._buf) < self.capacity:
            self._buf.append(transition)
        else:
            self._buf[self._write] = transition
            self._write = (self._write + 1) % self.capacity

    def oldest(self) -> Transition:
        return self._buf[self._write % len(self._buf)]

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if batch_size > len(self._buf):
            raise ValueError("not enough transitions to sample")
        idx = rng.choice(len(self._buf), size=batch_size, replace=False, shuffle=False)
        return [self._buf[i] for i in idx]


class WindowBuffer:
    """Sliding window of the last W observation vectors, left-padded with the first."""

    def __init__(self, window: int):
        self.window = window
        self._buf: deque[np.ndarray] = deque(maxlen=window)

    def reset(self, first: Observation) -> None:
        self._buf.clear()
        vec = first.to_vector()
        for _ in range(self.window):
            self._buf.append(vec)

    def push(self, obs: Observation) -> None:
        self._buf.append(obs.to_vector())

    def array(self) -> np.ndarray:
        return np.stack(self._buf)


def greedy_action(q_values: np.ndarray) -> int:
    """Argmax over {drop, transmit}; ties transmit (fail-safe toward delivery)."""
    return int(q_values[1] >= q_values[0])


def select_action(params: QNetworkParams, window: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: uniform action with probability epsilon, else greedy on Q."""
    if not (0 <= epsilon <= 1):
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(0, neural.N_ACTIONS))
    return greedy_action(neural.forward(params, window))


def bit_oriented_policy() -> int:
    """The conventional baseline: transmit every packet."""
    return 1


def oracle_policy(observation: Observation) -> int:
    """Idealized reference: transmit until the current run is delivered, then drop."""
    return int(not observation.run_delivered)


@dataclass
class TrainResult:
    params: QNetworkParams
    episode_rewards: list[float]
    curve: list[tuple] = field(default_factory=list)  # rows of CURVE_FIELDS


def _td_targets(
    batch: list[Transition],
    params: QNetworkParams,
    target_params: QNetworkParams,
    gamma: float,
    double_dqn: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    live = np.array([not t.terminal for t in batch], dtype=np.float64)

    q_next_target = neural.forward(target_params, next_states)
    if double_dqn:
        q_next_online = neural.forward(params, next_states)
        best = (q_next_online[:, 1] >= q_next_online[:, 0]).astype(np.intp)
        bootstrap = q_next_target[np.arange(len(batch)), best]
    else:
        bootstrap = q_next_target.max(axis=1)
    targets = rewards + gamma * live * bootstrap
    return states, actions, targets


def train(
    env_factory,
    agent_cfg: AgentConfig,
    net_cfg: NetworkConfig,
    opt: OptimizerState,
    seed: int,
) -> TrainResult:
    """Run the full training loop and return the final parameters plus the learning curve.

    Per TTI: act epsilon-greedily, step the environment, store the
    transition, sample a minibatch (once the memory holds one), take a
    single RMSProp step on the mean TD loss, and copy the target
    network every target_update_every gradient steps. Episode seeds,
    exploration, replay sampling, and weight init all derive from
    ``seed``, so a run is bit-reproducible on one thread.
    """
    env: CncEnv = env_factory()
    init_rng = np.random.default_rng(np.random.SeedSequence([seed, _SEED_INIT]))
    params = neural.init_params(net_cfg.n_in, net_cfg.n_h, net_cfg.n_l, init_rng)
    target = neural.clone_target(params)
    policy_rng = np.random.default_rng(np.random.SeedSequence([seed, _SEED_POLICY]))
    replay_rng = np.random.default_rng(np.random.SeedSequence([seed, _SEED_REPLAY]))
    memory = ReplayMemory(agent_cfg.replay_capacity)
    windows = WindowBuffer(net_cfg.window)

    episode_rewards: list[float] = []
    curve: list[tuple] = []
    grad_steps = 0
    for episode in range(agent_cfg.episodes):
        epsilon = agent_cfg.epsilon_at(episode)
        episode_seed = int(np.random.SeedSequence([seed, _SEED_EPISODE, episode]).generate_state(1)[0])
        _, obs = env.reset(episode_seed)
        windows.reset(obs)
        losses: list[float] = []
        done = False
        while not done:
            state_vecs = windows.array()
            action = select_action(params, state_vecs, epsilon, policy_rng)
            result = env.step(action)
            windows.push(result.next_observation)
            memory.push(
                Transition(
                    state=state_vecs,
                    action=action,
                    reward=result.reward,
                    next_state=windows.array(),
                    terminal=result.terminal,
                )
            )
            done = result.terminal

            if len(memory) >= agent_cfg.batch_size:
                batch = memory.sample(agent_cfg.batch_size, replay_rng)
                states, actions, targets = _td_targets(batch, params, target, agent_cfg.gamma, agent_cfg.double_dqn)
                grads, loss = neural.backward(params, states, actions, targets, return_loss=True)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(episode, f"non-finite loss {loss}")
                neural.rmsprop_step(params, opt, grads)
                losses.append(loss)
                grad_steps += 1
                if grad_steps % agent_cfg.target_update_every == 0:
                    target = neural.clone_target(params)

        metrics = env.episode_metrics()
        if not np.isfinite(metrics.cumulative_reward):
            raise TrainingDivergedError(episode, "non-finite episode reward")
        episode_rewards.append(metrics.cumulative_reward)
        curve.append((episode, metrics.cumulative_reward, epsilon, float(np.mean(losses)) if losses else float("nan")))
    return TrainResult(params=params, episode_rewards=episode_rewards, curve=curve)


class GreedyQPolicy:
    """Greedy rollout policy over a trained network (epsilon = 0)."""

    def __init__(self, params: QNetworkParams, window: int):
        self.params = params
        self._windows = WindowBuffer(window)
        self._fresh = True

    def reset(self) -> None:
        self._fresh = True

    def __call__(self, obs: Observation) -> int:
        if self._fresh:
            self._windows.reset(obs)
            self._fresh = False
        else:
            self._windows.push(obs)
        return greedy_action(neural.forward(self.params, self._windows.array()))


class BitOrientedPolicy:
    def __call__(self, obs: Observation) -> int:
        return bit_oriented_policy()


class OraclePolicy:
    def __call__(self, obs: Observation) -> int:
        return oracle_policy(obs)
