"""Experiment runner: configuration, seeding, campaigns over k, and result files.

A campaign trains (when requested) and evaluates one policy for every
repeat count in k_list, writing per-TTI episode logs, a summary table,
and a manifest that pins the full configuration, the derived seeds, and
the code version. Outputs are plain tab-separated text with repr-exact
floats: re-running the same (seed, config) reproduces every file byte
for byte, and evaluation seeds do not depend on the policy, so
different policies are paired on identical channel realizations.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, agent as agent_mod, neural
from .agent import AgentConfig, BitOrientedPolicy, GreedyQPolicy, NetworkConfig, OraclePolicy, TrainResult
from .channel import ChannelParams, db_to_linear, dbm_to_watts
from .env import CncEnv, EpisodeMetrics, SiteConfig
from .neural import OptimizerState
from .semantics import AoiConfig, SimilarityConfig
from .traffic import DatasetConfig

_SEED_EVAL = 20
_SEED_TRAIN = 21
_SEED_TRAIN_SHARED = 22

POLICIES = ("tosa_trained", "bit_oriented", "oracle")

LOG_HEADER = "episode\ttti\trun_id\taction\tsuccess\tL\tf_L\tI\tg_I\treward"
SUMMARY_HEADER = (
    "k\tpolicy\tn_episodes\tmean_tx_per_effective\tmean_effective_rate\tmean_cumulative_reward"
    "\tse_tx_per_effective\tse_effective_rate\tse_cumulative_reward\tmaster_seed\tconfig_hash"
)
TIMELINE_HEADER = "tti\trun_id\taction\toutcome"
AGGREGATE_HEADER = "k\tpolicy\tmetric\tmean\tstd\tci_low\tci_high\tn\tdegenerate"

INCOMPLETE_MARKER = "INCOMPLETE"


class CampaignError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChannelSettings:
    """User-facing channel knobs in dB/dBm; converted to linear once, at load."""

    carrier_frequency_hz: float = 5.0e9
    path_loss_exponent: float = -2.0
    eta_los_db: float = -1.0
    eta_nlos_db: float = -20.0
    env_a: float = 11.95
    env_b: float = 0.14
    tx_power_dbm: float = 18.0
    noise_power_dbm: float = -104.0
    snr_threshold_db: float = 5.5
    bandwidth_hz: float = 20.0e6

    def to_params(self) -> ChannelParams:
        return ChannelParams(
            carrier_frequency_hz=self.carrier_frequency_hz,
            path_loss_exponent=self.path_loss_exponent,
            eta_los=db_to_linear(self.eta_los_db),
            eta_nlos=db_to_linear(self.eta_nlos_db),
            env_a=self.env_a,
            env_b=self.env_b,
            tx_power_w=dbm_to_watts(self.tx_power_dbm),
            noise_power_w=dbm_to_watts(self.noise_power_dbm),
            snr_threshold_linear=db_to_linear(self.snr_threshold_db),
            bandwidth_hz=self.bandwidth_hz,
        )


@dataclass(frozen=True)
class TrafficSettings:
    n_effective: int = 200
    payload_bits: int = 128

    def to_dataset(self, repeat_k: int) -> DatasetConfig:
        return DatasetConfig(n_effective=self.n_effective, repeat_k=repeat_k, payload_bits=self.payload_bits)


@dataclass(frozen=True)
class OptimizerSettings:
    learning_rate: float = 1.0e-5
    rho: float = 0.99
    epsilon: float = 1.0e-8

    def to_state(self) -> OptimizerState:
        return OptimizerState(learning_rate=self.learning_rate, rho=self.rho, epsilon=self.epsilon)


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 1
    k_list: tuple[int, ...] = tuple(range(1, 21))
    n_eval_episodes: int = 20
    output_dir: str = "runs/campaign"
    policy: str = "tosa_trained"
    train_per_k: bool = True
    shared_train_k: int = 3
    channel: ChannelSettings = field(default_factory=ChannelSettings)
    site: SiteConfig = field(default_factory=SiteConfig)
    traffic: TrafficSettings = field(default_factory=TrafficSettings)
    semantics: SimilarityConfig = field(default_factory=SimilarityConfig)
    aoi: AoiConfig = field(default_factory=AoiConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self) -> None:
        if not self.k_list:
            raise ValueError("k_list must be non-empty")
        if any(k < 1 for k in self.k_list):
            raise ValueError("every k must be >= 1")
        if self.n_eval_episodes < 1:
            raise ValueError("n_eval_episodes must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")

    # -- (de)serialization --------------------------------------------------

    def to_dict(self) -> dict:
        def unwrap(obj):
            if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
                return {f.name: unwrap(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
            if isinstance(obj, tuple):
                return list(obj)
            return obj

        return unwrap(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        def build(dc_type, payload):
            kwargs = {}
            for f in dataclasses.fields(dc_type):
                if f.name not in payload:
                    continue
                value = payload[f.name]
                if dataclasses.is_dataclass(f.type) or f.name in _SUBCONFIGS:
                    kwargs[f.name] = build(_SUBCONFIGS[f.name], value)
                elif f.name in ("k_list", "weights", "ranges"):
                    kwargs[f.name] = tuple(value)
                else:
                    kwargs[f.name] = value
            return dc_type(**kwargs)

        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return build(cls, data)

    def config_hash(self) -> str:
        """Hash of everything except seed and output location, for pairing runs."""
        payload = self.to_dict()
        payload.pop("master_seed")
        payload.pop("output_dir")
        canon = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


_SUBCONFIGS = {
    "channel": ChannelSettings,
    "site": SiteConfig,
    "traffic": TrafficSettings,
    "semantics": SimilarityConfig,
    "aoi": AoiConfig,
    "network": NetworkConfig,
    "optimizer": OptimizerSettings,
    "agent": AgentConfig,
}


def load_config(path: str | Path | None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read a JSON config file (or defaults) and apply ``key.path=value`` overrides."""
    data = json.loads(Path(path).read_text()) if path is not None else {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"cannot override through non-mapping key {part!r}")
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(data)


# -- seeding ------------------------------------------------------------------


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def eval_seed(master_seed: int, k: int, episode: int) -> int:
    """Evaluation episode seed; independent of policy so comparisons are paired."""
    return _derive_seed(master_seed, _SEED_EVAL, k, episode)


def train_seed(master_seed: int, k: int | None) -> int:
    if k is None:
        return _derive_seed(master_seed, _SEED_TRAIN_SHARED)
    return _derive_seed(master_seed, _SEED_TRAIN, k)


# -- environment / policy construction ----------------------------------------


def build_env(cfg: ExperimentConfig, repeat_k: int) -> CncEnv:
    return CncEnv(
        channel_params=cfg.channel.to_params(),
        site=cfg.site,
        dataset=cfg.traffic.to_dataset(repeat_k),
        similarity=cfg.semantics,
        aoi=cfg.aoi,
    )


def train_policy(cfg: ExperimentConfig, repeat_k: int, seed: int) -> TrainResult:
    return agent_mod.train(
        env_factory=lambda: build_env(cfg, repeat_k),
        agent_cfg=cfg.agent,
        net_cfg=cfg.network,
        opt=cfg.optimizer.to_state(),
        seed=seed,
    )


def make_policy(cfg: ExperimentConfig, params: neural.QNetworkParams | None):
    if cfg.policy == "bit_oriented":
        return BitOrientedPolicy()
    if cfg.policy == "oracle":
        return OraclePolicy()
    if params is None:
        raise ValueError("tosa_trained policy needs trained parameters")
    return GreedyQPolicy(params, cfg.network.window)


# -- result rows ---------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    k: int
    policy: str
    n_episodes: int
    mean_tx_per_effective: float
    mean_effective_rate: float
    mean_cumulative_reward: float
    se_tx_per_effective: float
    se_effective_rate: float
    se_cumulative_reward: float
    master_seed: int
    config_hash: str


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, float("nan")
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def summarize(
    k: int,
    policy: str,
    metrics: list[EpisodeMetrics],
    master_seed: int,
    config_hash: str,
) -> SummaryRow:
    tx = [m.transmissions_per_effective_packet for m in metrics]
    rate = [m.effective_rate for m in metrics]
    rew = [m.cumulative_reward for m in metrics]
    mean_tx, se_tx = _mean_se(tx)
    mean_rate, se_rate = _mean_se(rate)
    mean_rew, se_rew = _mean_se(rew)
    return SummaryRow(
        k=k,
        policy=policy,
        n_episodes=len(metrics),
        mean_tx_per_effective=mean_tx,
        mean_effective_rate=mean_rate,
        mean_cumulative_reward=mean_rew,
        se_tx_per_effective=se_tx,
        se_effective_rate=se_rate,
        se_cumulative_reward=se_rew,
        master_seed=master_seed,
        config_hash=config_hash,
    )


# -- file output ----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _header_lines(cfg: ExperimentConfig) -> list[str]:
    return [f"# master_seed={cfg.master_seed}", f"# config_hash={cfg.config_hash()}"]


def write_episode_logs(path: Path, cfg: ExperimentConfig, per_episode_rows: list[list[tuple]]) -> None:
    lines = _header_lines(cfg) + [LOG_HEADER]
    for episode, rows in enumerate(per_episode_rows):
        for row in rows:
            lines.append("\t".join([str(episode)] + [_fmt(v) for v in row]))
    path.write_text("\n".join(lines) + "\n")


def read_episode_logs(path: str | Path) -> list[list[tuple]]:
    """Parse a log file back into per-episode row lists (floats exact)."""
    episodes: dict[int, list[tuple]] = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or line.startswith("episode\t"):
            continue
        ep, tti, run_id, action, success, gap, f_gap, age, g_age, rew = line.split("\t")
        episodes.setdefault(int(ep), []).append(
            (int(tti), int(run_id), int(action), bool(int(success)), float(gap), float(f_gap), float(age), float(g_age), float(rew))
        )
    return [episodes[ep] for ep in sorted(episodes)]


def write_summary(path: Path, cfg: ExperimentConfig, rows: list[SummaryRow]) -> None:
    lines = _header_lines(cfg) + [SUMMARY_HEADER]
    for r in rows:
        lines.append(
            "\t".join(
                _fmt(v)
                for v in (
                    r.k,
                    r.policy,
                    r.n_episodes,
                    r.mean_tx_per_effective,
                    r.mean_effective_rate,
                    r.mean_cumulative_reward,
                    r.se_tx_per_effective,
                    r.se_effective_rate,
                    r.se_cumulative_reward,
                    r.master_seed,
                    r.config_hash,
                )
            )
        )
    path.write_text("\n".join(lines) + "\n")


def read_summary(path: str | Path) -> list[SummaryRow]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or line.startswith("k\t"):
            continue
        k, policy, n, m_tx, m_rate, m_rew, se_tx, se_rate, se_rew, seed, chash = line.split("\t")
        rows.append(
            SummaryRow(
                int(k), policy, int(n), float(m_tx), float(m_rate), float(m_rew),
                float(se_tx), float(se_rate), float(se_rew), int(seed), chash,
            )
        )
    return rows


def write_training_curve(path: Path, cfg: ExperimentConfig, curve: list[tuple]) -> None:
    lines = _header_lines(cfg) + ["\t".join(agent_mod.CURVE_FIELDS)]
    for row in curve:
        lines.append("\t".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# -- operations -----------------------------------------------------------------


def emit_timeline(log_rows: list[tuple]) -> list[tuple[int, int, int, str]]:
    """Collapse one episode's log into (tti, run_id, action, outcome) rows."""
    timeline = []
    for row in log_rows:
        tti, run_id, action, success = row[0], row[1], row[2], row[3]
        if not action:
            outcome = "dropped"
        else:
            outcome = "delivered" if success else "failed"
        timeline.append((int(tti), int(run_id), int(action), outcome))
    return timeline


def write_timeline(path: Path, rows: list[tuple[int, int, int, str]]) -> None:
    lines = [TIMELINE_HEADER] + ["\t".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class AggregateRow:
    k: int
    policy: str
    metric: str
    mean: float
    std: float
    ci_low: float
    ci_high: float
    n: int
    degenerate: bool


_AGG_METRICS = (
    ("tx_per_effective", "mean_tx_per_effective"),
    ("effective_rate", "mean_effective_rate"),
    ("cumulative_reward", "mean_cumulative_reward"),
)


def aggregate(summaries: Sequence[SummaryRow]) -> list[AggregateRow]:
    """Cross-seed means with 95% normal confidence intervals per (k, policy, metric).

    All rows must come from runs with the same config hash; a single
    contributing seed yields a zero-width interval flagged degenerate.
    """
    if not summaries:
        raise ValueError("need at least one summary row")
    hashes = {s.config_hash for s in summaries}
    if len(hashes) > 1:
        raise ValueError(f"mismatched configs across summaries: {sorted(hashes)}")
    groups: dict[tuple[int, str], list[SummaryRow]] = {}
    for s in summaries:
        groups.setdefault((s.k, s.policy), []).append(s)
    out = []
    for (k, policy), rows in sorted(groups.items()):
        n = len(rows)
        for metric, attr in _AGG_METRICS:
            values = np.array([getattr(r, attr) for r in rows])
            mean = float(values.mean())
            degenerate = n < 2
            std = 0.0 if degenerate else float(values.std(ddof=1))
            half = 0.0 if degenerate else 1.96 * std / math.sqrt(n)
            out.append(AggregateRow(k, policy, metric, mean, std, mean - half, mean + half, n, degenerate))
    return out


def write_aggregate(path: Path, rows: Sequence[AggregateRow]) -> None:
    lines = [AGGREGATE_HEADER]
    for r in rows:
        lines.append(
            "\t".join(_fmt(v) for v in (r.k, r.policy, r.metric, r.mean, r.std, r.ci_low, r.ci_high, r.n, r.degenerate))
        )
    path.write_text("\n".join(lines) + "\n")


def evaluate_policy(cfg: ExperimentConfig, policy, repeat_k: int) -> tuple[list[EpisodeMetrics], list[list[tuple]]]:
    """Run n_eval_episodes greedy evaluations at one k; seeds are policy-independent."""
    env = build_env(cfg, repeat_k)
    metrics: list[EpisodeMetrics] = []
    logs: list[list[tuple]] = []
    from .env import rollout

    for episode in range(cfg.n_eval_episodes):
        m, rows = rollout(env, policy, eval_seed(cfg.master_seed, repeat_k, episode))
        metrics.append(m)
        logs.append(rows)
    return metrics, logs


def run_campaign(cfg: ExperimentConfig) -> list[SummaryRow]:
    """Train (if needed) and evaluate the configured policy over every k in k_list.

    Writes logs/, curves/ (for trained runs), summary.tsv, and
    manifest.json under cfg.output_dir. An INCOMPLETE marker file
    exists while the campaign runs and is removed only on success, so
    interrupted or failed runs are visibly partial. Raises
    CampaignError after marking the output if any cell fails.
    """
    out = Path(cfg.output_dir)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE_MARKER
    marker.write_text("campaign in progress or failed\n")

    chash = cfg.config_hash()
    summaries: list[SummaryRow] = []
    seeds_used: dict[str, object] = {"eval": {}, "train": {}}
    try:
        shared_params = None
        if cfg.policy == "tosa_trained" and not cfg.train_per_k:
            seed = train_seed(cfg.master_seed, None)
            seeds_used["train"]["shared"] = seed
            result = train_policy(cfg, cfg.shared_train_k, seed)
            shared_params = result.params
            (out / "curves").mkdir(exist_ok=True)
            write_training_curve(out / "curves" / "train_shared.tsv", cfg, result.curve)
            neural.save_params(shared_params, out / "curves" / "params_shared.txt")

        for k in cfg.k_list:
            params = shared_params
            if cfg.policy == "tosa_trained" and cfg.train_per_k:
                seed = train_seed(cfg.master_seed, k)
                seeds_used["train"][f"k{k}"] = seed
                result = train_policy(cfg, k, seed)
                params = result.params
                (out / "curves").mkdir(exist_ok=True)
                write_training_curve(out / "curves" / f"train_k{k:02d}.tsv", cfg, result.curve)
                neural.save_params(params, out / "curves" / f"params_k{k:02d}.txt")

            policy = make_policy(cfg, params)
            metrics, logs = evaluate_policy(cfg, policy, k)
            seeds_used["eval"][f"k{k}"] = [eval_seed(cfg.master_seed, k, ep) for ep in range(cfg.n_eval_episodes)]
            write_episode_logs(out / "logs" / f"k{k:02d}.tsv", cfg, logs)
            summaries.append(summarize(k, cfg.policy, metrics, cfg.master_seed, chash))
    except Exception as exc:
        raise CampaignError(f"campaign failed (outputs in {out} are partial): {exc}") from exc

    write_summary(out / "summary.tsv", cfg, summaries)
    manifest = {
        "version": __version__,
        "master_seed": cfg.master_seed,
        "config_hash": chash,
        "config": cfg.to_dict(),
        "seeds": seeds_used,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    marker.unlink()
    return summaries
