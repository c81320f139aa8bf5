"""Command-line entry points: train, eval, campaign, timeline.

Every config key is overridable with --set key.path=value; values are
parsed as JSON when possible, else taken as strings.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import harness, neural
from .harness import ExperimentConfig, load_config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file (defaults apply if omitted)")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--out", type=Path, default=None, help="override output_dir")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set agent.episodes=200")


def _build_config(args: argparse.Namespace, k: int | None = None, policy: str | None = None) -> ExperimentConfig:
    cfg = load_config(args.config, args.overrides)
    updates: dict = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "out", None) is not None:
        updates["output_dir"] = str(args.out)
    if k is not None:
        updates["k_list"] = (k,)
    if policy is not None:
        updates["policy"] = policy
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _build_config(args, k=args.k, policy="tosa_trained")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = harness.train_seed(cfg.master_seed, args.k)
    result = harness.train_policy(cfg, args.k, seed)
    neural.save_params(result.params, out / f"params_k{args.k:02d}.txt")
    harness.write_training_curve(out / f"train_k{args.k:02d}.tsv", cfg, result.curve)
    print(f"trained k={args.k} for {cfg.agent.episodes} episodes; "
          f"final episode reward {result.episode_rewards[-1]:.4f}; outputs in {out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_config(args, k=args.k, policy=args.policy)
    out = Path(cfg.output_dir)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    params = None
    if cfg.policy == "tosa_trained":
        if args.checkpoint is None:
            print("error: --checkpoint is required for policy tosa_trained", file=sys.stderr)
            return 2
        params = neural.load_params(args.checkpoint)
    policy = harness.make_policy(cfg, params)
    metrics, logs = harness.evaluate_policy(cfg, policy, args.k)
    harness.write_episode_logs(out / "logs" / f"k{args.k:02d}.tsv", cfg, logs)
    row = harness.summarize(args.k, cfg.policy, metrics, cfg.master_seed, cfg.config_hash())
    harness.write_summary(out / "summary.tsv", cfg, [row])
    print(f"k={args.k} policy={cfg.policy}: tx/effective={row.mean_tx_per_effective:.4f} "
          f"effective_rate={row.mean_effective_rate:.4f} reward={row.mean_cumulative_reward:.4f}")
    return 0


def _cmd_campaign(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if args.k is not None:
        cfg = dataclasses.replace(cfg, k_list=(args.k,))
    if args.policy is not None:
        cfg = dataclasses.replace(cfg, policy=args.policy)
    try:
        summaries = harness.run_campaign(cfg)
    except harness.CampaignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for row in summaries:
        print(f"k={row.k}: tx/effective={row.mean_tx_per_effective:.4f} "
              f"effective_rate={row.mean_effective_rate:.4f}")
    print(f"outputs in {cfg.output_dir}")
    return 0


def _cmd_timeline(args: argparse.Namespace) -> int:
    episodes = harness.read_episode_logs(args.log)
    if not (0 <= args.episode < len(episodes)):
        print(f"error: log has {len(episodes)} episodes; --episode out of range", file=sys.stderr)
        return 2
    rows = harness.emit_timeline(episodes[args.episode])
    harness.write_timeline(args.out, rows)
    print(f"wrote {len(rows)} timeline rows to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tosasched",
                                     description="Semantics-aware C&C downlink scheduling experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the scheduler at one repeat count k")
    _add_common(p_train)
    p_train.add_argument("--k", type=int, required=True)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate one policy at one k")
    _add_common(p_eval)
    p_eval.add_argument("--k", type=int, required=True)
    p_eval.add_argument("--policy", choices=harness.POLICIES, default="oracle")
    p_eval.add_argument("--checkpoint", type=Path, default=None, help="trained parameters (tosa_trained)")
    p_eval.set_defaults(func=_cmd_eval)

    p_camp = sub.add_parser("campaign", help="full train+eval sweep over k_list")
    _add_common(p_camp)
    p_camp.add_argument("--k", type=int, default=None, help="restrict to a single k")
    p_camp.add_argument("--policy", choices=harness.POLICIES, default=None)
    p_camp.set_defaults(func=_cmd_campaign)

    p_tl = sub.add_parser("timeline", help="per-TTI decision/outcome table from an episode log")
    p_tl.add_argument("--log", type=Path, required=True)
    p_tl.add_argument("--episode", type=int, default=0)
    p_tl.add_argument("--out", type=Path, required=True)
    p_tl.set_defaults(func=_cmd_timeline)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
