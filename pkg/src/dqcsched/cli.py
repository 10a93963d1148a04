"""Command-line interface for the benchmark harness.

Subcommands: ``run`` (simulate and write per-slot CSVs), ``summarize``,
``cdf``, ``train-ppo`` and ``init-config``. Exit codes: 0 on success,
2 on configuration errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

from . import harness, ppo
from .configfile import ConfigError
from .netmodel import build_network


def _cmd_init_config(args) -> int:
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(harness.default_config_text())
    print(f"wrote default configuration to {args.out}")
    return 0


def _ppo_environment(config: harness.ExperimentConfig):
    network = build_network(
        config.n_nodes, config.qpu_capacity, config.quality_mix,
        seed=config.ppo_seed, comm_qubits_per_node=config.comm_qubits,
    )
    catalog = harness.build_catalog(config, network)
    return network, catalog


def _cmd_train_ppo(args) -> int:
    config = harness.load_config(args.config)
    updates = args.updates if args.updates is not None else config.ppo_updates
    variant = args.variant if args.variant is not None else config.ppo_variant
    variant = {"plain": "plain", "node-selection": "node_selection"}.get(variant, variant)
    network, catalog = _ppo_environment(config)
    agent = ppo.PpoAgent(
        ppo.PpoConfig(j_max=config.ppo_j_max, reward_variant=variant,
                      seed=config.ppo_seed),
        network, config.exec_params(), catalog,
    )
    per_update = math.ceil(agent.config.update_every / agent.config.j_max)
    log = agent.train(per_update * updates)
    agent.save(args.out)
    log_path = args.log if args.log else args.out + ".log.csv"
    with open(log_path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("update", "mean_reward", "policy_loss", "value_loss", "entropy"))
        for entry in log:
            writer.writerow([entry.update_index, repr(entry.mean_reward),
                             repr(entry.policy_loss), repr(entry.value_loss),
                             repr(entry.entropy)])
    print(f"trained {len(log)} updates; weights -> {args.out}, log -> {log_path}")
    return 0


def _cmd_run(args) -> int:
    config = harness.load_config(args.config)
    if args.schedulers:
        config.schedulers = tuple(s.strip() for s in args.schedulers.split(","))
    if args.seed is not None:
        config.seeds = (args.seed,)
    agents = None
    requested_ppo = [s for s in config.schedulers if s in harness.PPO_SCHEDULER_NAMES]
    if requested_ppo:
        weights = args.weights or config.ppo_weights
        if not weights:
            raise ConfigError(
                "ppo schedulers need a weights file (--weights or [ppo] weights_file)"
            )
        for setting in config.settings:
            if setting.fixed_count is None:
                raise ConfigError(
                    f"setting {setting.label!r}: ppo schedulers require "
                    f"fixed_count (the model input size is fixed)"
                )
        network, catalog = _ppo_environment(config)
        agent = ppo.load_agent(weights, network, config.exec_params(), catalog)
        for setting in config.settings:
            if setting.fixed_count > agent.config.j_max:
                raise ConfigError(
                    f"setting {setting.label!r}: fixed_count exceeds the "
                    f"model's job capacity {agent.config.j_max}"
                )
        agents = {name: agent for name in requested_ppo}
    records = harness.run_experiment(config, ppo_agents=agents)
    os.makedirs(args.out, exist_ok=True)
    slots_path = os.path.join(args.out, harness.SLOTS_CSV)
    harness.write_slots_csv(records, slots_path)
    summary_path = os.path.join(args.out, "summary.csv")
    harness.write_summary_csv(harness.summarize(records), summary_path)
    print(f"wrote {len(records)} slot records -> {slots_path}")
    print(f"wrote summary -> {summary_path}")
    return 0


def _cmd_summarize(args) -> int:
    records = harness.read_slots_csv(os.path.join(args.indir, harness.SLOTS_CSV))
    rows = harness.summarize(records)
    out = args.out or os.path.join(args.indir, "summary.csv")
    harness.write_summary_csv(rows, out)
    print(f"wrote {len(rows)} summary rows -> {out}")
    return 0


def _cmd_cdf(args) -> int:
    records = harness.read_slots_csv(os.path.join(args.indir, harness.SLOTS_CSV))
    rows = harness.cdf_export(records, args.metric, setting=args.setting)
    out = args.out or os.path.join(args.indir, f"cdf_{args.metric}.csv")
    harness.write_cdf_csv(rows, out)
    print(f"wrote {len(rows)} CDF points -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqcsched",
        description="Distributed quantum computing job-scheduling benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the benchmark and write CSVs")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--schedulers", help="comma list overriding the config")
    p_run.add_argument("--seed", type=int, help="run a single seed only")
    p_run.add_argument("--weights", help="ppo weights file")
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate a slots.csv")
    p_sum.add_argument("--in", dest="indir", required=True)
    p_sum.add_argument("--out")
    p_sum.set_defaults(func=_cmd_summarize)

    p_cdf = sub.add_parser("cdf", help="export an empirical CDF table")
    p_cdf.add_argument("--in", dest="indir", required=True)
    p_cdf.add_argument("--metric", required=True,
                       choices=list(harness.METRIC_FIELDS))
    p_cdf.add_argument("--setting")
    p_cdf.add_argument("--out")
    p_cdf.set_defaults(func=_cmd_cdf)

    p_train = sub.add_parser("train-ppo", help="train the RL scheduler")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True, help="weights file to write")
    p_train.add_argument("--updates", type=int)
    p_train.add_argument("--variant", choices=["plain", "node-selection"])
    p_train.add_argument("--log", help="training log CSV path")
    p_train.set_defaults(func=_cmd_train_ppo)

    p_init = sub.add_parser("init-config", help="write the default config file")
    p_init.add_argument("--out", required=True)
    p_init.set_defaults(func=_cmd_init_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
