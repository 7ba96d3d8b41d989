"""Command-line entry point: ``mosaic run|batch|gne|verify``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .output import emit_csv, emit_plot, emit_summary, summary_to_text
from .scenario import ScenarioError, initial_network, load_scenario
from .sim import ScenarioFailure, batch, run_and_summarize
from .mission import StagePayoff
from .tactical import gne_iterate

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("mosaic")


def _setup_logging():
    level = os.environ.get("MOSAIC_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _write_outputs(trace, summary, out: Path, plot: bool, stride: int):
    emit_csv(trace, out / f"{trace.name}.csv")
    emit_summary(summary, out / f"{trace.name}.summary.json")
    if plot:
        emit_plot(trace, out / f"{trace.name}.svg", stride=stride)


def cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.scenario).with_overrides(seed=args.seed, mode=args.mode)
    except ScenarioError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        trace, summary = run_and_summarize(cfg)
        _write_outputs(trace, summary, Path(args.out), args.plot, cfg.plot_stride)
    except Exception as e:
        print(f"scenario {cfg.name} failed: {e}", file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(summary_to_text(summary))
    return EXIT_OK


def cmd_batch(args) -> int:
    files = sorted(Path(args.scenarios).glob("*.json"))
    if not files:
        print(f"config error: no *.json scenarios in {args.scenarios}", file=sys.stderr)
        return EXIT_CONFIG
    configs, status = [], EXIT_OK
    for f in files:
        try:
            configs.append(load_scenario(f))
        except ScenarioError as e:
            print(f"config error in {f.name}: {e}", file=sys.stderr)
            status = EXIT_CONFIG
    out = Path(args.out)
    for cfg, (trace, summary) in zip(configs, batch(configs, jobs=args.jobs, with_traces=True)):
        if isinstance(summary, ScenarioFailure):
            print(f"scenario {summary.name} failed: {summary.error}", file=sys.stderr)
            if status == EXIT_OK:
                status = EXIT_FAILURE
            continue
        _write_outputs(trace, summary, out, args.plot, cfg.plot_stride)
        print(f"{summary.name}: min {summary.min_lambda2:.6g} mean {summary.mean_lambda2:.6g} "
              f"final {summary.final_lambda2:.6g} disconnected {summary.steps_disconnected}")
    return status


def cmd_gne(args) -> int:
    try:
        cfg = load_scenario(args.scenario).with_overrides(mode=args.mode)
    except ScenarioError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    net = initial_network(cfg)
    stage = cfg.plan.stage_at(0) or cfg.plan.stages[0]
    res = gne_iterate(net, cfg.epsilon, cfg.max_rounds, StagePayoff(stage, cfg.tactical_mode), cfg.directions)
    cert = res.certificate
    print(json.dumps({
        "scenario": cfg.name,
        "converged": res.converged,
        "rounds": res.rounds,
        "initial_value": res.initial_value,
        "final_value": res.final_value,
        "certificate": {"holds": cert.holds, "worst_regret": cert.worst_regret, "violator": cert.violator},
    }, indent=2))
    return EXIT_OK if res.converged else EXIT_FAILURE


def cmd_verify(args) -> int:
    try:
        cfg = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok {cfg.name}: {cfg.network.n} agents, {cfg.network.layer_count} layers, "
          f"{len(cfg.attacks)} attacks, {cfg.total_steps} steps")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mosaic", description="Games-in-games mosaic network simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=("nominal", "robust"))
    r.add_argument("--plot", action="store_true")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="simulate every scenario in a directory")
    b.add_argument("--scenarios", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--plot", action="store_true")
    b.set_defaults(func=cmd_batch)

    g = sub.add_parser("gne", help="solve the initial stage game and print its certificate")
    g.add_argument("--scenario", required=True)
    g.add_argument("--mode", choices=("nominal", "robust"))
    g.set_defaults(func=cmd_gne)

    v = sub.add_parser("verify", help="check a scenario file against the schema")
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
