"""Command-line entry point: ``bnoprisk <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from bnoprisk import io
from bnoprisk.aggregate import extract
from bnoprisk.bnlearn import discretize, learn_cpts, learn_structure, marginal
from bnoprisk.harness import (
    ExperimentConfig,
    derive_seed,
    experiment_fig1,
    experiment_fig2,
    experiment_table1,
    generate_realization,
    load_config,
    staged_output,
    STAGE_VAR,
)
from bnoprisk.varengine import convolve_to_horizon, var_report


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", help="output directory (default $BNOPRISK_OUTPUT_DIR or ./bnoprisk-out)")
    p.add_argument("--window", type=int, help="aggregation window T")
    p.add_argument("--horizon", type=int, help="VaR horizon H in time steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnoprisk", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a correlated loss series")
    _common(p)

    p = sub.add_parser("aggregate", help="sum a series over windows of T steps")
    _common(p)
    p.add_argument("--input", required=True, help="series CSV")

    p = sub.add_parser("learn", help="discretize an extracted database and learn a network")
    _common(p)
    p.add_argument("--input", required=True, help="extracted database CSV")
    p.add_argument("--mode", choices=("greedy", "exhaustive"))

    p = sub.add_parser("var", help="VaR from a learned network")
    _common(p)
    p.add_argument("--input", required=True, help="network file written by 'learn'")

    p = sub.add_parser("experiment", help="reproduce a figure or table")
    _common(p)
    p.add_argument("name", choices=("fig1", "table1", "fig2"))
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.window is not None:
        changes["window"] = args.window
        if args.command == "experiment":
            changes["window_grid"] = (args.window,)
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_generate(cfg: ExperimentConfig) -> None:
    series, report = generate_realization(cfg, 0)
    with staged_output(cfg.output_dir) as tmp:
        io.write_series(series, tmp / "series.csv")
        io.write_report(report, tmp / "generator_report.txt")
        io.write_trace(report, tmp / "objective_trace.csv")


def cmd_aggregate(cfg: ExperimentConfig, path: str) -> None:
    if cfg.window is None:
        raise ValueError("aggregate needs --window or a 'window' config key")
    db = extract(io.read_series(path), cfg.window)
    with staged_output(cfg.output_dir) as tmp:
        io.write_database(db, tmp / "extracted.csv")


def cmd_learn(cfg: ExperimentConfig, path: str, mode: str | None) -> None:
    db = io.read_database(path)
    states, disc = discretize(db, cfg.n_states)
    dag = learn_structure(states, mode or cfg.structure_mode, cfg.n_states)
    net = learn_cpts(dag, states, cfg.n_states, db.process_labels)
    with staged_output(cfg.output_dir) as tmp:
        io.write_net(net, tmp / "net.txt", disc, db.window)
        io.write_edges(dag, db.process_labels, tmp / "edges.txt")


def cmd_var(cfg: ExperimentConfig, path: str) -> None:
    net, disc, window = io.read_net(path)
    if disc is None:
        raise ValueError(f"{path}: network file carries no bin maxima")
    window = cfg.window or window
    if window is None:
        raise ValueError("var needs --window or a network file with a 'window' line")
    horizon = cfg.effective_horizon
    marginals = [marginal(net, i, disc) for i in range(net.structure.n_nodes)]
    rng = np.random.default_rng(derive_seed(cfg.master_seed, 0, STAGE_VAR, window))
    report = var_report(marginals, window, horizon, cfg.repetitions, rng,
                        process_labels=net.node_labels)
    with staged_output(cfg.output_dir) as tmp:
        io.write_var_report(report, tmp / "var.csv")
        for lbl, pdf in zip(net.node_labels, marginals):
            io.write_pdf(convolve_to_horizon(pdf, window, horizon), tmp / f"pdf_{lbl}.csv")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "aggregate":
            cmd_aggregate(cfg, args.input)
        elif args.command == "learn":
            cmd_learn(cfg, args.input, args.mode)
        elif args.command == "var":
            cmd_var(cfg, args.input)
        else:
            runner = {"fig1": experiment_fig1, "table1": experiment_table1, "fig2": experiment_fig2}
            runner[args.name](cfg, Path(cfg.output_dir))
    except (ValueError, OSError, KeyError) as exc:
        print(f"bnoprisk {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
