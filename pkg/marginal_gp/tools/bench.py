#!/usr/bin/env python3
"""Benchmark CLI: ML-II, HMC and nested sampling on spectral mixture GP tasks.

Subcommands:
    run        experiment described by a YAML config file
    synth      synthetic two-component kernel task
    pattern2d  2-D pattern extrapolation task
    report     re-aggregate an existing results directory
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from ..bench.report import RESULTS_FILE, ResultRow, emit_report, load_results, summarize
from ..config import METHODS, ExperimentConfig, read_config_payload
from ..errors import MarginalGPError
from ..logging_utils import configure_logging
from ..workflows.experiment_runner import ExperimentRunner


def _add_common_options(parser: argparse.ArgumentParser, config_required: bool = False) -> None:
    parser.add_argument("--config", type=Path, required=config_required, help="YAML experiment configuration")
    parser.add_argument("--method", nargs="+", choices=METHODS, help="Inference methods to run")
    parser.add_argument("--q", type=int, help="Number of spectral components")
    parser.add_argument("--live-points", type=int, help="Nested sampling live points")
    parser.add_argument("--seeds", type=int, nargs="+", help="Seeds, one cell per seed")
    parser.add_argument("--out", type=Path, help="Output directory for the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Marginalised spectral mixture GP benchmark")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run the experiment described by a config file")
    _add_common_options(run, config_required=True)
    run.add_argument("--data", type=Path, nargs="+", help="Time-series CSV files (x,y)")

    synth = subparsers.add_parser("synth", help="Synthetic two-component kernel task")
    _add_common_options(synth)
    synth.add_argument("--n", type=int, help="Training points")
    synth.add_argument("--noise", type=float, help="Observation noise standard deviation")
    synth.add_argument("--seed", type=int, help="Single seed (shorthand for --seeds)")
    synth.add_argument("--preset", choices=("default", "recovery"), help="Generating kernel")

    pattern = subparsers.add_parser("pattern2d", help="2-D pattern extrapolation task")
    _add_common_options(pattern)
    pattern.add_argument("--n-train", type=int, help="Training points")
    pattern.add_argument("--grid", type=int, help="Test grid points per side")

    report = subparsers.add_parser("report", help="Re-aggregate a results directory")
    report.add_argument("--in", dest="input_dir", type=Path, required=True, help="Directory holding results.csv")
    report.add_argument("--out", type=Path, help="Output directory (defaults to --in)")
    return parser


def _section(payload: dict[str, Any], name: str, **overrides: Any) -> None:
    values = {key: value for key, value in overrides.items() if value is not None}
    if values:
        payload[name] = {**(payload.get(name) or {}), **values}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the optional config file with command-line overrides."""

    payload = read_config_payload(args.config) if args.config else {}
    if args.command == "run" and args.data:
        payload["data_paths"] = [str(path) for path in args.data]
        payload.setdefault("task", "timeseries")
    if args.command in ("synth", "pattern2d"):
        payload["task"] = "synthetic" if args.command == "synth" else args.command
    if args.method:
        payload["methods"] = args.method
    if args.q is not None:
        payload["q_components"] = args.q
    if args.seeds:
        payload["seeds"] = args.seeds
    if args.out is not None:
        payload["output_dir"] = str(args.out)
    _section(payload, "nested", live_points=args.live_points)
    if args.command == "synth":
        if args.seed is not None:
            payload["seeds"] = [args.seed]
        _section(payload, "synthetic", n_train=args.n, noise_sd=args.noise, preset=args.preset)
    if args.command == "pattern2d":
        _section(payload, "pattern2d", n_train=args.n_train, grid=args.grid)
    return ExperimentConfig.from_dict(payload)


def print_summary(rows: Sequence[ResultRow]) -> None:
    print(f"{'dataset':<28} {'method':<7} {'runs':>4} {'nlpd':>18} {'coverage':>16} {'seconds':>9}")
    for entry in summarize(rows):
        print(
            f"{entry.dataset:<28} {entry.method:<7} {entry.n_runs:>4} "
            f"{entry.nlpd_mean:>9.3f} ± {entry.nlpd_se:<6.3f} "
            f"{entry.coverage95_mean:>7.3f} ± {entry.coverage95_se:<6.3f} "
            f"{entry.wall_seconds_mean:>9.2f}"
        )
    failed = [row for row in rows if not row.ok]
    for row in failed:
        print(f"FAILED {row.dataset} {row.method} seed={row.seed}: {row.error}")


def run_benchmark(config: ExperimentConfig) -> int:
    configure_logging(config.logging.level, config.logging.file)
    outcome = ExperimentRunner(config).run()
    written = emit_report(outcome.rows, config.output_dir, outcome.predictions)
    print_summary(outcome.rows)
    print(f"\nReport written to {written['results'].parent}")
    return 0 if any(row.ok for row in outcome.rows) else 1


def run_report(input_dir: Path, out_dir: Path | None) -> int:
    rows = load_results(input_dir / RESULTS_FILE)
    emit_report(rows, out_dir or input_dir)
    print_summary(rows)
    return 0


def main(argv: Sequence[str] | None = None) -> None:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "report":
            status = run_report(args.input_dir, args.out)
        else:
            status = run_benchmark(build_config(args))
    except KeyboardInterrupt:
        print("\n\nBenchmark cancelled by user.")
        sys.exit(1)
    except (MarginalGPError, ValueError, OSError, yaml.YAMLError) as exc:
        print(f"\nError: {exc}", file=sys.stderr)
        sys.exit(2)
    sys.exit(status)


if __name__ == "__main__":
    main()
