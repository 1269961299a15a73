"""
Command-line entry point for the benchmark runner
bench run --config <path> | bench fig1 | bench fig2 | bench tables --which 1|3
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from analysis import figure2_tables
from bench import ExperimentConfig, grid_predictions, run_experiment, run_tables, write_report, write_tables
from errors import SinkError
from presets import get_figure_settings

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def setup_logging(level: str = "INFO"):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt='%H:%M:%S',
        force=True,
    )


def _env_workers() -> Optional[int]:
    value = os.environ.get("SINK_BENCH_WORKERS")
    return int(value) if value else None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Root seed (default: from config)")
    common.add_argument("--reps", type=int, default=None, help="Replications (default: from config)")
    common.add_argument("--out", type=Path, default=Path(os.environ.get("SINK_BENCH_OUT", "results")),
                        help="Output directory (default: $SINK_BENCH_OUT or ./results)")
    common.add_argument("--epsilon", type=float, default=None, help="SiNK floor on rho")
    common.add_argument("--threshold-m", type=float, default=None, help="Extreme |z-score| threshold")
    common.add_argument("--workers", type=int, default=_env_workers(),
                        help="Parallel replications (default: $SINK_BENCH_WORKERS or config)")
    common.add_argument("--log-level", default=os.environ.get("SINK_BENCH_LOG_LEVEL", "INFO"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)

    parser = argparse.ArgumentParser(prog="bench", description="SiNK and Kriging benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Run one experiment from a JSON config")
    run.add_argument("--config", type=Path, required=True, help="Path to an experiment JSON document")

    fig1 = sub.add_parser("fig1", parents=[common], help="Kriging vs SiNK grid on the Zakharov function")
    fig1.add_argument("--grid", type=int, default=None, help="Grid points per axis")

    sub.add_parser("fig2", parents=[common], help="Region MSPE ratio and critical threshold curves")

    tables = sub.add_parser("tables", parents=[common], help="Replicate a results table")
    tables.add_argument("--which", choices=["1", "3"], required=True)
    tables.add_argument("--pdf", action="store_true", help="Also render the table as PDF")
    tables.add_argument("--include-slow", action="store_true", help="Include slow-tier presets")
    return parser


def _overrides(args) -> Dict[str, Any]:
    return {
        "seed": args.seed,
        "replications": args.reps,
        "epsilon": args.epsilon,
        "threshold_m": args.threshold_m,
        "workers": args.workers,
    }


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config).with_overrides(**_overrides(args))
    report = run_experiment(cfg)
    write_report(report, args.out)
    if not report.replications:
        logger.error("Every replication of %s failed", cfg.name)
        return 3
    return 0


def cmd_fig1(args) -> int:
    settings = get_figure_settings("fig1")
    if args.grid is not None:
        settings["grid"] = args.grid
    if args.epsilon is not None:
        settings["epsilon"] = args.epsilon
    frame = grid_predictions(**settings)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "fig1_grid.csv"
    frame.to_csv(path, index=False)
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return 0


def cmd_fig2(args) -> int:
    settings = get_figure_settings("fig2")
    ratio, crit_z, crit_rho = figure2_tables(settings["rho_grid"], settings["M_grid"])
    args.out.mkdir(parents=True, exist_ok=True)
    for name, frame in (("fig2_ratio", ratio), ("fig2_critical_z", crit_z), ("fig2_critical_rho", crit_rho)):
        path = args.out / f"{name}.csv"
        frame.to_csv(path, index=False)
        logger.info("Wrote %s", path)
    return 0


def cmd_tables(args) -> int:
    result = run_tables(args.which, _overrides(args), include_slow=args.include_slow)
    write_tables(result, args.out, pdf=args.pdf)
    if result.reports and not any(r.replications for r in result.reports.values()):
        logger.error("Every replication of table %s failed", args.which)
        return 3
    return 0


COMMANDS = {
    "run": cmd_run,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "tables": cmd_tables,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except SinkError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
