"""
Command-line entry point

=== COMMANDS ===
    run        --config PATH [--seed N] [--out DIR] [--strategy S]
    compare    --inputs DIR DIR... [--out DIR]
    plot       --input CSV... --out FILE.svg
    check-grad [--seeds N]
    sr-dump    --checkpoint PATH [--out CSV]

=== EXIT CODES ===
0 success, 1 invalid configuration, 2 any other failure
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from activeil import __version__
from activeil.config import load_config
from activeil.core.exceptions import ConfigError
from activeil.core.logging import setup_logging

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activeil", description="Query-efficient active imitation learning lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides run.log_level")
    parser.add_argument("--log-file", default=None, help="extra rotating log file")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train every seed of a config and write results")
    run.add_argument("--config", type=Path, default=None, help="`section.key = value` config file")
    run.add_argument("--seed", type=int, default=None, help="run only this seed")
    run.add_argument("--out", type=Path, default=None, help="overrides run.output_dir")
    run.add_argument("--strategy", choices=["coreset_sr", "random", "uncertainty"], default=None)

    cmp_ = sub.add_parser("compare", help="compare strategy result directories")
    cmp_.add_argument("--inputs", type=Path, nargs="+", required=True)
    cmp_.add_argument("--out", type=Path, default=None, help="write comparison.json / comparison.txt here")

    plot = sub.add_parser("plot", help="learning curves as SVG")
    plot.add_argument("--input", type=Path, nargs="+", required=True, help="metrics.csv file(s)")
    plot.add_argument("--out", type=Path, required=True)
    plot.add_argument("--title", default="")

    grad = sub.add_parser("check-grad", help="finite-difference check of every analytic gradient")
    grad.add_argument("--seeds", type=int, default=20)

    dump = sub.add_parser("sr-dump", help="SR vectors of every maze cell from a checkpoint")
    dump.add_argument("--checkpoint", type=Path, required=True)
    dump.add_argument("--out", type=Path, default=None)
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    from activeil.services.experiment_service import run_experiment

    overrides = {}
    if args.seed is not None:
        overrides.setdefault("run", {})["seeds"] = [args.seed]
    if args.out is not None:
        overrides.setdefault("run", {})["output_dir"] = str(args.out)
    if args.strategy is not None:
        overrides["query"] = {"strategy": args.strategy}
    config = load_config(args.config, **overrides)
    if args.log_level is None:
        setup_logging(config.run.log_level, args.log_file)
    outputs = run_experiment(config)
    for out in outputs:
        s = out.summary
        print(f"seed {s.seed}: return {s.final_return:.2f} / expert {s.expert_return:.2f}, "
              f"{s.total_queries} queries -> {out.directory}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    from activeil.services.report_service import compare, format_report, write_report

    report = compare(args.inputs)
    print(format_report(report), end="")
    if args.out is not None:
        write_report(report, args.out)
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    import matplotlib.pyplot as plt

    from activeil.services.plot_service import emit_plot
    from activeil.utils.csv_io import read_metrics_csv

    metrics = pd.concat([read_metrics_csv(p) for p in args.input], ignore_index=True)
    fig = emit_plot(metrics, args.out, args.title)
    plt.close(fig)
    print(args.out)
    return EXIT_OK


def cmd_check_grad(args: argparse.Namespace) -> int:
    from activeil.services.diagnostics_service import GRAD_TOLERANCE, check_gradients

    worst = check_gradients(range(args.seeds))
    for name, err in worst.items():
        print(f"{name:<10} {err:.3e}")
    return EXIT_OK if all(err <= GRAD_TOLERANCE for err in worst.values()) else EXIT_FAILURE


def cmd_sr_dump(args: argparse.Namespace) -> int:
    from activeil.services.diagnostics_service import sr_dump

    frame = sr_dump(args.checkpoint, args.out)
    if args.out is None:
        print(frame.to_csv(index=False, lineterminator="\n"), end="")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "check-grad": cmd_check_grad,
    "sr-dump": cmd_sr_dump,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or "INFO", args.log_file)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError) as exc:
        logger.error(f"❌ Invalid configuration: {exc}")
        return EXIT_CONFIG
    except Exception as exc:
        logger.exception(f"❌ {args.command} failed: {exc}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
