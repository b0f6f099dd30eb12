"""
Command-line entry point
Duality Workbench experiment runner
"""
import argparse
import logging
import sys
from typing import List, Optional

from dualbench.application.errors import CHECK_FAILURE, CheckFailed, DualbenchError
from dualbench.cli.dependencies import get_context, load_config
from dualbench.cli.report import Report
from dualbench.cli.routes import ROUTES
from dualbench.cli.routes.catalog import catalog_lines
from dualbench.config import config

logger = logging.getLogger("dualbench")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualbench",
        description="Construct interacting particle systems, derive duality functions from "
                    "symmetries and verify them exactly and by simulation",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="Run one experiment file")
    run.add_argument("--config", required=True, metavar="PATH", help="Experiment file (JSON)")
    run.add_argument("--seed", type=int, default=None, help="Override the file's seed")
    run.add_argument("--threads", type=int, default=1, help="Monte Carlo worker threads")
    run.add_argument("--out", default=None, metavar="DIR",
                     help=f"Artifact directory (default $DUALBENCH_OUT_DIR or {config.OUTPUT_DIR})")
    commands.add_parser("catalog", help="List model kinds and supported checks")
    return parser


def run_experiment(path: str, seed: Optional[int] = None, threads: int = 1,
                   out: Optional[str] = None) -> Report:
    """
    Execute one experiment and write its artifacts

    Returns:
        The written report

    Raises:
        DualbenchError: configuration or model errors
    """
    ctx = get_context(load_config(path), seed=seed, threads=threads, out_dir=out)
    experiment = ctx.run.experiment.value
    report = Report(experiment, ctx.model.kind.value, ctx.seed)
    logger.info("Running %s on %s (seed %d, %d threads)", experiment, ctx.model.kind.value,
                ctx.seed, ctx.threads)
    ROUTES[experiment](ctx, report)
    report.write(ctx.out_dir)
    return report


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if config.DEBUG else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "catalog":
        print("\n".join(catalog_lines()))
        return 0

    print(f"{config.APP_NAME} v{config.APP_VERSION} starting...", file=sys.stderr)
    try:
        report = run_experiment(args.config, seed=args.seed, threads=args.threads, out=args.out)
    except DualbenchError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.status
    if not report.passed:
        failure = CheckFailed("failing checks: " + ", ".join(report.failures))
        logger.error("%s", failure)
        return CHECK_FAILURE
    logger.info("All checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
