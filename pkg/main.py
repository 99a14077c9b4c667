import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from src.analysis.invariant_suite import InvariantSuite
from src.analysis.sweep_runner import SweepRunner
from src.data.config_loader import ConfigLoader
from src.data.results_writer import ResultsWriter
from src.models.errors import ConfigValidationError
from src.models.experiment import ExperimentConfig
from src.models.experiment import ExperimentKind
from src.models.experiment import SweepResult


load_dotenv()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def setup_logging(level: str | None = None):
    level = (level or os.getenv("QTHERMO_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    # flag, then the config file, then the environment
    if args.threads is not None:
        update["threads"] = args.threads
    elif "threads" not in config.model_fields_set and os.getenv("QTHERMO_THREADS"):
        update["threads"] = int(os.environ["QTHERMO_THREADS"])
    if args.output:
        update["output"] = config.output.model_copy(update={"path": args.output})
    return ExperimentConfig.model_validate({**config.model_dump(), **update}) if update else config


def run_experiment(config: ExperimentConfig) -> SweepResult:
    if config.kind == ExperimentKind.INVARIANTS:
        return InvariantSuite(config).run()
    return SweepRunner(config).run()


def command_run(args: argparse.Namespace) -> int:
    config = apply_overrides(ConfigLoader.load_from_file(args.config), args)
    result = run_experiment(config)
    csv_file, sidecar = ResultsWriter.write(result, config)

    summary = result.summary()
    print(f"{config.kind.value}: {len(result.rows)} rows -> {csv_file} ({sidecar.name})")
    print(f"Invariants: {summary['passed']}/{summary['checked']} passed")
    for failure in summary["failures"]:
        print(f"  FAILED {failure}")
    return EXIT_OK if result.passed else EXIT_FAILURE


def command_validate(args: argparse.Namespace) -> int:
    problems = ConfigLoader.validate(args.config)
    if not problems:
        print(f"{args.config}: ok")
        return EXIT_OK
    for problem in problems:
        print(f"{args.config}: {problem}")
    return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Strong-coupling quantum thermodynamics bench")
    parser.add_argument("--log-level", type=str, default=None, help="Logging level (default INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run an experiment config")
    run.add_argument("config", type=str, help="Path to the INI config")
    run.add_argument("--output", type=str, default=None, help="CSV destination")
    run.add_argument("--threads", type=int, default=None, help="Worker threads for sweep points")
    run.add_argument("--seed", type=int, default=None, help="Seed for every random draw")
    run.set_defaults(handler=command_run)

    validate = subparsers.add_parser("validate", help="Check a config without running it")
    validate.add_argument("config", type=str, help="Path to the INI config")
    validate.set_defaults(handler=command_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        return args.handler(args)
    except ConfigValidationError as e:
        for diagnostic in e.diagnostics:
            print(f"Error: {diagnostic}")
        return EXIT_CONFIG
    except Exception as e:
        print(f"Error: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
