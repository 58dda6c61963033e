import argparse
import sys
from typing import Callable, Dict, List, NamedTuple, Optional

from config import paths
from data_models.config_validator import StudyKind
from errors import BoseLabError, ConfigValidationError
from experiments.studies import (
    run_fluctuation_comparison,
    run_kernel_convergence,
    run_nls_convergence,
    run_scattering_study,
)
from experiments.suite import run_suite
from logger import get_logger, log_error
from schema.experiment_schema import load_experiment_schema
from utils import ResourceTracker, read_json_as_dict, set_seeds

logger = get_logger(task_name="cli")

EXIT_OK = 0
EXIT_UNEXPECTED = 3


class Command(NamedTuple):
    kind: StudyKind
    runner: Callable
    config_path: str
    output_dir: str
    error_path: str


COMMANDS: Dict[str, Command] = {
    "scattering": Command(
        StudyKind.SCATTERING,
        run_scattering_study,
        paths.SCATTERING_CONFIG_FILE_PATH,
        paths.SCATTERING_OUTPUT_DIR,
        paths.SCATTERING_ERROR_FILE_PATH,
    ),
    "nls": Command(
        StudyKind.NLS_CONVERGENCE,
        run_nls_convergence,
        paths.NLS_CONFIG_FILE_PATH,
        paths.NLS_OUTPUT_DIR,
        paths.NLS_ERROR_FILE_PATH,
    ),
    "kernels": Command(
        StudyKind.KERNEL_CONVERGENCE,
        run_kernel_convergence,
        paths.KERNELS_CONFIG_FILE_PATH,
        paths.KERNELS_OUTPUT_DIR,
        paths.KERNELS_ERROR_FILE_PATH,
    ),
    "fluct": Command(
        StudyKind.FLUCTUATION_COMPARISON,
        run_fluctuation_comparison,
        paths.FLUCT_CONFIG_FILE_PATH,
        paths.FLUCT_OUTPUT_DIR,
        paths.FLUCT_ERROR_FILE_PATH,
    ),
    "suite": Command(
        StudyKind.PROPERTY_SUITE,
        None,
        paths.SUITE_CONFIG_FILE_PATH,
        paths.SUITE_OUTPUT_DIR,
        paths.SUITE_ERROR_FILE_PATH,
    ),
}


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="bose-lab",
        description="Convergence studies and property checks for the norm approximation of Bose gases.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        sub = subparsers.add_parser(name, help=f"run the {command.kind.value} study")
        sub.add_argument("--config", default=command.config_path, help="experiment file")
        sub.add_argument("--out", default=None, help="output directory")
        sub.add_argument("--threads", type=int, default=1, help="worker count")
        sub.add_argument("--seed", type=int, default=None, help="random seed (u64)")
    return parser.parse_args(argv)


def run_command(
    name: str,
    config_path: Optional[str] = None,
    output_dir: Optional[str] = None,
    threads: int = 1,
    seed: Optional[int] = None,
) -> int:
    """
    Run one study and return its exit code.

    Args:
        name (str): Command name (scattering, nls, kernels, fluct, suite).
        config_path (Optional[str]): Experiment file; the command's default
            file when omitted.
        output_dir (Optional[str]): Output directory; falls back to the
            [output] section and then to the command's default directory.
        threads (int): Worker count.
        seed (Optional[int]): Seed; the run configuration's seed when omitted.

    Returns:
        int: 0 on success, 2 on validation errors, 3 on numerical failures.
    """
    command = COMMANDS[name]
    run_config = read_json_as_dict(paths.RUN_CONFIG_FILE_PATH)
    try:
        with ResourceTracker(logger=logger, monitoring_interval=run_config["monitoring_interval"]):
            logger.info(f"Starting {name}...")
            if threads < 1:
                raise ConfigValidationError(
                    "Invalid command line.", [("threads", f"must be at least 1. Given {threads}")]
                )
            logger.info("Loading config...")
            schema = load_experiment_schema(config_path or command.config_path)
            if schema.kind != command.kind.value:
                raise ConfigValidationError(
                    "Configuration does not match the command.",
                    [("study.kind", f"expected {command.kind.value}. Given {schema.kind}")],
                )
            target_dir = output_dir or schema.output_dir or command.output_dir

            logger.info("Setting seeds...")
            seed_value = run_config["seed_value"] if seed is None else seed
            set_seeds(seed_value=seed_value)

            if command.kind == StudyKind.PROPERTY_SUITE:
                run_suite(schema, target_dir, seed=seed_value, n_jobs=threads)
            else:
                command.runner(schema, target_dir, n_jobs=threads)
        logger.info(f"{name} completed successfully")
        return EXIT_OK

    except BoseLabError as exc:
        err_msg = f"Error occurred during {name}."
        logger.error(f"{err_msg} Error: {str(exc)}")
        log_error(message=err_msg, error=exc, error_fpath=command.error_path)
        return exc.exit_code

    except Exception as exc:
        err_msg = f"Unexpected error occurred during {name}."
        logger.error(f"{err_msg} Error: {str(exc)}")
        log_error(message=err_msg, error=exc, error_fpath=command.error_path)
        return EXIT_UNEXPECTED


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    return run_command(
        args.command,
        config_path=args.config,
        output_dir=args.out,
        threads=args.threads,
        seed=args.seed,
    )


if __name__ == "__main__":
    sys.exit(main())
