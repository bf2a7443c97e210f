"""Command-line entry point: run sweeps, fit slopes, print sizing reports and the config schema."""

import argparse
import json
import sys
from pathlib import Path

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from .config import DEFAULT_JOBS, LOG_LEVEL, OUTPUT_PATH, setup_logging
from .errors import ConfigError, DataError, DsamdError
from .harness import corollary_reports, emit, fit_slope, run_sweep
from .models import ExperimentConfig
from .utils.file_manager import ArtifactManager


def load_config(path: Path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    config = ExperimentConfig.model_validate_json(text)
    if seed is not None:
        config = config.model_copy(update={"master_seed": seed})
    return config


def slope_from_csv(path: Path) -> float:
    """Fit the log-log slope of the mean final gap per network size in a trace CSV."""
    try:
        frame = pd.read_csv(path, dtype={"node": str}, float_precision="round_trip")
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read traces from {path}: {e}") from e
    missing = {"m", "T", "instance", "round", "node", "gap"} - set(frame.columns)
    if missing:
        raise DataError(f"{path} lacks columns {sorted(missing)}")

    means = frame[frame["node"] == "mean"]
    finals = means.loc[means.groupby(["m", "instance"])["round"].idxmax()]
    per_m = finals.groupby(["m", "T"], as_index=False)["gap"].mean()
    return fit_slope(list(zip((per_m["m"] * per_m["T"]).tolist(), per_m["gap"].tolist(), strict=True)))


def cmd_run(args: argparse.Namespace) -> None:
    out_dir = Path(args.out)
    ArtifactManager(out_dir).ensure_dir()
    logger.add(out_dir / "dsamd.log", rotation="500 MB", level="DEBUG")
    config = load_config(args.config, args.seed)
    result = run_sweep(config, jobs=args.jobs)
    emit(result, out_dir)
    for name, slope in result.slopes.items():
        print(f"{name}: slope={'n/a' if slope is None else f'{slope:.4f}'}")


def cmd_slope(args: argparse.Namespace) -> None:
    print(f"{slope_from_csv(Path(args.input)):.6f}")


def cmd_bounds(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    reports = corollary_reports(config)
    print(ArtifactManager(OUTPUT_PATH).render_text("corollary.txt.jinja2", reports=reports), end="")


def cmd_schema(args: argparse.Namespace) -> None:
    print(json.dumps(ExperimentConfig.model_json_schema(), indent=2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsamd", description=__doc__)
    parser.add_argument("--log-level", default=None, help="Override DSAMD_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a Monte Carlo sweep and write its artifacts")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, default=OUTPUT_PATH, help="Output directory (default: DSAMD_OUTPUT_PATH)")
    run.add_argument("--seed", type=int, default=None, help="Override the config's master seed")
    run.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Worker processes (default: DSAMD_JOBS)")
    run.set_defaults(handler=cmd_run)

    slope = commands.add_parser("slope", help="Fit the log-log slope of final gaps in a trace CSV")
    slope.add_argument("--in", dest="input", required=True, type=Path)
    slope.set_defaults(handler=cmd_slope)

    bounds = commands.add_parser("bounds", help="Print the mini-batch and communication sizing reports")
    bounds.add_argument("--config", required=True, type=Path)
    bounds.set_defaults(handler=cmd_bounds)

    schema = commands.add_parser("schema", help="Print the experiment config JSON schema")
    schema.set_defaults(handler=cmd_schema)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or LOG_LEVEL)

    try:
        args.handler(args)
    except ValidationError as e:
        logger.error(f"Invalid config: {e}")
        return 1
    except DsamdError as e:
        logger.error(str(e))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
