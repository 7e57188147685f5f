"""Command-line entry point for PT-Weyl.

Subcommands select which observables a run produces; every other option
overrides a field of the experiment configuration. The exit code is 0 on full
success, 2 for an unusable configuration, and otherwise the number of failed
tasks (capped at 255).
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.core.config import settings
from src.core.errors import ConfigurationError
from src.core.logging import get_logger, setup_logging
from src.models.experiment import ExperimentConfig, Observable
from src.services.experiment_runner import load_config, run_experiment, validate_config

logger = get_logger(__name__)

EXIT_CONFIG_ERROR = 2
MAX_EXIT_CODE = 255

# Kicked rotator at k = 8 with E_T = 1/5.
DEFAULT_SYSTEM: Dict[str, Any] = {
    "M": 400,
    "N": 80,
    "dynamics": {"kind": "kicked_rotator", "k": 8.0},
}

COMMAND_OBSERVABLES: Dict[str, Optional[List[Observable]]] = {
    "spectrum": [Observable.SPECTRUM],
    "sweep": None,
    "husimi": [Observable.HUSIMI],
    "classical": [Observable.CLASSICAL],
    "rmt": [Observable.HISTOGRAM, Observable.FRACTION, Observable.SCALING, Observable.TRANSITION],
}
RMT_DEFAULT_ENSEMBLE = 10


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptweyl",
        description="Spectra, fractal Weyl scaling and phase-space supports of PT-symmetric maps",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment configuration (.toml or .json)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker threads")
    common.add_argument("--seed", type=int, default=None, help="base RNG seed (u64)")
    common.add_argument("--m", type=int, action="append", help="system size M (repeatable)")
    common.add_argument("--mu", type=float, action="append", help="gain/loss rate (repeatable)")
    common.add_argument("--k", type=float, default=None, help="kicking strength")
    common.add_argument("--thouless-energy", type=float, default=None, help="E_T = N/M")
    common.add_argument(
        "--allow-large", action="store_true", help="permit M above the desk-scale limit"
    )
    common.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
        help="override PTWEYL_LOG_LEVEL",
    )

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="diagonalize and write spectra")
    sub.add_parser("sweep", parents=[common], help="run the configured observables")
    sub.add_parser("husimi", parents=[common], help="Husimi supports of spectral subspaces")
    sub.add_parser("classical", parents=[common], help="coupled regions and trapped sets")
    sub.add_parser("rmt", parents=[common], help="random-matrix (COE) baseline")
    return parser


def _base_data(args: argparse.Namespace) -> Dict[str, Any]:
    if args.config is not None:
        return load_config(args.config).model_dump(mode="json", exclude_unset=True)
    return {"system": dict(DEFAULT_SYSTEM)}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the config file (if any) with command-line overrides."""
    data = _base_data(args)
    system = dict(data.get("system", DEFAULT_SYSTEM))

    if args.command == "rmt":
        system["dynamics"] = {"kind": "coe"}
        if "ensemble_seeds" not in data:
            data.setdefault("ensemble_size", RMT_DEFAULT_ENSEMBLE)
    if args.k is not None:
        system["dynamics"] = {"kind": "kicked_rotator", "k": args.k}
    if args.seed is not None:
        system["seed"] = args.seed
    data["system"] = system

    if args.m:
        data["m_list"] = args.m
    if args.mu:
        data["mu_list"] = args.mu
    if args.thouless_energy is not None:
        data["thouless_energy"] = args.thouless_energy
    if args.out is not None:
        data["output_dir"] = str(args.out)
    if args.allow_large:
        data["allow_large_systems"] = True

    observables = COMMAND_OBSERVABLES[args.command]
    if observables is not None:
        data["observables"] = [o.value for o in observables]

    return validate_config(data, args.config)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)

    try:
        config = build_config(args)
        logger.info(
            f"Starting {settings.app_name} {args.command}",
            extra={"config_hash": config.config_hash(), "output_dir": str(config.output_dir)},
        )
        manifest = run_experiment(config, threads=args.threads)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR

    return min(manifest.failed, MAX_EXIT_CODE)


if __name__ == "__main__":
    sys.exit(main())
