from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from fuzzydsr.cli.commands import cmd_evaluate, cmd_prepare, cmd_synth, cmd_train
from fuzzydsr.config import ConfigError, Method, Settings, SyntheticSpec, get_settings, load_run_config
from fuzzydsr.services.artifacts import ArtifactError
from fuzzydsr.services.constraints import ConstraintError, SearchMode
from fuzzydsr.services.controller import ControllerError
from fuzzydsr.services.expression import ExpressionError
from fuzzydsr.services.fuzzy_ops import FuzzyValueError
from fuzzydsr.services.metrics import MetricsError, RewardKind
from fuzzydsr.services.report import ReportError
from fuzzydsr.services.tokens import LibraryError
from fuzzydsr.services.trainer import TrainingError
from fuzzydsr.services.transactions import DataError

logger = logging.getLogger(__name__)

KNOWN_ERRORS = (
    ArtifactError,
    ConfigError,
    ConstraintError,
    ControllerError,
    DataError,
    ExpressionError,
    FuzzyValueError,
    LibraryError,
    MetricsError,
    ReportError,
    TrainingError,
)


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(
        level=getattr(logging, settings.log_level_name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML run config")
    parser.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    parser.add_argument("--method", choices=[m.value for m in Method])
    parser.add_argument("--reward", choices=[k.value for k in RewardKind])
    parser.add_argument(
        "--constrained",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="force an implication root (--no-constrained searches freely)",
    )
    parser.add_argument("--n-samples", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--entropy-weight", type=float)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--noise-level", type=float)
    parser.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzydsr", description="Search fuzzy-logic fraud rules.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("prepare", "engineer, split and fuzzify the configured data source"),
        ("train", "train every configured method over every seed"),
        ("evaluate", "score trained rules on the test split and extract the Pareto front"),
    ):
        _add_run_flags(sub.add_parser(name, help=text))
    sub.choices["evaluate"].add_argument("--results", type=Path, help="results folder (default <out>/results)")

    synth = sub.add_parser("synth", help="write a PaySim-schema CSV of synthetic transactions")
    synth.add_argument("--rows", type=int, default=10_000)
    synth.add_argument("--fraud-rate", type=float)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--planted-rule", help="label rows with this rendered rule")
    synth.add_argument("--label-noise", type=float)
    synth.add_argument("--out", type=Path, required=True, help="CSV file to write")
    return parser


def run_overrides(args: argparse.Namespace) -> dict[str, object]:
    mode = None
    if args.constrained is not None:
        mode = SearchMode.CONSTRAINED if args.constrained else SearchMode.UNCONSTRAINED
    return {
        "seeds": [args.seed] if args.seed is not None else None,
        "methods": [args.method] if args.method is not None else None,
        "reward_kind": args.reward,
        "mode": mode.value if mode else None,
        "n_samples": args.n_samples,
        "batch_size": args.batch_size,
        "epsilon": args.epsilon,
        "learning_rate": args.learning_rate,
        "entropy_weight": args.entropy_weight,
        "sigmoid_threshold": args.threshold,
        "noise_level": args.noise_level,
        "output_dir": args.out,
    }


def dispatch(args: argparse.Namespace) -> None:
    if args.command == "synth":
        spec_values = {
            "n_rows": args.rows,
            "seed": args.seed,
            "planted_rule": args.planted_rule,
            "fraud_rate": args.fraud_rate,
            "label_noise": args.label_noise,
        }
        try:
            spec = SyntheticSpec(**{k: v for k, v in spec_values.items() if v is not None})
        except ValueError as exc:
            raise ConfigError(f"Invalid synthetic settings: {exc}") from exc
        cmd_synth(spec, args.out)
        return

    config = load_run_config(args.config, run_overrides(args))
    if args.command == "prepare":
        cmd_prepare(config)
    elif args.command == "train":
        cmd_train(config)
    else:
        cmd_evaluate(config, args.results)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(get_settings())
    try:
        dispatch(args)
    except KNOWN_ERRORS as exc:
        logger.debug("command_failed command=%s", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
