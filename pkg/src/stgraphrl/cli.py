from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np

from stgraphrl.autodiff.gradcheck import NonDeterministicFunctionError
from stgraphrl.autodiff.tensor import TensorDomainError
from stgraphrl.config import TrainConfig, load_train_config
from stgraphrl.evaluation.reports import write_embeddings
from stgraphrl.graph.build import build_graphs
from stgraphrl.graph.codec import read_graph_dir, write_graph_dir
from stgraphrl.graph.stats import graph_stats, write_stats
from stgraphrl.ingest.categories import CategoryMap, default_category_map
from stgraphrl.ingest.checkins import FormatConfig, parse_checkins
from stgraphrl.ingest.sessions import build_histories
from stgraphrl.ingest.store import read_trajectory_store, write_trajectory_store
from stgraphrl.model.checkpoint import load_checkpoint, save_checkpoint
from stgraphrl.model.forward import infer, user_embedding
from stgraphrl.services.diagnostics import (
    DEFAULT_GRADCHECK_SEED,
    DEFAULT_GRADCHECK_THRESHOLD,
    gradient_check,
)
from stgraphrl.services.evaluation import DEFAULT_RESPONSE_BINS, EvaluationPipeline
from stgraphrl.services.training import (
    carve_validation,
    load_training_state,
    read_split,
    save_training_state,
    split_dataset,
    train,
    write_split,
)
from stgraphrl.synth.generator import generate, read_labels, write_checkins, write_labels
from stgraphrl.synth.profiles import default_profiles

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULT_SYNTH_SEED = 7
DEFAULT_USERS_PER_PROFILE = 50
DEFAULT_DAYS = 10


class UsageError(Exception):
    pass


class GradientCheckFailure(ArithmeticError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value training config file")
    parser.add_argument("--seed", type=int, help="seed for every stochastic step")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stgraphrl", description="Trajectory graph representation learning.")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    synth = commands.add_parser("synth", help="generate a synthetic check-in corpus")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--users-per-profile", type=int, default=DEFAULT_USERS_PER_PROFILE)
    synth.add_argument("--days", type=int, default=DEFAULT_DAYS)

    ingest = commands.add_parser("ingest", help="parse check-ins into the trajectory store")
    ingest.add_argument("--input", type=Path, required=True)
    ingest.add_argument("--out", type=Path, required=True)
    ingest.add_argument("--format", choices=("csv", "foursquare"), default="csv")
    ingest.add_argument("--category-map", type=Path)
    ingest.add_argument("--strict", action="store_true")
    ingest.add_argument("--jobs", type=int, default=1)

    build = commands.add_parser("build-graph", help="build one graph file per user")
    build.add_argument("--input", type=Path, required=True)
    build.add_argument("--out", type=Path, required=True)
    build.add_argument("--jobs", type=int, default=1)

    stats = commands.add_parser("stats", help="corpus summary and histograms")
    stats.add_argument("--input", type=Path, required=True)
    stats.add_argument("--out", type=Path, required=True)

    train_cmd = commands.add_parser("train", help="train on a graph directory")
    train_cmd.add_argument("--input", type=Path, required=True)
    train_cmd.add_argument("--out", type=Path, required=True)
    train_cmd.add_argument("--epochs", type=int, help="override max_epochs")
    train_cmd.add_argument("--resume", type=Path, help="training state to continue from")

    evaluate = commands.add_parser("eval", help="metrics, correlations and latent reports")
    evaluate.add_argument("--input", type=Path, required=True)
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, required=True)
    evaluate.add_argument("--trajectories", type=Path)
    evaluate.add_argument("--labels", type=Path, help="user_id,profile_id table")
    evaluate.add_argument("--threshold", type=float, default=0.5)
    evaluate.add_argument("--bins", type=int, default=DEFAULT_RESPONSE_BINS)

    export = commands.add_parser("export-embeddings", help="write per-user embeddings")
    export.add_argument("--input", type=Path, required=True)
    export.add_argument("--checkpoint", type=Path, required=True)
    export.add_argument("--out", type=Path, required=True)

    check = commands.add_parser("gradcheck", help="finite-difference gradient check")
    check.add_argument("--threshold", type=float, default=DEFAULT_GRADCHECK_THRESHOLD)
    check.add_argument(
        "--entries-per-tensor",
        type=int,
        help="check a seeded sample of each tensor instead of every entry",
    )

    for subparser in commands.choices.values():
        _add_common(subparser)
    return parser


def _resolve_config(args: argparse.Namespace) -> TrainConfig:
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        overrides["max_epochs"] = args.epochs
    return load_train_config(args.config, overrides)


def _print_config(config: TrainConfig, seed: int) -> None:
    for line in config.resolved():
        print(line)
    print(f"run seed = {seed}")


def _command_synth(args: argparse.Namespace, config: TrainConfig) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_SYNTH_SEED
    _print_config(config, seed)
    corpus = generate(default_profiles(), args.users_per_profile, args.days, seed)
    write_checkins(corpus.records, args.out / "checkins.csv")
    write_labels(corpus.labels, args.out / "labels.csv")
    for profile_id, distance in corpus.worst_total_variation().items():
        print(f"total_variation {profile_id} max = {distance:.4f}")
    return EXIT_OK


def _command_ingest(args: argparse.Namespace, config: TrainConfig) -> int:
    _print_config(config, config.seed)
    format_config = (
        FormatConfig.foursquare(strict=args.strict)
        if args.format == "foursquare"
        else FormatConfig(strict=args.strict)
    )
    category_map = (
        CategoryMap.load(args.category_map) if args.category_map else default_category_map()
    )
    with args.input.open("rb") as stream:
        parsed = parse_checkins(stream, format_config)
    result = build_histories(parsed, category_map, jobs=args.jobs)
    write_trajectory_store(result.histories, args.out / "trajectories.csv")
    lines = result.report.as_lines()
    (args.out / "ingest_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


def _command_build_graph(args: argparse.Namespace, config: TrainConfig) -> int:
    _print_config(config, config.seed)
    histories = read_trajectory_store(args.input)
    graphs = build_graphs(
        histories,
        num_categories=config.num_categories,
        num_bins=config.num_bins,
        jobs=args.jobs,
    )
    write_graph_dir(graphs, args.out)
    print(f"graphs = {len(graphs)}")
    return EXIT_OK


def _command_stats(args: argparse.Namespace, config: TrainConfig) -> int:
    _print_config(config, config.seed)
    stats = graph_stats(read_graph_dir(args.input))
    write_stats(stats, args.out)
    print("\n".join(stats.summary_lines()))
    return EXIT_OK


def _command_train(args: argparse.Namespace, config: TrainConfig) -> int:
    _print_config(config, config.seed)
    graphs = read_graph_dir(args.input)
    train_pool, test_set = split_dataset(graphs, config.split_ratio, config.seed)
    fit_set, validation_set = carve_validation(train_pool, config.validation_ratio, config.seed)
    state = load_training_state(args.resume, config) if args.resume else None

    result = train(fit_set, validation_set, config, state=state)
    args.out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, args.out / "checkpoint.stp")
    save_training_state(result.state, args.out / "state.stp")
    write_split(args.out / "split.tsv", fit_set, validation_set, test_set)
    (args.out / "train_log.tsv").write_text("\n".join(result.log.as_rows()) + "\n", encoding="utf-8")
    last = result.log.epochs[-1] if result.log.epochs else None
    print(f"epochs = {result.state.epoch}")
    if last is not None:
        print(f"final train_loss = {last.train_loss:.6f}")
    return EXIT_OK


def _command_eval(args: argparse.Namespace, config: TrainConfig) -> int:
    _print_config(config, config.seed)
    params = load_checkpoint(args.checkpoint)
    split_path = args.checkpoint.with_name("split.tsv")
    split = read_split(split_path) if split_path.is_file() else None
    histories = read_trajectory_store(args.trajectories) if args.trajectories else None
    labels = read_labels(args.labels) if args.labels else None
    pipeline = EvaluationPipeline(params, threshold=args.threshold, response_bins=args.bins)
    summary = pipeline.run(
        read_graph_dir(args.input),
        args.out,
        split=split,
        histories=histories,
        labels=labels,
    )
    print("\n".join(summary.lines))
    return EXIT_OK


def _command_export(args: argparse.Namespace, config: TrainConfig) -> int:
    _print_config(config, config.seed)
    params = load_checkpoint(args.checkpoint)
    graphs = read_graph_dir(args.input)
    embeddings = np.stack([user_embedding(infer(graph, params)) for graph in graphs])
    write_embeddings(args.out, [graph.user_id for graph in graphs], embeddings)
    print(f"embeddings = {len(graphs)}")
    return EXIT_OK


def _command_gradcheck(args: argparse.Namespace, config: TrainConfig) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_GRADCHECK_SEED
    _print_config(config, seed)
    result = gradient_check(seed, args.threshold, entries_per_tensor=args.entries_per_tensor)
    print(
        f"max relative error = {result.max_relative_error:.3e} over {result.tensors} tensors"
        f" ({result.entries} entries)"
    )
    if not result.passed:
        raise GradientCheckFailure(
            f"gradient check error {result.max_relative_error:.3e} exceeds {result.threshold:.1e}"
        )
    return EXIT_OK


_COMMANDS: dict[str, Callable[[argparse.Namespace, TrainConfig], int]] = {
    "synth": _command_synth,
    "ingest": _command_ingest,
    "build-graph": _command_build_graph,
    "stats": _command_stats,
    "train": _command_train,
    "eval": _command_eval,
    "export-embeddings": _command_export,
    "gradcheck": _command_gradcheck,
}

_NUMERIC_ERRORS = (ArithmeticError, TensorDomainError, NonDeterministicFunctionError)


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as error:
        print(error, file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _resolve_config(args)
        return _COMMANDS[args.command](args, config)
    except _NUMERIC_ERRORS as error:
        logger.error("Numeric failure", extra={"command": args.command})
        print(f"stgraphrl {args.command}: {error}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as error:
        print(f"stgraphrl {args.command}: {error}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    raise SystemExit(run())
