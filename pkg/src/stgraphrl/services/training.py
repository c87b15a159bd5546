from __future__ import annotations

import logging
import math
import time
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TypeVar

import numpy as np

from stgraphrl.autodiff.optim import OptimState, optimizer_step
from stgraphrl.autodiff.tensor import FloatArray, backward, no_grad
from stgraphrl.config import TrainConfig
from stgraphrl.domain.models import DistributionTargets, LabelPriors, MobilityGraph
from stgraphrl.loss.balanced import total_loss
from stgraphrl.loss.targets import build_targets, compute_label_priors
from stgraphrl.model.checkpoint import (
    CheckpointError,
    params_from_arrays,
    read_tensor_file,
    write_tensor_file,
)
from stgraphrl.model.forward import forward
from stgraphrl.model.params import ModelParams, init_params

logger = logging.getLogger(__name__)

_Item = TypeVar("_Item")

# Separate stream so the validation carve does not reuse the test split's shuffle.
_VALIDATION_STREAM = 1


class NonFiniteLossError(ArithmeticError):
    def __init__(self, *, user_id: str, epoch: int, value: float) -> None:
        super().__init__(f"non-finite loss {value!r} for graph {user_id!r} in epoch {epoch}")
        self.user_id = user_id
        self.epoch = epoch


class DatasetSplitError(ValueError):
    pass


def _split_count(total: int, ratio: float) -> int:
    # Both sides keep at least one element.
    return min(max(int(round(ratio * total)), 1), total - 1)


def split_dataset(
    graphs: Sequence[_Item], ratio: float, seed: int
) -> tuple[list[_Item], list[_Item]]:
    """Seeded shuffle, then a prefix of ``round(ratio * n)`` items for training."""
    if len(graphs) < 2:
        raise DatasetSplitError("splitting needs at least two graphs")
    if not 0 < ratio < 1:
        raise DatasetSplitError("split ratio must lie strictly between 0 and 1")
    order = np.random.default_rng(seed).permutation(len(graphs))
    cut = _split_count(len(graphs), ratio)
    return [graphs[i] for i in order[:cut]], [graphs[i] for i in order[cut:]]


def carve_validation(
    graphs: Sequence[_Item], ratio: float, seed: int
) -> tuple[list[_Item], list[_Item]]:
    """Hold out ``round(ratio * n)`` training graphs for early stopping; may be empty."""
    if ratio <= 0 or len(graphs) < 2:
        return list(graphs), []
    order = np.random.default_rng([seed, _VALIDATION_STREAM]).permutation(len(graphs))
    held = _split_count(len(graphs), 1.0 - ratio)
    return [graphs[i] for i in order[:held]], [graphs[i] for i in order[held:]]


@dataclass(frozen=True, slots=True)
class EpochRecord:
    epoch: int
    train_loss: float
    validation_loss: float
    seconds: float
    grad_norm_mean: float
    grad_norm_max: float


@dataclass(slots=True)
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    backward_counts: Counter[str] = field(default_factory=Counter)

    def deterministic_view(self) -> list[tuple[int, float, float, float, float]]:
        """Every logged value except wall-clock time."""
        return [
            (r.epoch, r.train_loss, r.validation_loss, r.grad_norm_mean, r.grad_norm_max)
            for r in self.epochs
        ]

    def as_rows(self) -> list[str]:
        rows = ["epoch\ttrain_loss\tvalidation_loss\tseconds\tgrad_norm_mean\tgrad_norm_max"]
        rows.extend(
            f"{r.epoch}\t{r.train_loss:.10g}\t{r.validation_loss:.10g}\t{r.seconds:.3f}\t"
            f"{r.grad_norm_mean:.6g}\t{r.grad_norm_max:.6g}"
            for r in self.epochs
        )
        return rows


@dataclass(slots=True)
class TrainingState:
    params: ModelParams
    best_params: ModelParams
    optimizer: OptimState
    epoch: int = 0
    best_validation_loss: float = math.inf
    stale_epochs: int = 0
    log: TrainLog = field(default_factory=TrainLog)

    @classmethod
    def fresh(cls, config: TrainConfig) -> TrainingState:
        params = init_params(config.seed, config.dims)
        return cls(params=params, best_params=params.copy(), optimizer=OptimState())


@dataclass(frozen=True, slots=True)
class TrainResult:
    params: ModelParams
    log: TrainLog
    state: TrainingState
    priors: LabelPriors
    stopped_early: bool


@dataclass(frozen=True, slots=True, eq=False)
class _Example:
    graph: MobilityGraph
    targets: DistributionTargets


class Trainer:
    def __init__(
        self,
        config: TrainConfig,
        *,
        clock: Callable[[], float] = time.perf_counter,
    ) -> None:
        self._config = config
        self._clock = clock

    def fit(
        self,
        train_set: Sequence[MobilityGraph],
        validation_set: Sequence[MobilityGraph],
        *,
        state: TrainingState | None = None,
    ) -> TrainResult:
        if not train_set:
            raise DatasetSplitError("training needs at least one graph")
        config = self._config
        current = state if state is not None else TrainingState.fresh(config)
        if current.params.dims != config.dims:
            raise CheckpointError("training state dimensions differ from the configuration")

        train_examples = [_Example(graph, build_targets(graph)) for graph in train_set]
        validation_examples = [_Example(graph, build_targets(graph)) for graph in validation_set]
        priors = compute_label_priors([example.targets for example in train_examples])

        stopped_early = current.stale_epochs >= config.patience
        while not stopped_early and current.epoch < config.max_epochs:
            epoch = current.epoch + 1
            record = self._run_epoch(epoch, current, train_examples, validation_examples, priors)
            current.log.epochs.append(record)
            current.epoch = epoch

            monitored = record.validation_loss if validation_examples else record.train_loss
            if monitored < current.best_validation_loss:
                current.best_validation_loss = monitored
                current.best_params = current.params.copy()
                current.stale_epochs = 0
            else:
                current.stale_epochs += 1
            logger.info(
                "Finished epoch",
                extra={
                    "epoch": epoch,
                    "train_loss": record.train_loss,
                    "validation_loss": record.validation_loss,
                },
            )
            stopped_early = current.stale_epochs >= config.patience

        return TrainResult(
            params=current.best_params,
            log=current.log,
            state=current,
            priors=priors,
            stopped_early=stopped_early,
        )

    def _run_epoch(
        self,
        epoch: int,
        state: TrainingState,
        train_examples: list[_Example],
        validation_examples: list[_Example],
        priors: LabelPriors,
    ) -> EpochRecord:
        config = self._config
        started = self._clock()
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_examples))
        loss_config, adam = config.loss, config.adam
        params = state.params

        losses: list[float] = []
        grad_norms: list[float] = []
        for start in range(0, len(order), config.batch_size):
            params.zero_grad()
            for position in order[start : start + config.batch_size]:
                example = train_examples[position]
                parts = total_loss(forward(example.graph, params), example.targets, loss_config, priors)
                value = parts.total.item()
                if not math.isfinite(value):
                    logger.error(
                        "Non-finite training loss",
                        extra={"user_id": example.graph.user_id, "epoch": epoch},
                    )
                    raise NonFiniteLossError(user_id=example.graph.user_id, epoch=epoch, value=value)
                backward(parts.total)
                state.log.backward_counts[example.graph.user_id] += 1
                losses.append(value)
            grad_norms.append(params.gradient_norm())
            optimizer_step(params, state.optimizer, adam)
        params.zero_grad()

        validation_loss = (
            mean_loss([example.graph for example in validation_examples], params, priors, config)
            if validation_examples
            else math.nan
        )
        return EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            validation_loss=validation_loss,
            seconds=self._clock() - started,
            grad_norm_mean=float(np.mean(grad_norms)),
            grad_norm_max=float(np.max(grad_norms)),
        )


def mean_loss(
    graphs: Sequence[MobilityGraph],
    params: ModelParams,
    priors: LabelPriors,
    config: TrainConfig,
) -> float:
    """Mean total loss without recording gradients."""
    loss_config = config.loss
    with no_grad():
        values = [
            total_loss(forward(graph, params), build_targets(graph), loss_config, priors).total.item()
            for graph in graphs
        ]
    return float(np.mean(values))


def train(
    train_set: Sequence[MobilityGraph],
    validation_set: Sequence[MobilityGraph],
    config: TrainConfig,
    *,
    state: TrainingState | None = None,
) -> TrainResult:
    return Trainer(config).fit(train_set, validation_set, state=state)


_LOG_FIELDS = ("epoch", "train_loss", "validation_loss", "seconds", "grad_norm_mean", "grad_norm_max")


def save_training_state(state: TrainingState, path: Path) -> None:
    tensors: dict[str, FloatArray] = {}
    for prefix, params in (("param", state.params), ("best", state.best_params)):
        tensors.update({f"{prefix}.{name}": values for name, values in params.snapshot().items()})
    for name in state.optimizer.first_moments:
        tensors[f"adam.m.{name}"] = state.optimizer.first_moments[name]
        tensors[f"adam.v.{name}"] = state.optimizer.second_moments[name]
    tensors["meta.step"] = np.array(float(state.optimizer.step))
    tensors["meta.epoch"] = np.array(float(state.epoch))
    tensors["meta.best_validation_loss"] = np.array(state.best_validation_loss)
    tensors["meta.stale_epochs"] = np.array(float(state.stale_epochs))
    for log_field in _LOG_FIELDS:
        tensors[f"log.{log_field}"] = np.array(
            [float(getattr(record, log_field)) for record in state.log.epochs]
        )
    write_tensor_file(path, tensors)
    logger.info("Saved training state", extra={"path": str(path), "epoch": state.epoch})


def _group(tensors: dict[str, FloatArray], prefix: str) -> dict[str, FloatArray]:
    return {name[len(prefix) :]: values for name, values in tensors.items() if name.startswith(prefix)}


def _scalar(tensors: dict[str, FloatArray], name: str) -> float:
    try:
        return float(tensors[name])
    except KeyError as error:
        raise CheckpointError(f"training state lacks tensor {name!r}") from error


def load_training_state(path: Path, config: TrainConfig) -> TrainingState:
    tensors = read_tensor_file(path)
    params = params_from_arrays(_group(tensors, "param."), config.dims)
    best = params_from_arrays(_group(tensors, "best."), config.dims)
    first, second = _group(tensors, "adam.m."), _group(tensors, "adam.v.")
    try:
        optimizer = OptimState(
            first_moments={name: values.copy() for name, values in first.items()},
            second_moments={name: values.copy() for name, values in second.items()},
            step=int(_scalar(tensors, "meta.step")),
        )
    except ValueError as error:
        raise CheckpointError(f"training state optimizer moments: {error}") from error

    log_columns = _group(tensors, "log.")
    missing = [log_field for log_field in _LOG_FIELDS if log_field not in log_columns]
    if missing:
        raise CheckpointError(f"training state lacks log column {missing[0]!r}")
    rows = np.stack([log_columns[log_field].reshape(-1) for log_field in _LOG_FIELDS], axis=1)
    log = TrainLog(
        epochs=[
            EpochRecord(
                epoch=int(row[0]),
                train_loss=float(row[1]),
                validation_loss=float(row[2]),
                seconds=float(row[3]),
                grad_norm_mean=float(row[4]),
                grad_norm_max=float(row[5]),
            )
            for row in rows
        ]
    )
    return TrainingState(
        params=params,
        best_params=best,
        optimizer=optimizer,
        epoch=int(_scalar(tensors, "meta.epoch")),
        best_validation_loss=_scalar(tensors, "meta.best_validation_loss"),
        stale_epochs=int(_scalar(tensors, "meta.stale_epochs")),
        log=log,
    )


def write_split(
    path: Path,
    train_set: Sequence[MobilityGraph],
    validation_set: Sequence[MobilityGraph],
    test_set: Sequence[MobilityGraph],
) -> None:
    rows = ["user_id\tsplit"]
    for name, graphs in (("train", train_set), ("validation", validation_set), ("test", test_set)):
        rows.extend(f"{graph.user_id}\t{name}" for graph in graphs)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_split(path: Path) -> dict[str, str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as error:
        raise CheckpointError(f"cannot read split file {path}: {error.strerror}") from error
    split: dict[str, str] = {}
    for number, line in enumerate(lines[1:], start=2):
        user_id, tab, name = line.partition("\t")
        if not tab or name not in {"train", "validation", "test"}:
            raise CheckpointError(f"{path}:{number}: malformed split row")
        split[user_id] = name
    return split
