from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.model.forward import ForwardState

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class UserScores:
    user_id: str
    accuracy: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True, slots=True)
class MetricsReport:
    """Corpus means of per-user example-based scores."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    users_evaluated: int
    users_excluded: int
    per_user: tuple[UserScores, ...]

    def __post_init__(self) -> None:
        for value in (self.accuracy, self.precision, self.recall, self.f1):
            if not 0.0 <= value <= 1.0:
                raise ValueError("metric values must lie in [0, 1]")


def example_scores(predicted: FloatArray, target: FloatArray) -> tuple[float, float, float, float]:
    """Accuracy (Jaccard), precision, recall and F1 of one predicted label set."""
    p = np.asarray(predicted, dtype=bool)
    t = np.asarray(target, dtype=bool)
    hits = int(np.sum(p & t))
    union = int(np.sum(p | t))
    accuracy = hits / union if union else 1.0
    precision = hits / int(p.sum()) if p.any() else 0.0
    recall = hits / int(t.sum()) if t.any() else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return accuracy, precision, recall, f1


def multilabel_metrics(
    probabilities: Sequence[FloatArray],
    targets: Sequence[FloatArray],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    user_ids: Sequence[str] | None = None,
) -> MetricsReport:
    """Threshold each user's probabilities at ``threshold`` (``prob >= threshold`` is predicted).

    Users without positive targets are excluded and counted.
    """
    if len(probabilities) != len(targets):
        raise EvaluationError("one probability vector is required per target vector")
    if not 0.0 < threshold < 1.0:
        raise EvaluationError("threshold must lie strictly between 0 and 1")
    ids = list(user_ids) if user_ids is not None else [str(i) for i in range(len(targets))]

    scores: list[UserScores] = []
    excluded = 0
    for user_id, probability, target in zip(ids, probabilities, targets, strict=True):
        if np.shape(probability) != np.shape(target):
            raise EvaluationError(f"user {user_id}: prediction and target lengths differ")
        if not np.any(np.asarray(target) > 0.5):
            excluded += 1
            continue
        accuracy, precision, recall, f1 = example_scores(
            np.asarray(probability) >= threshold, np.asarray(target) > 0.5
        )
        scores.append(UserScores(user_id, accuracy, precision, recall, f1))

    if not scores:
        raise EvaluationError("no user has a positive target")
    if excluded:
        logger.info("Excluded users without positive targets", extra={"excluded": excluded})
    return MetricsReport(
        accuracy=float(np.mean([s.accuracy for s in scores])),
        precision=float(np.mean([s.precision for s in scores])),
        recall=float(np.mean([s.recall for s in scores])),
        f1=float(np.mean([s.f1 for s in scores])),
        users_evaluated=len(scores),
        users_excluded=excluded,
        per_user=tuple(scores),
    )


def joint_threshold(num_cells: int) -> float:
    return 1.0 / num_cells


@dataclass(frozen=True, slots=True, eq=False)
class Probabilities:
    spatial: FloatArray
    temporal: FloatArray
    joint: FloatArray


def _sigmoid(values: FloatArray) -> FloatArray:
    exp_neg = np.exp(-np.abs(values))
    return np.where(values >= 0, 1.0 / (1.0 + exp_neg), exp_neg / (1.0 + exp_neg))


def probabilities(state: ForwardState) -> Probabilities:
    """Sigmoid views of the spatial and temporal heads, softmax view of the joint head."""
    joint = state.joint_logits.data
    shifted = np.exp(joint - joint.max())
    return Probabilities(
        spatial=_sigmoid(state.spatial_logits.data),
        temporal=_sigmoid(state.temporal_logits.data),
        joint=shifted / shifted.sum(),
    )


def prior_baseline(train_targets: Sequence[FloatArray]) -> FloatArray:
    """Indicator of the k most frequent training cells, k the rounded mean positive count.

    Ties go to the lower cell index.
    """
    if not train_targets:
        raise EvaluationError("the prior baseline needs training targets")
    stacked = np.asarray(train_targets, dtype=np.float64)
    k = max(1, int(round(float(stacked.sum(axis=1).mean()))))
    rates = stacked.mean(axis=0)
    order = np.lexsort((np.arange(rates.shape[0]), -rates))
    prediction = np.zeros(rates.shape[0])
    prediction[order[:k]] = 1.0
    return prediction
