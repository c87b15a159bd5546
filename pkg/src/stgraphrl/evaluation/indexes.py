"""Mobility diversity and movement regularity indexes of a user history."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.domain.models import DEFAULT_NUM_BINS, DEFAULT_NUM_CATEGORIES, UserHistory
from stgraphrl.evaluation.metrics import EvaluationError
from stgraphrl.ingest.checkins import time_bin

SIMILARITY_FLOOR = 1e-6


@dataclass(frozen=True, slots=True)
class DiversityInputs:
    daily_movements: float
    daily_categories: float


def diversity_inputs(history: UserHistory) -> DiversityInputs:
    """Average daily movement count and average daily count of distinct categories."""
    if not history.trajectories:
        raise EvaluationError(f"user {history.user_id} has no trajectories")
    days = len(history.trajectories)
    return DiversityInputs(
        daily_movements=history.movement_count / days,
        daily_categories=sum(
            len({visit.category for visit in trajectory.visits})
            for trajectory in history.trajectories
        )
        / days,
    )


@dataclass(frozen=True, slots=True)
class MinMax:
    low: float
    high: float

    def scale(self, value: float) -> float:
        # A corpus where every user shares the value maps it to 0.
        if self.high == self.low:
            return 0.0
        return (value - self.low) / (self.high - self.low)

    @classmethod
    def of(cls, values: Sequence[float]) -> MinMax:
        if not values:
            raise EvaluationError("normalization needs at least one value")
        return cls(low=min(values), high=max(values))


def index_st1(normalized_movements: float, normalized_categories: float) -> float:
    return math.hypot(normalized_movements, normalized_categories)


def index_st1_corpus(histories: Sequence[UserHistory]) -> list[float]:
    inputs = [diversity_inputs(history) for history in histories]
    movements = MinMax.of([item.daily_movements for item in inputs])
    categories = MinMax.of([item.daily_categories for item in inputs])
    return [
        index_st1(movements.scale(item.daily_movements), categories.scale(item.daily_categories))
        for item in inputs
    ]


def movement_features(
    history: UserHistory,
    num_categories: int = DEFAULT_NUM_CATEGORIES,
    num_bins: int = DEFAULT_NUM_BINS,
) -> FloatArray:
    """One row per movement: origin one-hot, destination one-hot, two-hot transit vector."""
    rows = []
    for trajectory in history.trajectories:
        for origin, destination in zip(trajectory.visits, trajectory.visits[1:]):
            row = np.zeros(2 * num_categories + num_bins)
            row[origin.category] = 1.0
            row[num_categories + destination.category] = 1.0
            row[2 * num_categories + time_bin(origin.timestamp)] = 1.0
            row[2 * num_categories + time_bin(destination.timestamp)] = 1.0
            rows.append(row)
    return np.array(rows).reshape(len(rows), 2 * num_categories + num_bins)


def movement_similarity_index(features: FloatArray) -> float:
    """Log of the mean, over movements, of each movement's mean cosine similarity to the others."""
    matrix = np.asarray(features, dtype=np.float64)
    count = matrix.shape[0]
    if count < 2:
        raise EvaluationError("the regularity index needs at least two movements")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise EvaluationError("movement features must not be all-zero")
    unit = matrix / norms[:, None]
    similarity = unit @ unit.T
    to_others = (similarity.sum(axis=1) - np.diag(similarity)) / (count - 1)
    return math.log(max(float(to_others.sum()) / count, SIMILARITY_FLOOR))


def index_st2(
    history: UserHistory,
    num_categories: int = DEFAULT_NUM_CATEGORIES,
    num_bins: int = DEFAULT_NUM_BINS,
) -> float:
    return movement_similarity_index(movement_features(history, num_categories, num_bins))
