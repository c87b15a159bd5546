from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.evaluation.metrics import EvaluationError

OUTLIER_IQR_FACTOR = 1.5


def min_max_columns(matrix: FloatArray) -> FloatArray:
    """Scale every column to [0, 1]; a constant column becomes 0."""
    low = matrix.min(axis=0)
    span = matrix.max(axis=0) - low
    safe = np.where(span > 0.0, span, 1.0)
    return np.where(span > 0.0, (matrix - low) / safe, 0.0)


@dataclass(frozen=True, slots=True, eq=False)
class ResponseMatrix:
    """Mean scaled activation per index bin and dimension; empty bins hold NaN."""

    values: FloatArray
    bin_edges: FloatArray
    counts: FloatArray


def response_matrix(embeddings: FloatArray, index_values: FloatArray, num_bins: int) -> ResponseMatrix:
    matrix = np.asarray(embeddings, dtype=np.float64)
    index = np.asarray(index_values, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or index.shape != (matrix.shape[0],):
        raise EvaluationError("one index value is required per embedding row")
    if num_bins < 1:
        raise EvaluationError("response matrix needs at least one bin")
    low, high = float(index.min()), float(index.max())
    if low == high:
        raise EvaluationError("index values are constant; bins are undefined")

    edges = np.linspace(low, high, num_bins + 1)
    assignment = np.minimum(((index - low) / (high - low) * num_bins).astype(np.intp), num_bins - 1)
    scaled = min_max_columns(matrix)
    values = np.full((num_bins, matrix.shape[1]), np.nan)
    counts = np.zeros(num_bins)
    for bin_index in range(num_bins):
        members = assignment == bin_index
        counts[bin_index] = float(members.sum())
        if members.any():
            values[bin_index] = scaled[members].mean(axis=0)
    return ResponseMatrix(values=values, bin_edges=edges, counts=counts)


@dataclass(frozen=True, slots=True)
class DimensionStats:
    dimension: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    outliers: tuple[tuple[int, float], ...]


def embedding_stats(embeddings: FloatArray) -> list[DimensionStats]:
    """Quartiles (linear interpolation), mean and 1.5 IQR outliers for every dimension."""
    matrix = np.asarray(embeddings, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise EvaluationError("embedding statistics need at least one embedding")
    stats = []
    for dimension in range(matrix.shape[1]):
        column = matrix[:, dimension]
        q1, median, q3 = (float(value) for value in np.percentile(column, [25, 50, 75]))
        reach = OUTLIER_IQR_FACTOR * (q3 - q1)
        outliers = tuple(
            (int(row), float(column[row]))
            for row in np.flatnonzero((column < q1 - reach) | (column > q3 + reach))
        )
        stats.append(
            DimensionStats(
                dimension=dimension,
                minimum=float(column.min()),
                q1=q1,
                median=median,
                q3=q3,
                maximum=float(column.max()),
                mean=float(column.mean()),
                outliers=outliers,
            )
        )
    return stats
