from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray, IndexArray
from stgraphrl.domain.models import MobilityGraph
from stgraphrl.evaluation.metrics import EvaluationError

DistributionKind = Literal["spatial", "temporal", "joint"]
DISTRIBUTION_KINDS: tuple[DistributionKind, ...] = ("spatial", "temporal", "joint")


class CorrelationUndefinedError(ArithmeticError):
    pass


def _kl_base2(p: FloatArray, m: FloatArray) -> float:
    support = p > 0.0
    return float(np.sum(p[support] * np.log2(p[support] / m[support])))


def jensen_distance(p: FloatArray, q: FloatArray) -> float:
    """Base-2 Jensen-Shannon distance of two non-negative vectors, normalized internally."""
    p_arr = np.asarray(p, dtype=np.float64)
    q_arr = np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape or p_arr.ndim != 1:
        raise EvaluationError("jensen_distance needs two vectors of equal length")
    if np.any(p_arr < 0) or np.any(q_arr < 0):
        raise EvaluationError("jensen_distance needs non-negative inputs")
    p_total, q_total = float(p_arr.sum()), float(q_arr.sum())
    if p_total <= 0 or q_total <= 0:
        raise EvaluationError("jensen_distance of an all-zero vector")
    p_arr, q_arr = p_arr / p_total, q_arr / q_total
    m = 0.5 * (p_arr + q_arr)
    divergence = 0.5 * _kl_base2(p_arr, m) + 0.5 * _kl_base2(q_arr, m)
    return min(1.0, math.sqrt(max(0.0, divergence)))


def pearson(x: FloatArray, y: FloatArray) -> float:
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if x_arr.shape != y_arr.shape or x_arr.size < 2:
        raise CorrelationUndefinedError("correlation needs two equal-length samples of size >= 2")
    dx, dy = x_arr - x_arr.mean(), y_arr - y_arr.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0.0:
        raise CorrelationUndefinedError("representation distances are constant")
    if sy == 0.0:
        raise CorrelationUndefinedError("distribution distances are constant")
    return max(-1.0, min(1.0, float(dx @ dy) / (sx * sy)))


@dataclass(frozen=True, slots=True, eq=False)
class FrequencyDistributions:
    """Movement frequency counts per category, per bin and per arrival cell."""

    spatial: FloatArray
    temporal: FloatArray
    joint: FloatArray

    def of(self, kind: DistributionKind) -> FloatArray:
        return {"spatial": self.spatial, "temporal": self.temporal, "joint": self.joint}[kind]


def frequency_distributions(graph: MobilityGraph) -> FrequencyDistributions:
    spatial = np.zeros(graph.num_categories)
    temporal = np.zeros(graph.num_bins)
    joint = np.zeros((graph.num_categories, graph.num_bins))
    for edge in graph.edges:
        destination = graph.nodes[edge.dst].category
        spatial[graph.nodes[edge.src].category] += edge.frequency
        spatial[destination] += edge.frequency
        temporal[edge.departure_bin] += edge.frequency
        if edge.arrival_bin != edge.departure_bin:
            temporal[edge.arrival_bin] += edge.frequency
        joint[destination, edge.arrival_bin] += edge.frequency
    return FrequencyDistributions(spatial=spatial, temporal=temporal, joint=joint.reshape(-1))


def pairwise_euclidean(embeddings: FloatArray) -> FloatArray:
    """Distances of every pair ``i < j`` in row-major pair order."""
    rows, cols = np.triu_indices(embeddings.shape[0], k=1)
    return np.sqrt(np.sum((embeddings[rows] - embeddings[cols]) ** 2, axis=1))


def pairwise_jensen(distributions: Sequence[FloatArray]) -> FloatArray:
    rows, cols = np.triu_indices(len(distributions), k=1)
    return np.array(
        [jensen_distance(distributions[i], distributions[j]) for i, j in zip(rows, cols, strict=True)]
    )


@dataclass(frozen=True, slots=True, eq=False)
class CorrelationReport:
    r_s: float
    r_t: float
    r_st: float
    user_ids: tuple[str, ...]
    pair_rows: IndexArray
    pair_cols: IndexArray
    d_rep: FloatArray
    d_true: Mapping[DistributionKind, FloatArray]

    @property
    def pair_count(self) -> int:
        return int(self.d_rep.shape[0])

    def r(self, kind: DistributionKind) -> float:
        return {"spatial": self.r_s, "temporal": self.r_t, "joint": self.r_st}[kind]


def similarity_correlation(
    user_ids: Sequence[str],
    embeddings: FloatArray,
    distributions: Sequence[FrequencyDistributions],
) -> CorrelationReport:
    """Pearson r between embedding distances and distribution distances over all user pairs."""
    matrix = np.asarray(embeddings, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(distributions) or len(user_ids) != len(distributions):
        raise EvaluationError("one embedding and one distribution set are required per user")
    if matrix.shape[0] < 3:
        raise EvaluationError("similarity correlation needs at least three users")

    rows, cols = np.triu_indices(matrix.shape[0], k=1)
    d_rep = pairwise_euclidean(matrix)
    d_true = {
        kind: pairwise_jensen([distribution.of(kind) for distribution in distributions])
        for kind in DISTRIBUTION_KINDS
    }
    return CorrelationReport(
        r_s=pearson(d_rep, d_true["spatial"]),
        r_t=pearson(d_rep, d_true["temporal"]),
        r_st=pearson(d_rep, d_true["joint"]),
        user_ids=tuple(user_ids),
        pair_rows=rows.astype(np.intp),
        pair_cols=cols.astype(np.intp),
        d_rep=d_rep,
        d_true=d_true,
    )


def group_pair_means(report: CorrelationReport, labels: Mapping[str, str]) -> tuple[float, float]:
    """Mean embedding distance of same-label pairs and of cross-label pairs."""
    same: list[float] = []
    cross: list[float] = []
    for row, col, distance in zip(report.pair_rows, report.pair_cols, report.d_rep, strict=True):
        a, b = report.user_ids[int(row)], report.user_ids[int(col)]
        if a not in labels or b not in labels:
            continue
        (same if labels[a] == labels[b] else cross).append(float(distance))
    if not same or not cross:
        raise EvaluationError("labels must produce both same-group and cross-group pairs")
    return float(np.mean(same)), float(np.mean(cross))
