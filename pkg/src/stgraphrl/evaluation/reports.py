"""Delimiter-separated report tables for external plotting."""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.evaluation.latent import DimensionStats, ResponseMatrix
from stgraphrl.evaluation.metrics import EvaluationError, MetricsReport
from stgraphrl.evaluation.similarity import CorrelationReport, DistributionKind
from stgraphrl.graph.codec import format_real


def _write_rows(path: Path, rows: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def _cell(value: float) -> str:
    return "NA" if math.isnan(value) else format(value, ".10g")


def write_metrics(path: Path, report: MetricsReport) -> None:
    rows = ["user_id\taccuracy\tprecision\trecall\tf1"]
    rows.extend(
        f"{s.user_id}\t{_cell(s.accuracy)}\t{_cell(s.precision)}\t{_cell(s.recall)}\t{_cell(s.f1)}"
        for s in report.per_user
    )
    _write_rows(path, rows)


def metrics_line(name: str, report: MetricsReport) -> str:
    return (
        f"{name}\taccuracy={report.accuracy:.4f}\tprecision={report.precision:.4f}\t"
        f"recall={report.recall:.4f}\tf1={report.f1:.4f}\tusers={report.users_evaluated}\t"
        f"excluded={report.users_excluded}"
    )


def write_scatter(path: Path, report: CorrelationReport, kind: DistributionKind) -> None:
    rows = ["d_rep\td_true"]
    rows.extend(
        f"{_cell(float(rep))}\t{_cell(float(true))}"
        for rep, true in zip(report.d_rep, report.d_true[kind], strict=True)
    )
    _write_rows(path, rows)


def write_response_matrix(path: Path, matrix: ResponseMatrix) -> None:
    width = matrix.values.shape[1]
    rows = ["bin_low\tbin_high\tusers\t" + "\t".join(f"h{j}" for j in range(width))]
    for b, values in enumerate(matrix.values):
        cells = "\t".join(_cell(float(value)) for value in values)
        rows.append(
            f"{_cell(float(matrix.bin_edges[b]))}\t{_cell(float(matrix.bin_edges[b + 1]))}\t"
            f"{int(matrix.counts[b])}\t{cells}"
        )
    _write_rows(path, rows)


def write_embedding_stats(path: Path, stats: Sequence[DimensionStats]) -> None:
    rows = ["dimension\tmin\tq1\tmedian\tq3\tmax\tmean\toutliers"]
    rows.extend(
        f"h{s.dimension}\t{_cell(s.minimum)}\t{_cell(s.q1)}\t{_cell(s.median)}\t{_cell(s.q3)}\t"
        f"{_cell(s.maximum)}\t{_cell(s.mean)}\t{len(s.outliers)}"
        for s in stats
    )
    _write_rows(path, rows)


def write_outliers(path: Path, stats: Sequence[DimensionStats], user_ids: Sequence[str]) -> None:
    """One row per outlying (dimension, user) cell, in dimension then row order."""
    rows = ["dimension\trow\tuser_id\tvalue"]
    rows.extend(
        f"h{s.dimension}\t{row}\t{user_ids[row]}\t{format_real(value)}"
        for s in stats
        for row, value in s.outliers
    )
    _write_rows(path, rows)


def write_embeddings(path: Path, user_ids: Sequence[str], embeddings: FloatArray) -> None:
    """``user_id,h0..h{d-1}`` with 17 significant digits."""
    matrix = np.asarray(embeddings, dtype=np.float64)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["user_id", *(f"h{j}" for j in range(matrix.shape[1]))])
        for user_id, row in zip(user_ids, matrix, strict=True):
            writer.writerow([user_id, *(format_real(float(value)) for value in row)])


def read_embeddings(path: Path) -> tuple[list[str], FloatArray]:
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "user_id":
            raise EvaluationError(f"{path}: missing embedding header")
        user_ids: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            if len(row) != len(header):
                raise EvaluationError(f"{path}:{reader.line_num}: expected {len(header)} fields")
            user_ids.append(row[0])
            rows.append([float(value) for value in row[1:]])
    return user_ids, np.array(rows).reshape(len(rows), len(header) - 1)
