from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from stgraphrl.domain.models import MobilityGraph, UserHistory
from stgraphrl.evaluation.indexes import index_st1_corpus, index_st2
from stgraphrl.evaluation.latent import embedding_stats, response_matrix
from stgraphrl.evaluation.metrics import (
    DEFAULT_THRESHOLD,
    EvaluationError,
    MetricsReport,
    joint_threshold,
    multilabel_metrics,
    prior_baseline,
    probabilities,
)
from stgraphrl.evaluation.reports import (
    metrics_line,
    write_embedding_stats,
    write_metrics,
    write_outliers,
    write_response_matrix,
    write_scatter,
)
from stgraphrl.evaluation.similarity import (
    DISTRIBUTION_KINDS,
    CorrelationReport,
    frequency_distributions,
    group_pair_means,
    similarity_correlation,
)
from stgraphrl.loss.targets import build_targets
from stgraphrl.model.forward import ForwardState, edge_embedding, infer, node_embedding, user_embedding
from stgraphrl.model.params import ModelParams

logger = logging.getLogger(__name__)

EMBEDDING_VIEWS = {"H": user_embedding, "nodes": node_embedding, "edges": edge_embedding}
DEFAULT_RESPONSE_BINS = 10


@dataclass(frozen=True, slots=True)
class EvaluationSummary:
    metrics: dict[str, MetricsReport]
    baseline: MetricsReport
    correlations: dict[str, CorrelationReport]
    group_means: tuple[float, float] | None = None
    lines: list[str] = field(default_factory=list)


class EvaluationPipeline:
    def __init__(
        self,
        params: ModelParams,
        *,
        threshold: float = DEFAULT_THRESHOLD,
        response_bins: int = DEFAULT_RESPONSE_BINS,
    ) -> None:
        if not 0.0 < threshold < 1.0:
            raise EvaluationError("threshold must lie strictly between 0 and 1")
        self._params = params
        self._threshold = threshold
        self._response_bins = response_bins

    def run(
        self,
        graphs: Sequence[MobilityGraph],
        out_dir: Path,
        *,
        split: Mapping[str, str] | None = None,
        histories: Sequence[UserHistory] | None = None,
        labels: Mapping[str, str] | None = None,
    ) -> EvaluationSummary:
        if not graphs:
            raise EvaluationError("evaluation needs at least one graph")
        out_dir.mkdir(parents=True, exist_ok=True)
        states = [infer(graph, self._params) for graph in graphs]
        user_ids = [graph.user_id for graph in graphs]

        held_out = [i for i, uid in enumerate(user_ids) if split is None or split.get(uid) == "test"]
        fitted = [i for i, uid in enumerate(user_ids) if split is None or split.get(uid) == "train"]
        if not held_out:
            raise EvaluationError("the split file names no test users among the graphs")
        if not fitted:
            raise EvaluationError("the split file names no training users among the graphs")

        metrics = self._head_metrics(graphs, states, held_out)
        baseline = self._baseline(graphs, held_out, fitted)
        for name, report in {**metrics, "baseline": baseline}.items():
            write_metrics(out_dir / f"metrics_{name}.tsv", report)

        lines = [metrics_line(name, report) for name, report in metrics.items()]
        lines.append(metrics_line("baseline", baseline))
        lines.append(f"joint_f1_gain_over_baseline\t{metrics['joint'].f1 - baseline.f1:.4f}")

        correlations: dict[str, CorrelationReport] = {}
        group_means: tuple[float, float] | None = None
        if len(graphs) >= 3:
            distributions = [frequency_distributions(graph) for graph in graphs]
            correlation_rows = ["view\tdistribution\tr\tpairs"]
            for view, extract in EMBEDDING_VIEWS.items():
                matrix = np.stack([extract(state) for state in states])
                report = similarity_correlation(user_ids, matrix, distributions)
                correlations[view] = report
                for kind in DISTRIBUTION_KINDS:
                    write_scatter(out_dir / f"scatter_{view}_{kind}.tsv", report, kind)
                    correlation_rows.append(f"{view}\t{kind}\t{report.r(kind):.6f}\t{report.pair_count}")
            (out_dir / "correlation.tsv").write_text("\n".join(correlation_rows) + "\n", encoding="utf-8")
            main = correlations["H"]
            for suffix, kind in (("s", "spatial"), ("t", "temporal"), ("st", "joint")):
                lines.append(f"r_{suffix}\t{main.r(kind):.4f}")
            if labels is not None:
                group_means = group_pair_means(main, labels)
                lines.append(f"same_group_distance\t{group_means[0]:.6f}")
                lines.append(f"cross_group_distance\t{group_means[1]:.6f}")
        else:
            lines.append("correlation\tskipped (fewer than three users)")

        embeddings = np.stack([user_embedding(state) for state in states])
        stats = embedding_stats(embeddings)
        write_embedding_stats(out_dir / "embedding_stats.tsv", stats)
        write_outliers(out_dir / "outliers.tsv", stats, user_ids)
        if histories is not None:
            lines.extend(self._latent_responses(histories, user_ids, embeddings, out_dir))

        (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info("Wrote evaluation reports", extra={"directory": str(out_dir), "users": len(graphs)})
        return EvaluationSummary(
            metrics=metrics,
            baseline=baseline,
            correlations=correlations,
            group_means=group_means,
            lines=lines,
        )

    def _head_metrics(
        self,
        graphs: Sequence[MobilityGraph],
        states: Sequence[ForwardState],
        held_out: Sequence[int],
    ) -> dict[str, MetricsReport]:
        views = [probabilities(states[i]) for i in held_out]
        targets = [build_targets(graphs[i]) for i in held_out]
        ids = [graphs[i].user_id for i in held_out]
        joint_tau = joint_threshold(self._params.dims.joint_size)
        return {
            "spatial": multilabel_metrics(
                [v.spatial for v in views], [t.y_s for t in targets], self._threshold, user_ids=ids
            ),
            "temporal": multilabel_metrics(
                [v.temporal for v in views], [t.y_t for t in targets], self._threshold, user_ids=ids
            ),
            "joint": multilabel_metrics(
                [v.joint for v in views], [t.y_st for t in targets], joint_tau, user_ids=ids
            ),
        }

    def _baseline(
        self,
        graphs: Sequence[MobilityGraph],
        held_out: Sequence[int],
        fitted: Sequence[int],
    ) -> MetricsReport:
        prediction = prior_baseline([build_targets(graphs[i]).y_st for i in fitted])
        return multilabel_metrics(
            [prediction for _ in held_out],
            [build_targets(graphs[i]).y_st for i in held_out],
            DEFAULT_THRESHOLD,
            user_ids=[graphs[i].user_id for i in held_out],
        )

    def _latent_responses(
        self,
        histories: Sequence[UserHistory],
        user_ids: Sequence[str],
        embeddings: np.ndarray,
        out_dir: Path,
    ) -> list[str]:
        by_user = {history.user_id: history for history in histories}
        missing = [uid for uid in user_ids if uid not in by_user]
        if missing:
            raise EvaluationError(f"trajectory store lacks user {missing[0]!r}")
        ordered = [by_user[uid] for uid in user_ids]
        dims = self._params.dims
        st1 = np.array(index_st1_corpus(ordered))
        st2 = np.array([index_st2(h, dims.num_categories, dims.num_bins) for h in ordered])
        rows = ["user_id\tindex_st1\tindex_st2"]
        rows.extend(f"{uid}\t{a:.10g}\t{b:.10g}" for uid, a, b in zip(user_ids, st1, st2, strict=True))
        (out_dir / "indexes.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")

        lines = []
        for name, values in (("st1", st1), ("st2", st2)):
            try:
                matrix = response_matrix(embeddings, values, self._response_bins)
            except EvaluationError as error:
                lines.append(f"response_{name}\tskipped ({error})")
                continue
            write_response_matrix(out_dir / f"response_{name}.tsv", matrix)
            lines.append(f"response_{name}\t{self._response_bins} bins")
        return lines
