"""Prediction metrics, similarity correlation, mobility indexes and latent analysis."""

from stgraphrl.evaluation.indexes import (
    index_st1,
    index_st1_corpus,
    index_st2,
    movement_features,
    movement_similarity_index,
)
from stgraphrl.evaluation.latent import ResponseMatrix, embedding_stats, response_matrix
from stgraphrl.evaluation.metrics import (
    EvaluationError,
    MetricsReport,
    multilabel_metrics,
    prior_baseline,
    probabilities,
)
from stgraphrl.evaluation.similarity import (
    CorrelationReport,
    CorrelationUndefinedError,
    frequency_distributions,
    jensen_distance,
    pearson,
    similarity_correlation,
)

__all__ = [
    "CorrelationReport",
    "CorrelationUndefinedError",
    "EvaluationError",
    "MetricsReport",
    "ResponseMatrix",
    "embedding_stats",
    "frequency_distributions",
    "index_st1",
    "index_st1_corpus",
    "index_st2",
    "jensen_distance",
    "movement_features",
    "movement_similarity_index",
    "multilabel_metrics",
    "pearson",
    "prior_baseline",
    "probabilities",
    "response_matrix",
    "similarity_correlation",
]
