"""Occurrence targets and the distribution-balanced training objective."""

from stgraphrl.loss.balanced import (
    DBLossConfig,
    LossParts,
    class_bias,
    db_loss,
    rebalance_weights,
    total_loss,
)
from stgraphrl.loss.targets import build_targets, compute_label_priors

__all__ = [
    "DBLossConfig",
    "LossParts",
    "build_targets",
    "class_bias",
    "compute_label_priors",
    "db_loss",
    "rebalance_weights",
    "total_loss",
]
