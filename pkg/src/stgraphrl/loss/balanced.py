from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray, Tensor, TensorShapeError, reduce, softplus
from stgraphrl.domain.models import DistributionTargets, LabelPriors
from stgraphrl.model.forward import ForwardState

PRIOR_FLOOR = 1e-4
SPATIAL_LOSS_WEIGHT = 0.1
TEMPORAL_LOSS_WEIGHT = 0.1
JOINT_LOSS_WEIGHT = 1.0


@dataclass(frozen=True, slots=True)
class DBLossConfig:
    negative_scale: float = 2.0
    class_bias_scale: float = 0.05
    rebalance_alpha: float = 0.1
    rebalance_beta: float = 10.0
    rebalance_mu: float = 0.3

    def __post_init__(self) -> None:
        if self.negative_scale <= 0:
            raise ValueError("negative_scale (lambda) must be positive")
        if self.class_bias_scale < 0:
            raise ValueError("class_bias_scale (kappa) must not be negative")
        if self.rebalance_alpha < 0 or self.rebalance_beta < 0:
            raise ValueError("rebalance smoothing and sharpness must not be negative")

    @classmethod
    def plain(cls) -> DBLossConfig:
        """Uniform weights, no class bias, unit negative scale: mean BCE with logits."""
        return cls(
            negative_scale=1.0,
            class_bias_scale=0.0,
            rebalance_alpha=0.5,
            rebalance_beta=0.0,
            rebalance_mu=0.0,
        )


def _clamped(priors: FloatArray) -> FloatArray:
    return np.clip(np.asarray(priors, dtype=np.float64), PRIOR_FLOOR, 1.0 - PRIOR_FLOOR)


def class_bias(priors: FloatArray, config: DBLossConfig) -> FloatArray:
    """``v_i = -kappa * log(1/p_i - 1)``."""
    clamped = _clamped(priors)
    return -config.class_bias_scale * np.log(1.0 / clamped - 1.0)


def rebalance_weights(y: FloatArray, priors: FloatArray, config: DBLossConfig) -> FloatArray:
    """Smoothed ratio of the class sampling rate to the instance sampling rate.

    An instance without positive labels gets a raw ratio of 1 everywhere.
    """
    inverse = 1.0 / _clamped(priors)
    positive_mass = float(np.sum(inverse[np.asarray(y) > 0.5]))
    ratio = inverse / positive_mass if positive_mass > 0.0 else np.ones_like(inverse)
    gate = 1.0 / (1.0 + np.exp(-config.rebalance_beta * (ratio - config.rebalance_mu)))
    return config.rebalance_alpha + gate


def db_loss(
    logits: Tensor,
    y: FloatArray,
    config: DBLossConfig,
    priors: FloatArray,
    *,
    weights: FloatArray | None = None,
) -> Tensor:
    """Distribution-balanced multi-label loss on raw logits, averaged over labels.

    ``weights`` overrides the re-balancing weights (e.g. all ones).
    """
    labels = np.asarray(y, dtype=np.float64)
    prior_values = np.asarray(priors, dtype=np.float64)
    if len(logits.shape) != 1 or logits.shape[0] == 0:
        raise TensorShapeError(f"db_loss needs a non-empty logit vector, got {logits.shape}")
    size = logits.shape[0]
    if labels.shape != (size,) or prior_values.shape != (size,):
        raise TensorShapeError(
            f"db_loss length mismatch: logits {size}, targets {labels.shape}, priors {prior_values.shape}"
        )

    rebalance = weights if weights is not None else rebalance_weights(labels, prior_values, config)
    shifted = logits - Tensor(class_bias(prior_values, config))
    negative_scale = config.negative_scale
    positive_term = softplus(-shifted) * Tensor(rebalance * labels)
    negative_term = softplus(shifted * negative_scale) * Tensor(
        rebalance * (1.0 - labels) / negative_scale
    )
    return reduce(positive_term + negative_term, "mean")


@dataclass(frozen=True, slots=True, eq=False)
class LossParts:
    spatial: Tensor
    temporal: Tensor
    joint: Tensor
    total: Tensor


def total_loss(
    state: ForwardState,
    targets: DistributionTargets,
    config: DBLossConfig,
    priors: LabelPriors,
) -> LossParts:
    spatial = db_loss(state.spatial_logits, targets.y_s, config, priors.spatial)
    temporal = db_loss(state.temporal_logits, targets.y_t, config, priors.temporal)
    joint = db_loss(state.joint_logits, targets.y_st, config, priors.joint)
    total = spatial * SPATIAL_LOSS_WEIGHT + temporal * TEMPORAL_LOSS_WEIGHT + joint * JOINT_LOSS_WEIGHT
    return LossParts(spatial=spatial, temporal=temporal, joint=joint, total=total)
