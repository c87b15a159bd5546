from __future__ import annotations

from collections.abc import Mapping

from stgraphrl.autodiff.tensor import Tensor, TensorShapeError, concat, reshape
from stgraphrl.model.layers import linear, mlp
from stgraphrl.model.params import RESIDUAL_UNITS


def decode(
    embedding: Tensor,
    spatial_logits: Tensor,
    temporal_logits: Tensor,
    params: Mapping[str, Tensor],
) -> Tensor:
    """Joint logits from ``concat(H, spatial logits, temporal logits)`` through residual units."""
    expected = params["decoder.input.weight"].shape[0]
    parts = (embedding, spatial_logits, temporal_logits)
    if any(len(part.shape) != 1 for part in parts) or sum(p.shape[0] for p in parts) != expected:
        raise TensorShapeError(
            f"decoder input sizes {[p.shape for p in parts]} do not add up to {expected}"
        )
    z = reshape(concat(list(parts), axis=0), (1, expected))
    hidden = linear(z, params, "decoder.input")
    for unit in range(RESIDUAL_UNITS):
        hidden = hidden + mlp(hidden, params, f"decoder.residual.{unit}")
    logits = linear(hidden, params, "decoder.output")
    return reshape(logits, (logits.shape[1],))
