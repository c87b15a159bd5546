"""Decoupled spatial and temporal encoders, the fusion layers and the readout.

Edge ``u -> v`` runs from ``sources[e] = u`` to ``targets[e] = v``; messages
flow along edges and are aggregated at the destination.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import (
    NORM_EPSILON,
    IndexArray,
    Tensor,
    TensorShapeError,
    clamp_min,
    concat,
    gather_rows,
    l2_norm,
    leaky_relu,
    matmul,
    reduce,
    relu,
    reshape,
    segment_softmax,
    segment_sum,
)
from stgraphrl.domain.models import MobilityGraph
from stgraphrl.model.layers import linear, mlp

MESSAGE_EPSILON = 1e-7
GAT_NEGATIVE_SLOPE = 0.2


@dataclass(frozen=True, slots=True, eq=False)
class GraphTensors:
    """Constant inputs of one forward pass."""

    node_features: Tensor
    transit_vectors: Tensor
    weights: Tensor
    sources: IndexArray
    targets: IndexArray
    # In-neighbour pairs plus one self pair per node, for the attention block.
    attention_sources: IndexArray
    attention_targets: IndexArray

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @classmethod
    def from_graph(cls, graph: MobilityGraph) -> GraphTensors:
        sources, targets = graph.sources, graph.targets
        pairs = {(int(src), int(dst)) for src, dst in zip(sources, targets, strict=True)}
        pairs.update((node, node) for node in range(len(graph.nodes)))
        ordered = sorted(pairs, key=lambda pair: (pair[1], pair[0]))
        return cls(
            node_features=Tensor(graph.node_features()),
            transit_vectors=Tensor(graph.transit_matrix()),
            weights=Tensor(graph.weight_matrix()),
            sources=sources,
            targets=targets,
            attention_sources=np.array([src for src, _ in ordered], dtype=np.intp),
            attention_targets=np.array([dst for _, dst in ordered], dtype=np.intp),
        )


def _column(values: Tensor) -> Tensor:
    return reshape(values, (values.shape[0], 1))


def spatial_block(inputs: GraphTensors, params: Mapping[str, Tensor], heads: int) -> Tensor:
    """One multi-head graph attention layer over in-neighbours and self; heads are concatenated."""
    outputs = []
    for head in range(heads):
        prefix = f"spatial.head.{head}"
        projected = matmul(inputs.node_features, params[f"{prefix}.weight"])
        dst_score = reshape(matmul(projected, params[f"{prefix}.attention_dst"]), (inputs.num_nodes,))
        src_score = reshape(matmul(projected, params[f"{prefix}.attention_src"]), (inputs.num_nodes,))
        scores = leaky_relu(
            gather_rows(dst_score, inputs.attention_targets)
            + gather_rows(src_score, inputs.attention_sources),
            GAT_NEGATIVE_SLOPE,
        )
        attention = segment_softmax(scores, inputs.attention_targets)
        messages = gather_rows(projected, inputs.attention_sources) * _column(attention)
        outputs.append(segment_sum(messages, inputs.attention_targets, inputs.num_nodes))
    return concat(outputs, axis=1)


def temporal_block(inputs: GraphTensors, params: Mapping[str, Tensor]) -> Tensor:
    return mlp(inputs.transit_vectors, params, "temporal")


def head_spatial(node_embeddings: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    if node_embeddings.shape[0] == 0:
        raise TensorShapeError("spatial head needs at least one node")
    pooled = reduce(node_embeddings, "mean", axis=0)
    logits = linear(reshape(pooled, (1, pooled.shape[0])), params, "head_spatial")
    return reshape(logits, (logits.shape[1],))


def head_temporal(edge_embeddings: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    if edge_embeddings.shape[0] == 0:
        raise TensorShapeError("temporal head needs at least one edge")
    gated = reduce(edge_embeddings * params["temporal_gate"], "sum", axis=0)
    logits = linear(reshape(gated, (1, gated.shape[0])), params, "head_temporal")
    return reshape(logits, (logits.shape[1],))


def weight_projection(inputs: GraphTensors, params: Mapping[str, Tensor]) -> Tensor:
    return linear(inputs.weights, params, "weight_projection")


def aggregate_messages(
    messages: Tensor, targets: IndexArray, num_nodes: int, beta: Tensor
) -> Tensor:
    """Softmax-weighted sum of incoming messages per destination.

    Each message is scored by the mean of its components scaled by ``beta``;
    nodes without incoming messages receive a zero row.
    """
    scores = reduce(messages, "mean", axis=1) * beta
    weights = segment_softmax(scores, targets)
    return segment_sum(messages * _column(weights), targets, num_nodes)


def scaled_update(state: Tensor, message: Tensor, scale: Tensor) -> Tensor:
    """``state + scale * (|state| / |message|) * message`` row by row."""
    ratio = l2_norm(state, axis=1) / clamp_min(l2_norm(message, axis=1), NORM_EPSILON)
    return state + scale * _column(ratio) * message


def fusion_layer(
    node_embeddings: Tensor,
    edge_embeddings: Tensor,
    projected_weights: Tensor,
    inputs: GraphTensors,
    params: Mapping[str, Tensor],
    layer: int,
) -> tuple[Tensor, Tensor]:
    prefix = f"fusion.{layer}"
    beta, scale = params[f"{prefix}.beta"], params[f"{prefix}.scale"]
    source_rows = gather_rows(node_embeddings, inputs.sources)
    target_rows = gather_rows(node_embeddings, inputs.targets)

    node_messages = relu(source_rows + edge_embeddings + projected_weights) + MESSAGE_EPSILON
    aggregated = aggregate_messages(node_messages, inputs.targets, inputs.num_nodes, beta)
    updated_nodes = mlp(
        scaled_update(node_embeddings, aggregated, scale), params, f"{prefix}.node_update"
    )

    edge_messages = relu(
        linear(concat([target_rows, source_rows], axis=1), params, f"{prefix}.edge_message")
    )
    updated_edges = mlp(
        scaled_update(edge_embeddings, edge_messages, scale), params, f"{prefix}.edge_update"
    )
    return updated_nodes, updated_edges


def readout_attention(inputs: GraphTensors, params: Mapping[str, Tensor]) -> Tensor:
    scores = mlp(inputs.weights, params, "readout.attention")
    num_edges = scores.shape[0]
    return segment_softmax(reshape(scores, (num_edges,)), np.zeros(num_edges, dtype=np.intp))


def readout(
    node_embeddings: Tensor,
    edge_embeddings: Tensor,
    inputs: GraphTensors,
    params: Mapping[str, Tensor],
) -> tuple[Tensor, Tensor]:
    """Attention-weighted sum of per-edge triple embeddings; returns ``(H, a_w)``."""
    if edge_embeddings.shape[0] == 0:
        raise TensorShapeError("readout needs at least one edge")
    attention = readout_attention(inputs, params)
    triples = concat(
        [
            gather_rows(node_embeddings, inputs.targets),
            edge_embeddings,
            gather_rows(node_embeddings, inputs.sources),
        ],
        axis=1,
    )
    embedded = mlp(triples, params, "readout.triple")
    return reduce(embedded * _column(attention), "sum", axis=0), attention
