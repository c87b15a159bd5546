from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray, Tensor, no_grad
from stgraphrl.domain.models import MobilityGraph
from stgraphrl.model.decoder import decode
from stgraphrl.model.encoder import (
    GraphTensors,
    fusion_layer,
    head_spatial,
    head_temporal,
    readout,
    spatial_block,
    temporal_block,
    weight_projection,
)
from stgraphrl.model.params import ModelParams


class ModelInputError(ValueError):
    pass


@dataclass(frozen=True, slots=True, eq=False)
class ForwardState:
    node_embeddings: Tensor
    edge_embeddings: Tensor
    projected_weights: Tensor
    spatial_logits: Tensor
    temporal_logits: Tensor
    embedding: Tensor
    joint_logits: Tensor
    readout_attention: Tensor

    def is_finite(self) -> bool:
        return all(
            bool(np.all(np.isfinite(tensor.data)))
            for tensor in (
                self.node_embeddings,
                self.edge_embeddings,
                self.projected_weights,
                self.spatial_logits,
                self.temporal_logits,
                self.embedding,
                self.joint_logits,
            )
        )


def forward(graph: MobilityGraph, params: ModelParams) -> ForwardState:
    """Encode one user's graph and decode its joint spatial-temporal logits."""
    dims = params.dims
    if (graph.num_categories, graph.num_bins) != (dims.num_categories, dims.num_bins):
        raise ModelInputError(
            f"graph {graph.user_id} has (C_s, C_t) = ({graph.num_categories}, {graph.num_bins}), "
            f"model expects ({dims.num_categories}, {dims.num_bins})"
        )
    inputs = GraphTensors.from_graph(graph)

    nodes = spatial_block(inputs, params, dims.attention_heads)
    edges = temporal_block(inputs, params)
    spatial_logits = head_spatial(nodes, params)
    temporal_logits = head_temporal(edges, params)
    projected = weight_projection(inputs, params)
    for layer in range(dims.fusion_layers):
        nodes, edges = fusion_layer(nodes, edges, projected, inputs, params, layer)
    embedding, attention = readout(nodes, edges, inputs, params)
    joint_logits = decode(embedding, spatial_logits, temporal_logits, params)

    return ForwardState(
        node_embeddings=nodes,
        edge_embeddings=edges,
        projected_weights=projected,
        spatial_logits=spatial_logits,
        temporal_logits=temporal_logits,
        embedding=embedding,
        joint_logits=joint_logits,
        readout_attention=attention,
    )


def infer(graph: MobilityGraph, params: ModelParams) -> ForwardState:
    with no_grad():
        return forward(graph, params)


def user_embedding(state: ForwardState) -> FloatArray:
    return state.embedding.data.copy()


def node_embedding(state: ForwardState) -> FloatArray:
    """Mean of the fused node rows."""
    return state.node_embeddings.data.mean(axis=0)


def edge_embedding(state: ForwardState) -> FloatArray:
    """Mean of the fused edge rows."""
    return state.edge_embeddings.data.mean(axis=0)
