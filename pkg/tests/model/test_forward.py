from __future__ import annotations

import numpy as np
import pytest

from stgraphrl.domain.models import GraphEdge, GraphNode, MobilityGraph
from stgraphrl.graph.build import normalized_weight_triples
from stgraphrl.model.forward import (
    ModelInputError,
    edge_embedding,
    forward,
    infer,
    node_embedding,
    user_embedding,
)
from stgraphrl.model.params import ModelDims, init_params

_DIMS = ModelDims(node_dim=8, embedding_dim=6, attention_hidden=4, decoder_dim=8, attention_heads=2)


def _random_graph(rng: np.random.Generator) -> MobilityGraph:
    node_count = int(rng.integers(2, 6))
    edges: dict[tuple[int, int, int, int], GraphEdge] = {}
    for _ in range(int(rng.integers(1, 9))):
        src, dst = (int(v) for v in rng.integers(0, node_count, size=2))
        departure = int(rng.integers(0, 46))
        arrival = departure + int(rng.integers(1, 3))
        edge = GraphEdge(
            src,
            dst,
            departure,
            arrival,
            frequency=int(rng.integers(1, 4)),
            distance_m=0.0 if src == dst else float(rng.uniform(10, 5000)),
            duration_min=float(rng.uniform(5, 120)),
        )
        edges[edge.key] = edge
    edge_list = list(edges.values())
    return MobilityGraph(
        user_id="u",
        num_categories=10,
        num_bins=48,
        nodes=tuple(GraphNode(i, f"k{i}", int(rng.integers(0, 10))) for i in range(node_count)),
        edges=tuple(edge_list),
        normalized_weights=normalized_weight_triples(edge_list),
    )


def _relabel(graph: MobilityGraph, rng: np.random.Generator) -> MobilityGraph:
    order = rng.permutation(len(graph.nodes))
    new_index = {int(old): new for new, old in enumerate(order)}
    nodes = tuple(
        GraphNode(new, graph.nodes[int(old)].location_key, graph.nodes[int(old)].category)
        for new, old in enumerate(order)
    )
    edges = [
        GraphEdge(
            new_index[edge.src],
            new_index[edge.dst],
            edge.departure_bin,
            edge.arrival_bin,
            frequency=edge.frequency,
            distance_m=edge.distance_m,
            duration_min=edge.duration_min,
        )
        for edge in graph.edges
    ]
    shuffled = [edges[int(i)] for i in rng.permutation(len(edges))]
    return MobilityGraph(
        user_id=graph.user_id,
        num_categories=graph.num_categories,
        num_bins=graph.num_bins,
        nodes=nodes,
        edges=tuple(shuffled),
        normalized_weights=normalized_weight_triples(shuffled),
    )


def test_minimal_graph_runs_end_to_end_with_finite_outputs() -> None:
    edges = [GraphEdge(0, 1, 16, 18, frequency=1, distance_m=900.0, duration_min=60.0)]
    graph = MobilityGraph(
        user_id="u",
        num_categories=10,
        num_bins=48,
        nodes=(GraphNode(0, "a", 0), GraphNode(1, "b", 5)),
        edges=tuple(edges),
        normalized_weights=normalized_weight_triples(edges),
    )

    state = forward(graph, init_params(0, _DIMS))

    assert state.is_finite()
    assert state.spatial_logits.shape == (10,)
    assert state.temporal_logits.shape == (48,)
    assert state.embedding.shape == (6,)
    assert state.joint_logits.shape == (480,)
    assert state.readout_attention.data.tolist() == [1.0]


def test_forward_is_deterministic() -> None:
    graph = _random_graph(np.random.default_rng(0))
    params = init_params(1, _DIMS)

    first, second = infer(graph, params), infer(graph, params)

    np.testing.assert_array_equal(first.joint_logits.data, second.joint_logits.data)
    np.testing.assert_array_equal(user_embedding(first), user_embedding(second))


def test_relabeling_nodes_and_shuffling_edges_leaves_outputs_unchanged() -> None:
    rng = np.random.default_rng(2024)
    params = init_params(5, _DIMS)

    for _ in range(20):
        graph = _random_graph(rng)
        original = infer(graph, params)
        permuted = infer(_relabel(graph, rng), params)

        np.testing.assert_allclose(permuted.embedding.data, original.embedding.data, atol=1e-9)
        np.testing.assert_allclose(permuted.joint_logits.data, original.joint_logits.data, atol=1e-9)
        np.testing.assert_allclose(
            permuted.spatial_logits.data, original.spatial_logits.data, atol=1e-9
        )
        np.testing.assert_allclose(
            permuted.temporal_logits.data, original.temporal_logits.data, atol=1e-9
        )
        np.testing.assert_allclose(node_embedding(permuted), node_embedding(original), atol=1e-9)
        np.testing.assert_allclose(edge_embedding(permuted), edge_embedding(original), atol=1e-9)


def test_graph_with_other_label_spaces_is_rejected() -> None:
    edges = [GraphEdge(0, 0, 1, 2, frequency=1, distance_m=0.0, duration_min=30.0)]
    graph = MobilityGraph(
        user_id="odd",
        num_categories=10,
        num_bins=24,
        nodes=(GraphNode(0, "a", 0),),
        edges=tuple(edges),
        normalized_weights=normalized_weight_triples(edges),
    )

    with pytest.raises(ModelInputError, match="odd"):
        forward(graph, init_params(0, _DIMS))


def test_inference_records_no_gradients() -> None:
    params = init_params(0, _DIMS)

    state = infer(_random_graph(np.random.default_rng(3)), params)

    assert not state.joint_logits.requires_grad
