from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.gradcheck import grad_check
from stgraphrl.autodiff.tensor import Tensor
from stgraphrl.domain.models import GraphEdge, GraphNode, MobilityGraph
from stgraphrl.graph.build import normalized_weight_triples
from stgraphrl.loss.balanced import DBLossConfig, total_loss
from stgraphrl.loss.targets import build_targets, compute_label_priors
from stgraphrl.model.forward import forward
from stgraphrl.model.params import ModelDims, init_params

logger = logging.getLogger(__name__)

DEFAULT_GRADCHECK_SEED = 7
DEFAULT_GRADCHECK_THRESHOLD = 1e-4
# Narrow widths keep a sweep over every entry short; every tensor kind is still present.
GRADCHECK_DIMS = ModelDims(
    node_dim=8,
    embedding_dim=6,
    attention_hidden=4,
    decoder_dim=4,
    attention_heads=4,
    fusion_layers=3,
)

@dataclass(frozen=True, slots=True)
class GradientCheckResult:
    seed: int
    max_relative_error: float
    threshold: float
    tensors: int
    entries: int

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.threshold


def triangle_graph(seed: int, dims: ModelDims = GRADCHECK_DIMS) -> MobilityGraph:
    """A seeded three-node, three-edge cycle with distinct weights."""
    rng = np.random.default_rng(seed)
    categories = rng.choice(dims.num_categories, size=3, replace=False)
    nodes = tuple(
        GraphNode(node_index=i, location_key=f"p{i}", category=int(c)) for i, c in enumerate(categories)
    )
    edges = []
    for src, dst in ((0, 1), (1, 2), (2, 0)):
        departure = int(rng.integers(0, dims.num_bins - 4))
        arrival = departure + int(rng.integers(1, 4))
        edges.append(
            GraphEdge(
                src=src,
                dst=dst,
                departure_bin=departure,
                arrival_bin=arrival,
                frequency=int(rng.integers(1, 5)),
                distance_m=float(rng.uniform(100.0, 5000.0)),
                duration_min=float(rng.uniform(10.0, 120.0)),
            )
        )
    return MobilityGraph(
        user_id=f"gradcheck-{seed}",
        num_categories=dims.num_categories,
        num_bins=dims.num_bins,
        nodes=nodes,
        edges=tuple(edges),
        normalized_weights=normalized_weight_triples(edges),
    )


def gradient_check(
    seed: int = DEFAULT_GRADCHECK_SEED,
    threshold: float = DEFAULT_GRADCHECK_THRESHOLD,
    *,
    dims: ModelDims = GRADCHECK_DIMS,
    entries_per_tensor: int | None = None,
) -> GradientCheckResult:
    """Central differences against backward() on the triangle graph.

    Every entry of every parameter tensor is checked unless
    ``entries_per_tensor`` asks for a seeded sample of each tensor.
    """
    graph = triangle_graph(seed, dims)
    params = init_params(seed, dims)
    targets = build_targets(graph)
    priors = compute_label_priors([targets])
    config = DBLossConfig()

    def objective() -> Tensor:
        return total_loss(forward(graph, params), targets, config, priors).total

    error = grad_check(
        objective,
        list(params.values()),
        max_entries_per_param=entries_per_tensor,
        seed=seed,
    )
    result = GradientCheckResult(
        seed=seed,
        max_relative_error=error,
        threshold=threshold,
        tensors=len(params),
        entries=sum(
            tensor.size if entries_per_tensor is None else min(tensor.size, entries_per_tensor)
            for tensor in params.values()
        ),
    )
    if not result.passed:
        logger.error("Gradient check failed", extra={"seed": seed, "error": error})
    return result
