from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.domain.models import (
    DEFAULT_NUM_BINS,
    DEFAULT_NUM_CATEGORIES,
    GraphEdge,
    GraphNode,
    MobilityGraph,
    UserHistory,
)
from stgraphrl.graph.geo import haversine
from stgraphrl.ingest.checkins import time_bin

logger = logging.getLogger(__name__)


class GraphBuildError(ValueError):
    pass


def encode_transit_vector(departure_bin: int, arrival_bin: int, num_bins: int = DEFAULT_NUM_BINS) -> FloatArray:
    if not 0 <= departure_bin < num_bins or not 0 <= arrival_bin < num_bins:
        raise GraphBuildError(f"transit bins must lie in [0, {num_bins})")
    if arrival_bin < departure_bin:
        raise GraphBuildError(
            f"arrival bin {arrival_bin} precedes departure bin {departure_bin}"
        )
    vector = np.zeros(num_bins)
    vector[departure_bin] = 1.0
    vector[arrival_bin] = 1.0
    return vector


@dataclass(slots=True)
class _EdgeAccumulator:
    frequency: int = 0
    durations: list[float] = field(default_factory=list)


def build_graph(
    history: UserHistory,
    *,
    num_categories: int = DEFAULT_NUM_CATEGORIES,
    num_bins: int = DEFAULT_NUM_BINS,
) -> MobilityGraph:
    """Fold a user's daily trajectories into one weighted directed graph.

    Nodes are distinct location keys in first-seen order. Repeated movements
    with the same endpoints and the same departure and arrival bins merge into
    one edge whose frequency counts them and whose duration is their mean.
    """
    node_index: dict[str, int] = {}
    nodes: list[GraphNode] = []
    coordinates: list[tuple[float, float]] = []
    edges: dict[tuple[int, int, int, int], _EdgeAccumulator] = {}

    def intern(location_key: str, category: int, latitude: float, longitude: float) -> int:
        index = node_index.get(location_key)
        if index is None:
            index = len(nodes)
            node_index[location_key] = index
            nodes.append(GraphNode(node_index=index, location_key=location_key, category=category))
            coordinates.append((latitude, longitude))
        return index

    for trajectory in history.trajectories:
        for origin, destination in zip(trajectory.visits, trajectory.visits[1:]):
            src = intern(origin.location_key, origin.category, origin.latitude, origin.longitude)
            dst = intern(
                destination.location_key,
                destination.category,
                destination.latitude,
                destination.longitude,
            )
            departure = time_bin(origin.timestamp)
            arrival = time_bin(destination.timestamp)
            if arrival < departure:
                raise GraphBuildError(
                    f"user {history.user_id}: movement on {trajectory.date} arrives before it departs"
                )
            accumulator = edges.setdefault((src, dst, departure, arrival), _EdgeAccumulator())
            accumulator.frequency += 1
            accumulator.durations.append(
                (destination.timestamp - origin.timestamp).total_seconds() / 60.0
            )

    if not edges:
        raise GraphBuildError(f"user {history.user_id} has no movements")

    graph_edges = tuple(
        GraphEdge(
            src=src,
            dst=dst,
            departure_bin=departure,
            arrival_bin=arrival,
            frequency=accumulator.frequency,
            distance_m=haversine(*coordinates[src], *coordinates[dst]),
            duration_min=sum(accumulator.durations) / len(accumulator.durations),
        )
        for (src, dst, departure, arrival), accumulator in edges.items()
    )
    try:
        return MobilityGraph(
            user_id=history.user_id,
            num_categories=num_categories,
            num_bins=num_bins,
            nodes=tuple(nodes),
            edges=graph_edges,
            normalized_weights=normalized_weight_triples(graph_edges),
        )
    except ValueError as error:
        raise GraphBuildError(f"user {history.user_id}: {error}") from error


def _min_max(values: FloatArray) -> FloatArray:
    low, high = float(values.min()), float(values.max())
    if high == low:
        return np.ones_like(values)
    return (values - low) / (high - low)


def normalized_weight_triples(
    edges: Sequence[GraphEdge],
) -> tuple[tuple[float, float, float], ...]:
    raw = np.array(
        [(edge.frequency, edge.distance_m, edge.duration_min) for edge in edges],
        dtype=np.float64,
    ).reshape(len(edges), 3)
    scaled = np.stack([_min_max(raw[:, channel]) for channel in range(3)], axis=1)
    return tuple((float(row[0]), float(row[1]), float(row[2])) for row in scaled)


def normalize_weights(graph: MobilityGraph) -> MobilityGraph:
    """Per-graph min-max of frequency, distance and duration; a flat channel maps to 1.0."""
    return dataclasses.replace(graph, normalized_weights=normalized_weight_triples(graph.edges))


def _build_one(job: tuple[UserHistory, int, int]) -> MobilityGraph:
    history, num_categories, num_bins = job
    return build_graph(history, num_categories=num_categories, num_bins=num_bins)


def build_graphs(
    histories: Sequence[UserHistory],
    *,
    num_categories: int = DEFAULT_NUM_CATEGORIES,
    num_bins: int = DEFAULT_NUM_BINS,
    jobs: int = 1,
) -> list[MobilityGraph]:
    work = [(history, num_categories, num_bins) for history in histories]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            graphs = list(pool.map(_build_one, work))
    else:
        graphs = [_build_one(item) for item in work]
    logger.info("Built mobility graphs", extra={"graphs": len(graphs), "jobs": jobs})
    return graphs
