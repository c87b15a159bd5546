"""Per-user spatial-temporal trajectory graphs."""

from stgraphrl.graph.build import (
    GraphBuildError,
    build_graph,
    build_graphs,
    encode_transit_vector,
    normalize_weights,
)
from stgraphrl.graph.codec import (
    GraphFormatError,
    deserialize_graph,
    read_graph_dir,
    serialize_graph,
    write_graph_dir,
)
from stgraphrl.graph.geo import haversine
from stgraphrl.graph.stats import GraphStats, graph_stats, write_stats

__all__ = [
    "GraphBuildError",
    "GraphFormatError",
    "GraphStats",
    "build_graph",
    "build_graphs",
    "deserialize_graph",
    "encode_transit_vector",
    "graph_stats",
    "haversine",
    "normalize_weights",
    "read_graph_dir",
    "serialize_graph",
    "write_graph_dir",
    "write_stats",
]
