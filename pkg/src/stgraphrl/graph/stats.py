from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from stgraphrl.domain.models import MobilityGraph


@dataclass(frozen=True, slots=True)
class GraphStats:
    graph_count: int
    edge_count: int
    node_count: int
    node_count_histogram: dict[int, int]
    max_outdegree_histogram: dict[int, int]

    def summary_lines(self) -> list[str]:
        return [
            f"graphs\t{self.graph_count}",
            f"edges\t{self.edge_count}",
            f"nodes\t{self.node_count}",
        ]


def graph_stats(graphs: Iterable[MobilityGraph]) -> GraphStats:
    node_sizes: Counter[int] = Counter()
    max_outdegrees: Counter[int] = Counter()
    graph_count = edge_count = node_count = 0
    for graph in graphs:
        graph_count += 1
        edge_count += len(graph.edges)
        node_count += len(graph.nodes)
        node_sizes[len(graph.nodes)] += 1
        max_outdegrees[max(graph.out_degrees(), default=0)] += 1
    return GraphStats(
        graph_count=graph_count,
        edge_count=edge_count,
        node_count=node_count,
        node_count_histogram=dict(sorted(node_sizes.items())),
        max_outdegree_histogram=dict(sorted(max_outdegrees.items())),
    )


def _write_histogram(path: Path, label: str, histogram: dict[int, int]) -> None:
    rows = [f"{label}\tgraphs"] + [f"{value}\t{count}" for value, count in histogram.items()]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_stats(stats: GraphStats, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "summary.txt").write_text("\n".join(stats.summary_lines()) + "\n", encoding="utf-8")
    _write_histogram(directory / "node_counts.tsv", "nodes", stats.node_count_histogram)
    _write_histogram(directory / "max_outdegree.tsv", "max_outdegree", stats.max_outdegree_histogram)
