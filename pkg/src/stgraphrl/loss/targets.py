from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from stgraphrl.domain.models import DistributionTargets, LabelPriors, MobilityGraph


def build_targets(graph: MobilityGraph) -> DistributionTargets:
    """Binary occurrence targets: categories visited, bins with movement, arrival cells.

    A joint cell (c, t) is set when some edge arrives at a category-c node in bin t.
    """
    num_categories, num_bins = graph.num_categories, graph.num_bins
    y_s = np.zeros(num_categories)
    y_t = np.zeros(num_bins)
    y_st = np.zeros((num_categories, num_bins))
    for edge in graph.edges:
        y_s[graph.nodes[edge.src].category] = 1.0
        destination = graph.nodes[edge.dst].category
        y_s[destination] = 1.0
        y_t[edge.departure_bin] = 1.0
        y_t[edge.arrival_bin] = 1.0
        y_st[destination, edge.arrival_bin] = 1.0
    for node in graph.nodes:
        y_s[node.category] = 1.0
    return DistributionTargets(y_s=y_s, y_t=y_t, y_st=y_st.reshape(-1))


def compute_label_priors(targets: Sequence[DistributionTargets]) -> LabelPriors:
    """Per-label positive rate over a corpus (the training split)."""
    if not targets:
        raise ValueError("label priors need at least one target set")
    return LabelPriors(
        spatial=np.mean([target.y_s for target in targets], axis=0),
        temporal=np.mean([target.y_t for target in targets], axis=0),
        joint=np.mean([target.y_st for target in targets], axis=0),
    )
