from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import jensenshannon
from scipy.stats import pearsonr

from stgraphrl.domain.models import GraphEdge, GraphNode, MobilityGraph
from stgraphrl.evaluation.metrics import EvaluationError
from stgraphrl.evaluation.similarity import (
    CorrelationReport,
    CorrelationUndefinedError,
    frequency_distributions,
    group_pair_means,
    jensen_distance,
    pairwise_euclidean,
    pearson,
    similarity_correlation,
)
from stgraphrl.graph.build import normalized_weight_triples

_weights = st.lists(
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False), min_size=6, max_size=6
).filter(lambda values: sum(values) > 1e-3)


def test_disjoint_supports_are_at_distance_one() -> None:
    assert jensen_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)


def test_identical_distributions_are_at_distance_zero() -> None:
    assert jensen_distance(np.array([2.0, 6.0, 2.0]), np.array([1.0, 3.0, 1.0])) == pytest.approx(
        0.0, abs=1e-12
    )


@settings(max_examples=60, deadline=None)
@given(_weights, _weights)
def test_jensen_distance_matches_scipy(p: list[float], q: list[float]) -> None:
    expected = jensenshannon(np.array(p), np.array(q), base=2)

    assert jensen_distance(np.array(p), np.array(q)) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize(
    ("p", "q"),
    [([1.0, 0.0], [1.0]), ([-1.0, 2.0], [1.0, 1.0]), ([0.0, 0.0], [1.0, 1.0])],
)
def test_jensen_distance_rejects_invalid_vectors(p: list[float], q: list[float]) -> None:
    with pytest.raises(EvaluationError):
        jensen_distance(np.array(p), np.array(q))


def test_pearson_matches_scipy() -> None:
    rng = np.random.default_rng(9)
    x = rng.normal(size=40)
    y = 0.3 * x + rng.normal(size=40)

    assert pearson(x, y) == pytest.approx(pearsonr(x, y)[0], abs=1e-12)


def test_pearson_of_a_constant_sample_is_undefined() -> None:
    with pytest.raises(CorrelationUndefinedError, match="representation"):
        pearson(np.ones(4), np.arange(4.0))
    with pytest.raises(CorrelationUndefinedError, match="distribution"):
        pearson(np.arange(4.0), np.ones(4))
    with pytest.raises(CorrelationUndefinedError):
        pearson(np.array([1.0]), np.array([2.0]))


def test_pairwise_distances_follow_row_major_pair_order() -> None:
    points = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])

    np.testing.assert_allclose(pairwise_euclidean(points), [5.0, 1.0, np.sqrt(18.0)])


def _two_edge_graph() -> MobilityGraph:
    edges = [
        GraphEdge(0, 1, 16, 18, frequency=2, distance_m=500.0, duration_min=60.0),
        GraphEdge(1, 1, 20, 20, frequency=1, distance_m=0.0, duration_min=10.0),
    ]
    return MobilityGraph(
        user_id="u",
        num_categories=3,
        num_bins=24,
        nodes=(GraphNode(0, "a", 0), GraphNode(1, "b", 2)),
        edges=tuple(edges),
        normalized_weights=normalized_weight_triples(edges),
    )


def test_frequency_distributions_count_movements_by_category_and_bin() -> None:
    distributions = frequency_distributions(_two_edge_graph())

    np.testing.assert_array_equal(distributions.spatial, [2.0, 0.0, 4.0])
    assert distributions.temporal[16] == 2.0
    assert distributions.temporal[18] == 2.0
    assert distributions.temporal[20] == 1.0
    assert distributions.temporal.sum() == 5.0
    joint = distributions.joint.reshape(3, 24)
    assert joint[2, 18] == 2.0
    assert joint[2, 20] == 1.0
    assert joint.sum() == 3.0


def test_similarity_correlation_needs_three_users() -> None:
    distributions = frequency_distributions(_two_edge_graph())

    with pytest.raises(EvaluationError, match="three users"):
        similarity_correlation(["a", "b"], np.zeros((2, 2)), [distributions, distributions])


def _report(user_ids: tuple[str, ...], d_rep: list[float]) -> CorrelationReport:
    rows, cols = np.triu_indices(len(user_ids), k=1)
    zeros = np.zeros(len(d_rep))
    return CorrelationReport(
        r_s=0.0,
        r_t=0.0,
        r_st=0.0,
        user_ids=user_ids,
        pair_rows=rows.astype(np.intp),
        pair_cols=cols.astype(np.intp),
        d_rep=np.array(d_rep),
        d_true={"spatial": zeros, "temporal": zeros, "joint": zeros},
    )


def test_group_means_split_same_and_cross_label_pairs() -> None:
    report = _report(("a", "b", "c"), [1.0, 4.0, 6.0])

    same, cross = group_pair_means(report, {"a": "x", "b": "x", "c": "y"})

    assert same == 1.0
    assert cross == 5.0


def test_group_means_need_both_kinds_of_pair() -> None:
    report = _report(("a", "b", "c"), [1.0, 4.0, 6.0])

    with pytest.raises(EvaluationError, match="same-group and cross-group"):
        group_pair_means(report, {"a": "x", "b": "y", "c": "z"})
