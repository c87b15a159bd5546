from __future__ import annotations

import numpy as np
import pytest

from stgraphrl.evaluation.metrics import (
    EvaluationError,
    example_scores,
    joint_threshold,
    multilabel_metrics,
    prior_baseline,
    probabilities,
)
from stgraphrl.model.forward import infer
from stgraphrl.model.params import init_params
from stgraphrl.services.diagnostics import GRADCHECK_DIMS, triangle_graph


def test_example_scores_of_a_partial_hit() -> None:
    accuracy, precision, recall, f1 = example_scores(
        np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0])
    )

    assert accuracy == pytest.approx(1 / 3)
    assert precision == pytest.approx(0.5)
    assert recall == pytest.approx(0.5)
    assert f1 == pytest.approx(0.5)


def test_example_scores_of_a_perfect_prediction() -> None:
    assert example_scores(np.array([0, 1, 1]), np.array([0, 1, 1])) == (1.0, 1.0, 1.0, 1.0)


def test_empty_prediction_scores_zero_precision() -> None:
    accuracy, precision, recall, f1 = example_scores(np.zeros(3), np.array([1, 0, 0]))

    assert (accuracy, precision, recall, f1) == (0.0, 0.0, 0.0, 0.0)


def test_threshold_is_inclusive() -> None:
    report = multilabel_metrics([np.array([0.5, 0.49])], [np.array([1.0, 0.0])], 0.5)

    assert report.f1 == 1.0
    assert report.accuracy == 1.0


def test_users_without_positive_targets_are_excluded_and_counted() -> None:
    report = multilabel_metrics(
        [np.array([0.9, 0.1]), np.array([0.9, 0.9]), np.array([0.1, 0.1])],
        [np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.zeros(2)],
        user_ids=["a", "b", "c"],
    )

    assert report.users_evaluated == 2
    assert report.users_excluded == 1
    assert [scores.user_id for scores in report.per_user] == ["a", "b"]
    assert report.precision == pytest.approx((1.0 + 0.5) / 2)
    assert report.recall == 1.0


def test_metrics_need_at_least_one_positive_user() -> None:
    with pytest.raises(EvaluationError, match="positive target"):
        multilabel_metrics([np.array([0.9])], [np.array([0.0])])


def test_metrics_reject_mismatched_lengths() -> None:
    with pytest.raises(EvaluationError, match="lengths differ"):
        multilabel_metrics([np.array([0.9, 0.1])], [np.array([1.0])])
    with pytest.raises(EvaluationError, match="one probability vector"):
        multilabel_metrics([np.array([0.9])], [])


def test_joint_threshold_is_the_uniform_cell_mass() -> None:
    assert joint_threshold(480) == pytest.approx(1 / 480)


def test_prior_baseline_breaks_ties_toward_lower_cells() -> None:
    prediction = prior_baseline([np.array([1.0, 0.0, 1.0, 0.0]), np.array([1.0, 1.0, 0.0, 0.0])])

    np.testing.assert_array_equal(prediction, [1.0, 1.0, 0.0, 0.0])


def test_prior_baseline_predicts_at_least_one_cell() -> None:
    prediction = prior_baseline([np.array([0.0, 0.0, 1.0]), np.zeros(3), np.zeros(3)])

    np.testing.assert_array_equal(prediction, [0.0, 0.0, 1.0])


def test_prior_baseline_needs_training_targets() -> None:
    with pytest.raises(EvaluationError):
        prior_baseline([])


def test_probability_views_of_a_forward_pass() -> None:
    state = infer(triangle_graph(1), init_params(1, GRADCHECK_DIMS))

    views = probabilities(state)

    assert views.joint.sum() == pytest.approx(1.0)
    assert np.all((views.spatial > 0) & (views.spatial < 1))
    assert np.all((views.temporal > 0) & (views.temporal < 1))
    np.testing.assert_allclose(views.spatial, 1 / (1 + np.exp(-state.spatial_logits.data)))
