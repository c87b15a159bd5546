from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
import pytest

from stgraphrl.autodiff.tensor import Tensor, backward
from stgraphrl.loss.balanced import DBLossConfig, total_loss
from stgraphrl.loss.targets import build_targets, compute_label_priors
from stgraphrl.model.forward import forward
from stgraphrl.model.params import init_params
from stgraphrl.services import diagnostics
from stgraphrl.services.diagnostics import (
    DEFAULT_GRADCHECK_SEED,
    GRADCHECK_DIMS,
    gradient_check,
    triangle_graph,
)


def test_triangle_graph_is_a_seeded_cycle() -> None:
    graph = triangle_graph(3)

    assert [(edge.src, edge.dst) for edge in graph.edges] == [(0, 1), (1, 2), (2, 0)]
    assert len({node.category for node in graph.nodes}) == 3
    assert triangle_graph(3) == graph
    assert triangle_graph(4) != graph


def test_every_parameter_tensor_receives_gradient() -> None:
    graph = triangle_graph(DEFAULT_GRADCHECK_SEED)
    params = init_params(DEFAULT_GRADCHECK_SEED, GRADCHECK_DIMS)
    targets = build_targets(graph)

    loss = total_loss(
        forward(graph, params), targets, DBLossConfig(), compute_label_priors([targets])
    ).total
    backward(loss)

    silent = [
        name
        for name, tensor in params.items()
        if tensor.grad is None or not np.any(tensor.grad != 0.0)
    ]
    assert silent == []


@pytest.mark.slow
def test_gradient_check_passes_for_the_default_seed() -> None:
    params = init_params(0, GRADCHECK_DIMS)

    result = gradient_check()

    assert result.passed
    assert result.max_relative_error < 1e-4
    assert result.tensors == len(params)
    assert result.entries == sum(tensor.size for tensor in params.values())


def test_gradient_check_reports_failure_against_an_impossible_threshold() -> None:
    result = gradient_check(seed=2, threshold=0.0, entries_per_tensor=1)

    assert not result.passed


def test_gradient_check_sweeps_every_entry_unless_asked_to_sample(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    requested: list[int | None] = []

    def fake_grad_check(
        scalar_fn: Callable[[], Tensor],
        params: Sequence[Tensor],
        h: float = 1e-5,
        *,
        max_entries_per_param: int | None = None,
        seed: int = 0,
    ) -> float:
        requested.append(max_entries_per_param)
        return 0.0

    monkeypatch.setattr(diagnostics, "grad_check", fake_grad_check)

    full = gradient_check()
    sampled = gradient_check(entries_per_tensor=2)

    assert requested == [None, 2]
    assert full.tensors <= sampled.entries <= 2 * full.tensors < full.entries
