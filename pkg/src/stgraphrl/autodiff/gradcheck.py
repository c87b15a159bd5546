from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from stgraphrl.autodiff.tensor import Tensor, backward, no_grad


class NonDeterministicFunctionError(RuntimeError):
    pass


def grad_check(
    scalar_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    *,
    max_entries_per_param: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative gap between backward() and central differences.

    With ``max_entries_per_param`` set, a seeded subset of each tensor's entries
    is probed instead of all of them; every tensor is still visited.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")

    for param in params:
        param.zero_grad()
    loss = scalar_fn()
    reference = loss.item()
    backward(loss)
    analytic = [
        param.grad.reshape(-1).copy() if param.grad is not None else np.zeros(param.size)
        for param in params
    ]

    with no_grad():
        repeated = scalar_fn().item()
    if repeated != reference:
        raise NonDeterministicFunctionError(
            f"two forward passes disagree: {reference!r} != {repeated!r}"
        )

    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for param, expected in zip(params, analytic, strict=True):
            flat = param.data.reshape(-1)
            indices: Sequence[int] | np.ndarray = range(flat.size)
            if max_entries_per_param is not None and flat.size > max_entries_per_param:
                indices = np.sort(rng.choice(flat.size, max_entries_per_param, replace=False))
            for index in indices:
                original = flat[index]
                flat[index] = original + h
                upper = scalar_fn().item()
                flat[index] = original - h
                lower = scalar_fn().item()
                flat[index] = original
                numeric = (upper - lower) / (2.0 * h)
                gap = abs(expected[index] - numeric)
                worst = max(worst, gap / max(abs(expected[index]), abs(numeric), 1e-8))
    return worst
