from __future__ import annotations

import numpy as np
import pytest

from stgraphrl.autodiff.gradcheck import NonDeterministicFunctionError, grad_check
from stgraphrl.autodiff.tensor import Tensor, reduce, sigmoid


def test_linear_function_is_exact() -> None:
    x = Tensor(np.array([0.5, -1.0, 2.0]), requires_grad=True)

    assert grad_check(lambda: reduce(x, "sum"), [x]) < 1e-10


def test_sigmoid_sum_agrees_with_central_differences() -> None:
    x = Tensor(np.linspace(-3.0, 3.0, 7), requires_grad=True)

    assert grad_check(lambda: reduce(sigmoid(x), "sum"), [x]) < 1e-6


def test_function_with_internal_randomness_is_rejected() -> None:
    x = Tensor(np.ones(3), requires_grad=True)
    rng = np.random.default_rng(0)

    def noisy() -> Tensor:
        return reduce(x * float(rng.normal()), "sum")

    with pytest.raises(NonDeterministicFunctionError, match="disagree"):
        grad_check(noisy, [x])


def test_step_must_be_positive() -> None:
    x = Tensor(np.ones(2), requires_grad=True)

    with pytest.raises(ValueError, match="positive"):
        grad_check(lambda: reduce(x, "sum"), [x], h=0.0)


def test_sampled_entries_leave_parameter_values_untouched() -> None:
    x = Tensor(np.arange(50.0) / 10.0, requires_grad=True)
    before = x.data.copy()

    grad_check(lambda: reduce(sigmoid(x), "sum"), [x], max_entries_per_param=5, seed=3)

    np.testing.assert_array_equal(x.data, before)
