from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stgraphrl.autodiff.gradcheck import grad_check
from stgraphrl.autodiff.tensor import (
    Tensor,
    TensorDomainError,
    TensorShapeError,
    apply_elementwise,
    backward,
    clamp_min,
    concat,
    div,
    gather_rows,
    l2_norm,
    log,
    matmul,
    no_grad,
    reduce,
    reshape,
    segment_softmax,
    segment_sum,
    sigmoid,
    softplus,
    tensor_new,
)

_finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


def test_tensor_new_rejects_a_value_count_that_does_not_fill_the_shape() -> None:
    with pytest.raises(TensorShapeError, match=r"shape \[2, 2\] holds 4 values, got 3"):
        tensor_new([2, 2], [1.0, 2.0, 3.0])


def test_tensor_new_accepts_an_empty_shape() -> None:
    empty = tensor_new([0, 3], [])

    assert empty.shape == (0, 3)
    assert empty.size == 0


def test_sum_of_three_x_has_gradient_three_everywhere() -> None:
    x = tensor_new([3], [1.0, -2.0, 0.5], requires_grad=True)

    backward(reduce(x * 3.0, "sum"))

    assert x.grad is not None
    np.testing.assert_array_equal(x.grad, [3.0, 3.0, 3.0])


def test_square_at_five_has_gradient_ten() -> None:
    x = tensor_new([1], [5.0], requires_grad=True)

    backward(reduce(x * x, "sum"))

    assert x.grad is not None
    assert x.grad[0] == 10.0


def test_backward_accumulates_until_grads_are_reset() -> None:
    x = tensor_new([2], [1.0, 2.0], requires_grad=True)

    backward(reduce(x, "sum"))
    backward(reduce(x, "sum"))
    assert x.grad is not None
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])

    x.zero_grad()
    backward(reduce(x, "sum"))
    np.testing.assert_array_equal(x.grad, [1.0, 1.0])


def test_backward_rejects_a_non_scalar_loss() -> None:
    x = tensor_new([2], [1.0, 2.0], requires_grad=True)

    with pytest.raises(TensorShapeError, match="scalar"):
        backward(x * 2.0)


def test_no_grad_records_nothing() -> None:
    x = tensor_new([2], [1.0, 2.0], requires_grad=True)

    with no_grad():
        y = reduce(x * x, "sum")

    assert not y.requires_grad
    backward(y)
    assert x.grad is None


def test_shared_subexpressions_receive_gradient_from_every_use() -> None:
    x = tensor_new([1], [3.0], requires_grad=True)
    y = x * x
    loss = reduce(y + y * x, "sum")

    backward(loss)

    # d/dx (x^2 + x^3) = 2x + 3x^2
    assert x.grad is not None
    assert x.grad[0] == pytest.approx(2 * 3.0 + 3 * 9.0)


def test_division_by_zero_is_a_domain_error() -> None:
    with pytest.raises(TensorDomainError, match="division by zero"):
        div(Tensor([1.0, 2.0]), Tensor([1.0, 0.0]))


def test_log_of_non_positive_value_is_a_domain_error() -> None:
    with pytest.raises(TensorDomainError):
        log(Tensor([1.0, 0.0]))


def test_matmul_rejects_mismatched_inner_dimensions() -> None:
    with pytest.raises(TensorShapeError, match="inner dimensions"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradient_matches_finite_differences() -> None:
    rng = np.random.default_rng(3)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)

    error = grad_check(lambda: reduce(sigmoid(a @ b), "sum"), [a, b])

    assert error < 1e-7


def test_reshape_rejects_an_incompatible_shape() -> None:
    with pytest.raises(TensorShapeError, match="cannot reshape"):
        reshape(Tensor(np.ones(6)), [4, 2])


def test_reduce_without_axis_returns_a_scalar_tensor() -> None:
    total = reduce(Tensor(np.ones((2, 3))), "mean")

    assert total.shape == ()
    assert total.item() == 1.0


def test_reduce_rejects_an_out_of_range_axis() -> None:
    with pytest.raises(TensorShapeError, match="axis 2"):
        reduce(Tensor(np.ones((2, 3))), "sum", axis=2)


def test_concat_splits_gradient_back_to_each_part() -> None:
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((1, 2)), requires_grad=True)
    weights = Tensor(np.arange(6.0).reshape(3, 2))

    backward(reduce(concat([a, b]) * weights, "sum"))

    assert a.grad is not None and b.grad is not None
    np.testing.assert_array_equal(a.grad, [[0.0, 1.0], [2.0, 3.0]])
    np.testing.assert_array_equal(b.grad, [[4.0, 5.0]])


def test_concat_rejects_mismatched_off_axis_extents() -> None:
    with pytest.raises(TensorShapeError, match="cannot concatenate"):
        concat([Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3)))])


def test_gather_rows_scatters_gradient_onto_repeated_rows() -> None:
    x = Tensor(np.zeros((3, 2)), requires_grad=True)

    backward(reduce(gather_rows(x, np.array([0, 2, 0])), "sum"))

    assert x.grad is not None
    np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


def test_segment_sum_leaves_empty_segments_at_zero() -> None:
    x = Tensor(np.array([[1.0], [2.0], [3.0]]))

    out = segment_sum(x, np.array([0, 0, 2]), 4)

    np.testing.assert_array_equal(out.data, [[3.0], [0.0], [3.0], [0.0]])


@settings(max_examples=50, deadline=None)
@given(
    values=arrays(np.float64, st.integers(1, 12), elements=st.floats(-50.0, 50.0)),
    data=st.data(),
)
def test_segment_softmax_sums_to_one_within_each_segment(
    values: np.ndarray, data: st.DataObject
) -> None:
    ids = np.array(
        data.draw(st.lists(st.integers(0, 3), min_size=values.size, max_size=values.size))
    )

    out = segment_softmax(Tensor(values), ids).data

    assert np.all(out > 0.0)
    for segment in np.unique(ids):
        assert out[ids == segment].sum() == pytest.approx(1.0, abs=1e-12)


def test_segment_softmax_of_an_empty_vector_is_rejected() -> None:
    with pytest.raises(TensorShapeError, match="empty"):
        segment_softmax(Tensor(np.zeros(0)), np.zeros(0, dtype=np.intp))


def test_segment_softmax_gradient_matches_finite_differences() -> None:
    values = Tensor(np.array([0.3, -1.2, 2.0, 0.7, 0.1]), requires_grad=True)
    ids = np.array([0, 1, 0, 1, 1])
    weights = Tensor(np.array([1.0, -2.0, 0.5, 3.0, 1.5]))

    error = grad_check(lambda: reduce(segment_softmax(values, ids) * weights, "sum"), [values])

    assert error < 1e-7


def test_l2_norm_has_zero_gradient_at_the_origin() -> None:
    x = Tensor(np.zeros((2, 3)), requires_grad=True)

    backward(reduce(l2_norm(x, axis=1), "sum"))

    assert x.grad is not None
    np.testing.assert_array_equal(x.grad, np.zeros((2, 3)))


def test_clamped_norm_keeps_division_finite_on_zero_rows() -> None:
    x = Tensor(np.array([[0.0, 0.0], [3.0, 4.0]]), requires_grad=True)
    norm = clamp_min(l2_norm(x, axis=1), 1e-12)

    unit = div(x, reshape(norm, [2, 1]))

    np.testing.assert_allclose(unit.data, [[0.0, 0.0], [0.6, 0.8]])


@settings(max_examples=100, deadline=None)
@given(st.lists(_finite, min_size=1, max_size=6))
def test_softplus_matches_the_direct_formula(values: list[float]) -> None:
    out = softplus(Tensor(values)).data

    np.testing.assert_allclose(out, np.log1p(np.exp(values)), rtol=1e-12)


def test_softplus_does_not_overflow_for_large_inputs() -> None:
    out = softplus(Tensor([1000.0, -1000.0])).data

    np.testing.assert_allclose(out, [1000.0, 0.0])


@pytest.mark.parametrize("fn", ["relu", "leaky_relu", "sigmoid", "exp", "softplus", "scale"])
def test_unary_elementwise_functions_keep_shape(fn: str) -> None:
    x = Tensor(np.linspace(-1.0, 1.0, 6).reshape(2, 3))

    out = apply_elementwise(x, fn, factor=2.0)

    assert out.shape == (2, 3)


def test_binary_elementwise_function_needs_a_second_operand() -> None:
    with pytest.raises(TensorShapeError, match="second operand"):
        apply_elementwise(Tensor([1.0]), "add")


def test_broadcast_gradient_is_summed_back_to_the_bias_shape() -> None:
    x = Tensor(np.ones((4, 3)))
    bias = Tensor(np.zeros(3), requires_grad=True)

    backward(reduce(x + bias, "sum"))

    assert bias.grad is not None
    np.testing.assert_array_equal(bias.grad, [4.0, 4.0, 4.0])


def test_identity_matmul_returns_the_other_operand() -> None:
    other = Tensor([[1.0, 2.0], [3.0, 4.0]])

    np.testing.assert_array_equal(matmul(Tensor(np.eye(2)), other).data, other.data)
    np.testing.assert_array_equal(matmul(Tensor([[1.0, 0.0]]), Tensor([[2.0], [5.0]])).data, [[2.0]])


def test_matmul_matches_a_triple_loop() -> None:
    rng = np.random.default_rng(11)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    expected = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                expected[i, j] += a[i, k] * b[k, j]

    np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize(
    ("fn", "values", "expected"),
    [
        ("relu", [-1.0, 0.0, 2.0], [0.0, 0.0, 2.0]),
        ("sigmoid", [0.0], [0.5]),
        ("leaky_relu", [-5.0], [-1.0]),
    ],
)
def test_elementwise_reference_values(fn: str, values: list[float], expected: list[float]) -> None:
    np.testing.assert_allclose(apply_elementwise(Tensor(values), fn).data, expected)


@pytest.mark.parametrize(
    ("values", "expected"),
    [([5.0], [1.0]), ([1.0, 1.0], [0.5, 0.5]), ([0.0, float(np.log(3.0))], [0.25, 0.75])],
)
def test_segment_softmax_reference_values(values: list[float], expected: list[float]) -> None:
    out = segment_softmax(Tensor(values), [0] * len(values))

    np.testing.assert_allclose(out.data, expected, atol=1e-15)


def test_row_mean_and_sum_reference_values() -> None:
    x = Tensor([[2.0, 4.0], [6.0, 8.0]])

    np.testing.assert_array_equal(reduce(x, "mean", axis=0).data, [4.0, 6.0])
    assert reduce(Tensor(np.zeros(4)), "sum").item() == 0.0


def test_concat_reference_shapes() -> None:
    np.testing.assert_array_equal(concat([Tensor([1.0, 2.0]), Tensor([3.0])]).data, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(concat([Tensor([1.0, 2.0]), Tensor(np.zeros(0))]).data, [1.0, 2.0])
    assert concat([Tensor(np.ones(24))] * 3).shape == (72,)


def test_l2_norm_reference_values() -> None:
    assert l2_norm(Tensor([3.0, 4.0])).item() == 5.0
    assert clamp_min(l2_norm(Tensor([0.0, 0.0])), 1e-12).item() == 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-2.0, 2.0)))
def test_sum_equals_mean_times_count(values: np.ndarray) -> None:
    x = Tensor(values)

    assert reduce(x, "sum").item() == pytest.approx(reduce(x, "mean").item() * values.size)


@pytest.mark.parametrize("fn", ["sigmoid", "exp", "softplus", "leaky_relu"])
def test_elementwise_gradients_match_finite_differences(fn: str) -> None:
    rng = np.random.default_rng(5)
    x = Tensor(rng.uniform(-2.0, 2.0, size=(3, 2)), requires_grad=True)
    weights = Tensor(rng.normal(size=(3, 2)))

    error = grad_check(lambda: reduce(apply_elementwise(x, fn) * weights, "sum"), [x])

    assert error < 1e-6
