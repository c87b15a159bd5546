from __future__ import annotations

import math
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]
IndexArray = NDArray[np.intp]

# Divisor floor for norms that may vanish (zero messages in the fusion layers).
NORM_EPSILON = 1e-12

ElementwiseFn = Literal[
    "add",
    "sub",
    "mul",
    "div",
    "relu",
    "leaky_relu",
    "sigmoid",
    "exp",
    "log",
    "softplus",
    "scale",
]
ReduceKind = Literal["sum", "mean"]

_Backward = Callable[[FloatArray], tuple[FloatArray | None, ...]]


class TensorShapeError(ValueError):
    pass


class TensorDomainError(ValueError):
    pass


_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording the tape (evaluation forwards, finite differences)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ("_backward", "_parents", "data", "grad", "requires_grad")

    def __init__(self, data: ArrayLike, *, requires_grad: bool = False) -> None:
        self.data: FloatArray = np.ascontiguousarray(np.array(data, dtype=np.float64))
        self.requires_grad = requires_grad
        self.grad: FloatArray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: _Backward | None = None

    @classmethod
    def _from_op(
        cls,
        data: FloatArray,
        parents: tuple[Tensor, ...],
        backward: _Backward,
    ) -> Tensor:
        out = cls.__new__(cls)
        out.data = np.ascontiguousarray(data, dtype=np.float64)
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        if _grad_enabled and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def values(self) -> FloatArray:
        return self.data.reshape(-1).copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorShapeError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, _lift(other))

    def __radd__(self, other: float) -> Tensor:
        return add(_lift(other), self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return sub(self, _lift(other))

    def __rsub__(self, other: float) -> Tensor:
        return sub(_lift(other), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, _lift(other))

    def __rmul__(self, other: float) -> Tensor:
        return mul(_lift(other), self)

    def __truediv__(self, other: Tensor | float) -> Tensor:
        return div(self, _lift(other))

    def __neg__(self) -> Tensor:
        return scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


def _lift(value: Tensor | float) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def tensor_new(shape: Sequence[int], values: Sequence[float], requires_grad: bool = False) -> Tensor:
    extents = tuple(int(extent) for extent in shape)
    if any(extent < 0 for extent in extents):
        raise TensorShapeError(f"tensor extents must not be negative: {extents}")
    if math.prod(extents) != len(values):
        raise TensorShapeError(
            f"shape {list(extents)} holds {math.prod(extents)} values, got {len(values)}"
        )
    return Tensor(np.asarray(values, dtype=np.float64).reshape(extents), requires_grad=requires_grad)


def _unbroadcast(grad: FloatArray, shape: tuple[int, ...]) -> FloatArray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as error:
        raise TensorShapeError(f"shapes {a.shape} and {b.shape} do not broadcast") from error


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return Tensor._from_op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return Tensor._from_op(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return Tensor._from_op(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    if np.any(b.data == 0.0):
        raise TensorDomainError("division by zero")
    return Tensor._from_op(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise TensorShapeError(f"matmul needs two matrices, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise TensorShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return Tensor._from_op(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    slope = np.where(x.data > 0.0, 1.0, alpha)
    return Tensor._from_op(x.data * slope, (x,), lambda g: (g * slope,))


def _stable_sigmoid(values: FloatArray) -> FloatArray:
    positive = values >= 0.0
    exp_neg = np.exp(-np.abs(values))
    return np.where(positive, 1.0 / (1.0 + exp_neg), exp_neg / (1.0 + exp_neg))


def sigmoid(x: Tensor) -> Tensor:
    out = _stable_sigmoid(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise TensorDomainError("log of a non-positive value")
    return Tensor._from_op(np.log(x.data), (x,), lambda g: (g / x.data,))


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), evaluated without overflow for large |x|."""
    out = np.maximum(x.data, 0.0) + np.log1p(np.exp(-np.abs(x.data)))
    return Tensor._from_op(out, (x,), lambda g: (g * _stable_sigmoid(x.data),))


def scale(x: Tensor, factor: float) -> Tensor:
    return Tensor._from_op(x.data * factor, (x,), lambda g: (g * factor,))


def apply_elementwise(
    x: Tensor,
    fn: ElementwiseFn,
    other: Tensor | None = None,
    *,
    alpha: float = 0.2,
    factor: float = 1.0,
) -> Tensor:
    binary: dict[str, Callable[[Tensor, Tensor], Tensor]] = {
        "add": add,
        "sub": sub,
        "mul": mul,
        "div": div,
    }
    if fn in binary:
        if other is None:
            raise TensorShapeError(f"{fn} needs a second operand")
        return binary[fn](x, other)
    if other is not None:
        raise TensorShapeError(f"{fn} takes a single operand")
    match fn:
        case "relu":
            return relu(x)
        case "leaky_relu":
            return leaky_relu(x, alpha)
        case "sigmoid":
            return sigmoid(x)
        case "exp":
            return exp(x)
        case "log":
            return log(x)
        case "softplus":
            return softplus(x)
        case "scale":
            return scale(x, factor)
    raise ValueError(f"unknown elementwise function: {fn}")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as error:
        raise TensorShapeError(f"cannot reshape {original} to {tuple(shape)}") from error
    return Tensor._from_op(out, (x,), lambda g: (g.reshape(original),))


def reduce(x: Tensor, kind: ReduceKind, axis: int | None = None) -> Tensor:
    if axis is not None and not -x.data.ndim <= axis < x.data.ndim:
        raise TensorShapeError(f"axis {axis} is invalid for shape {x.shape}")
    count = x.size if axis is None else x.shape[axis]
    if kind == "sum":
        out = x.data.sum(axis=axis)
        factor = 1.0
    elif kind == "mean":
        if count == 0:
            raise TensorShapeError("mean over an empty axis")
        out = x.data.mean(axis=axis)
        factor = 1.0 / count
    else:
        raise ValueError(f"unknown reduction: {kind}")

    def backward(g: FloatArray) -> tuple[FloatArray | None, ...]:
        expanded = g if axis is None else np.expand_dims(g, axis)
        return (np.broadcast_to(expanded * factor, x.shape).copy(),)

    return Tensor._from_op(np.asarray(out, dtype=np.float64), (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise TensorShapeError("concat needs at least one tensor")
    parts = [tensor for tensor in tensors if tensor.size > 0 or len(tensors) == 1]
    if not parts:
        return tensors[0]
    reference = parts[0].shape
    ndim = len(reference)
    if not -ndim <= axis < ndim:
        raise TensorShapeError(f"axis {axis} is invalid for shape {reference}")
    axis %= ndim
    for tensor in parts[1:]:
        shape = tensor.shape
        if len(shape) != ndim or any(
            shape[dim] != reference[dim] for dim in range(ndim) if dim != axis
        ):
            raise TensorShapeError(f"cannot concatenate {reference} with {shape} on axis {axis}")
    if len(parts) == 1:
        return parts[0]
    offsets = np.cumsum([tensor.shape[axis] for tensor in parts])[:-1]
    kept = tuple(parts)
    return Tensor._from_op(
        np.concatenate([tensor.data for tensor in kept], axis=axis),
        kept,
        lambda g: tuple(np.split(g, offsets, axis=axis)),
    )


def gather_rows(x: Tensor, index: IndexArray) -> Tensor:
    rows = np.asarray(index, dtype=np.intp)

    def backward(g: FloatArray) -> tuple[FloatArray | None, ...]:
        grad = np.zeros_like(x.data)
        np.add.at(grad, rows, g)
        return (grad,)

    return Tensor._from_op(x.data[rows], (x,), backward)


def segment_sum(x: Tensor, segment_ids: IndexArray, num_segments: int) -> Tensor:
    """Sum rows of ``x`` into ``num_segments`` buckets; empty buckets stay zero."""
    ids = np.asarray(segment_ids, dtype=np.intp)
    if ids.shape[0] != x.shape[0]:
        raise TensorShapeError(f"{ids.shape[0]} segment ids for {x.shape[0]} rows")
    out = np.zeros((num_segments, *x.shape[1:]), dtype=np.float64)
    np.add.at(out, ids, x.data)
    return Tensor._from_op(out, (x,), lambda g: (g[ids],))


def segment_softmax(values: Tensor, segment_ids: Sequence[int] | IndexArray) -> Tensor:
    if values.data.ndim != 1:
        raise TensorShapeError(f"segment_softmax takes a vector, got shape {values.shape}")
    if values.size == 0:
        raise TensorShapeError("segment_softmax of an empty input")
    ids = np.asarray(segment_ids, dtype=np.intp)
    if ids.shape != values.data.shape:
        raise TensorShapeError(f"{ids.shape[0]} segment ids for {values.size} values")
    if ids.min() < 0:
        raise TensorShapeError("segment ids must not be negative")
    num_segments = int(ids.max()) + 1

    maxima = np.full(num_segments, -np.inf)
    np.maximum.at(maxima, ids, values.data)
    shifted = np.exp(values.data - maxima[ids])
    totals = np.zeros(num_segments)
    np.add.at(totals, ids, shifted)
    out = shifted / totals[ids]

    def backward(g: FloatArray) -> tuple[FloatArray | None, ...]:
        weighted = np.zeros(num_segments)
        np.add.at(weighted, ids, g * out)
        return (out * (g - weighted[ids]),)

    return Tensor._from_op(out, (values,), backward)


def l2_norm(x: Tensor, axis: int | None = None) -> Tensor:
    """Euclidean norm of the whole tensor, or of each slice along ``axis``.

    The gradient at a zero norm is defined as 0. Callers dividing by the norm
    pass it through ``clamp_min(norm, NORM_EPSILON)``.
    """
    norm = np.sqrt(np.sum(x.data * x.data, axis=axis))

    def backward(g: FloatArray) -> tuple[FloatArray | None, ...]:
        safe = np.where(norm > 0.0, norm, 1.0)
        ratio = np.where(norm > 0.0, g / safe, 0.0)
        if axis is not None:
            ratio = np.expand_dims(ratio, axis)
        return (ratio * x.data,)

    return Tensor._from_op(np.asarray(norm, dtype=np.float64), (x,), backward)


def clamp_min(x: Tensor, floor: float) -> Tensor:
    keep = x.data >= floor
    return Tensor._from_op(np.where(keep, x.data, floor), (x,), lambda g: (g * keep,))


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable tensor that requires grad."""
    if loss.size != 1:
        raise TensorShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    order = _topological_order(loss)
    grads: dict[int, FloatArray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        upstream = grads.get(id(node))
        if upstream is None or node._backward is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward(upstream), strict=True):
            if parent_grad is None or not parent.requires_grad:
                continue
            existing = grads.get(id(parent))
            grads[id(parent)] = parent_grad if existing is None else existing + parent_grad

    for node in order:
        accumulated = grads.get(id(node))
        if accumulated is None:
            continue
        node.grad = accumulated.copy() if node.grad is None else node.grad + accumulated
