from __future__ import annotations

from collections.abc import Mapping

from stgraphrl.autodiff.tensor import Tensor, matmul, relu


def linear(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    out = matmul(x, params[f"{prefix}.weight"])
    bias = params.get(f"{prefix}.bias")
    return out if bias is None else out + bias


def mlp(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """Linear, ReLU, Linear."""
    return linear(relu(linear(x, params, f"{prefix}.0")), params, f"{prefix}.1")
