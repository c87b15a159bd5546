from __future__ import annotations

import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from typing import Literal

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray, Tensor
from stgraphrl.domain.models import DEFAULT_NUM_BINS, DEFAULT_NUM_CATEGORIES

RESIDUAL_UNITS = 3
WEIGHT_CHANNELS = 3

InitKind = Literal["glorot", "zeros", "ones"]


@dataclass(frozen=True, slots=True)
class ModelDims:
    num_categories: int = DEFAULT_NUM_CATEGORIES
    num_bins: int = DEFAULT_NUM_BINS
    node_dim: int = 64
    embedding_dim: int = 24
    attention_hidden: int = 16
    decoder_dim: int = 128
    attention_heads: int = 4
    fusion_layers: int = 3

    def __post_init__(self) -> None:
        for name in (
            "num_categories",
            "num_bins",
            "node_dim",
            "embedding_dim",
            "attention_hidden",
            "decoder_dim",
            "attention_heads",
            "fusion_layers",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"model dimension {name} must be positive")
        if self.node_dim % self.attention_heads:
            raise ValueError("node_dim must be divisible by attention_heads")

    @property
    def head_dim(self) -> int:
        return self.node_dim // self.attention_heads

    @property
    def joint_size(self) -> int:
        return self.num_categories * self.num_bins


@dataclass(frozen=True, slots=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    init: InitKind


def _linear(prefix: str, fan_in: int, fan_out: int, *, bias: bool = True) -> list[ParamSpec]:
    specs = [ParamSpec(f"{prefix}.weight", (fan_in, fan_out), "glorot")]
    if bias:
        specs.append(ParamSpec(f"{prefix}.bias", (fan_out,), "zeros"))
    return specs


def _mlp(prefix: str, fan_in: int, hidden: int, fan_out: int) -> list[ParamSpec]:
    return _linear(f"{prefix}.0", fan_in, hidden) + _linear(f"{prefix}.1", hidden, fan_out)


def param_specs(dims: ModelDims) -> list[ParamSpec]:
    """Every named tensor of the model, in initialization order."""
    d_node, c_s, c_t = dims.node_dim, dims.num_categories, dims.num_bins
    specs: list[ParamSpec] = []
    for head in range(dims.attention_heads):
        prefix = f"spatial.head.{head}"
        specs.append(ParamSpec(f"{prefix}.weight", (c_s, dims.head_dim), "glorot"))
        specs.append(ParamSpec(f"{prefix}.attention_dst", (dims.head_dim, 1), "glorot"))
        specs.append(ParamSpec(f"{prefix}.attention_src", (dims.head_dim, 1), "glorot"))
    specs += _mlp("temporal", c_t, d_node, d_node)
    specs += _linear("head_spatial", d_node, c_s)
    specs += _linear("head_temporal", d_node, c_t)
    specs.append(ParamSpec("temporal_gate", (d_node,), "ones"))
    specs += _linear("weight_projection", WEIGHT_CHANNELS, d_node)
    for layer in range(dims.fusion_layers):
        prefix = f"fusion.{layer}"
        specs += _mlp(f"{prefix}.node_update", d_node, d_node, d_node)
        specs += _linear(f"{prefix}.edge_message", 2 * d_node, d_node)
        specs += _mlp(f"{prefix}.edge_update", d_node, d_node, d_node)
        specs.append(ParamSpec(f"{prefix}.beta", (1,), "ones"))
        specs.append(ParamSpec(f"{prefix}.scale", (1,), "ones"))
    specs += _linear("readout.attention.0", WEIGHT_CHANNELS, dims.attention_hidden)
    # Softmax over edges ignores a shared offset, so the scoring layer has no bias.
    specs += _linear("readout.attention.1", dims.attention_hidden, 1, bias=False)
    specs += _mlp("readout.triple", 3 * d_node, d_node, dims.embedding_dim)
    specs += _linear("decoder.input", dims.embedding_dim + c_s + c_t, dims.decoder_dim)
    for unit in range(RESIDUAL_UNITS):
        specs += _mlp(f"decoder.residual.{unit}", dims.decoder_dim, dims.decoder_dim, dims.decoder_dim)
    specs += _linear("decoder.output", dims.decoder_dim, dims.joint_size)
    return specs


@dataclass(frozen=True, slots=True, eq=False)
class ModelParams(Mapping[str, Tensor]):
    dims: ModelDims
    tensors: dict[str, Tensor]

    def __post_init__(self) -> None:
        expected = {spec.name: spec.shape for spec in param_specs(self.dims)}
        if expected.keys() != self.tensors.keys():
            missing = sorted(expected.keys() - self.tensors.keys())
            extra = sorted(self.tensors.keys() - expected.keys())
            raise ValueError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            tensor = self.tensors[name]
            if tensor.shape != shape:
                raise ValueError(f"parameter {name} has shape {tensor.shape}, expected {shape}")
            if not np.all(np.isfinite(tensor.data)):
                raise ValueError(f"parameter {name} holds non-finite values")

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def snapshot(self) -> dict[str, FloatArray]:
        return {name: tensor.data.copy() for name, tensor in self.tensors.items()}

    def copy(self) -> ModelParams:
        return ModelParams.from_arrays(self.dims, self.snapshot())

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def gradient_norm(self) -> float:
        total = sum(
            float(np.sum(tensor.grad * tensor.grad))
            for tensor in self.tensors.values()
            if tensor.grad is not None
        )
        return math.sqrt(total)

    @classmethod
    def from_arrays(cls, dims: ModelDims, arrays: Mapping[str, FloatArray]) -> ModelParams:
        return cls(
            dims=dims,
            tensors={
                name: Tensor(np.array(values, dtype=np.float64), requires_grad=True)
                for name, values in arrays.items()
            },
        )


def init_params(seed: int, dims: ModelDims | None = None) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit gates and fusion scalars."""
    resolved = dims if dims is not None else ModelDims()
    rng = np.random.default_rng(seed)
    arrays: dict[str, FloatArray] = {}
    for spec in param_specs(resolved):
        if spec.init == "glorot":
            fan_in, fan_out = spec.shape
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            arrays[spec.name] = rng.uniform(-limit, limit, size=spec.shape)
        elif spec.init == "ones":
            arrays[spec.name] = np.ones(spec.shape)
        else:
            arrays[spec.name] = np.zeros(spec.shape)
    return ModelParams.from_arrays(resolved, arrays)


def infer_dims(shapes: Mapping[str, tuple[int, ...]]) -> ModelDims:
    """Recover model dimensions from the tensor shapes of a checkpoint."""
    try:
        node_dim, num_categories = shapes["head_spatial.weight"]
        num_bins = shapes["head_temporal.weight"][1]
        heads = sum(
            1 for name in shapes if name.startswith("spatial.head.") and name.endswith(".weight")
        )
        layers = sum(1 for name in shapes if name.startswith("fusion.") and name.endswith(".beta"))
        attention_hidden = shapes["readout.attention.0.weight"][1]
        embedding_dim = shapes["readout.triple.1.weight"][1]
        decoder_dim = shapes["decoder.input.weight"][1]
    except (KeyError, IndexError, ValueError) as error:
        raise ValueError(f"cannot infer model dimensions: missing or malformed {error}") from error
    return ModelDims(
        num_categories=num_categories,
        num_bins=num_bins,
        node_dim=node_dim,
        embedding_dim=embedding_dim,
        attention_hidden=attention_hidden,
        decoder_dim=decoder_dim,
        attention_heads=heads,
        fusion_layers=layers,
    )
