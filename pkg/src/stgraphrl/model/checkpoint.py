"""Named-tensor files.

``STPARAMS 1`` on the first line, then one line per tensor: name, shape
(extents joined by ``x``; ``-`` for a scalar), then the values with 17
significant digits.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.model.params import ModelDims, ModelParams, infer_dims, param_specs

logger = logging.getLogger(__name__)

TENSOR_FILE_HEADER = "STPARAMS 1"


class CheckpointError(ValueError):
    pass


def _format_shape(shape: tuple[int, ...]) -> str:
    return "x".join(str(extent) for extent in shape) if shape else "-"


def _parse_shape(text: str, line: int) -> tuple[int, ...]:
    if text == "-":
        return ()
    try:
        shape = tuple(int(extent) for extent in text.split("x"))
    except ValueError as error:
        raise CheckpointError(f"line {line}: malformed shape {text!r}") from error
    if any(extent < 0 for extent in shape):
        raise CheckpointError(f"line {line}: negative extent in shape {text!r}")
    return shape


def write_tensor_file(path: Path, tensors: Mapping[str, FloatArray]) -> None:
    lines = [TENSOR_FILE_HEADER]
    for name, values in tensors.items():
        if not name or any(char.isspace() for char in name):
            raise CheckpointError(f"tensor name {name!r} must be non-empty without whitespace")
        array = np.asarray(values, dtype=np.float64)
        reals = " ".join(format(float(value), ".17g") for value in array.reshape(-1))
        lines.append(f"{name} {_format_shape(array.shape)} {reals}".rstrip())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_tensor_file(path: Path) -> dict[str, FloatArray]:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as error:
        raise CheckpointError(f"cannot read tensor file {path}: {error}") from error
    lines = text.splitlines()
    if not lines or lines[0].strip() != TENSOR_FILE_HEADER:
        raise CheckpointError(f"{path}: missing {TENSOR_FILE_HEADER!r} header")

    tensors: dict[str, FloatArray] = {}
    for number, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) < 2:
            raise CheckpointError(f"{path}:{number}: tensor line needs a name and a shape")
        name, shape = parts[0], _parse_shape(parts[1], number)
        if name in tensors:
            raise CheckpointError(f"{path}:{number}: duplicate tensor {name!r}")
        try:
            values = [float(token) for token in parts[2:]]
        except ValueError as error:
            raise CheckpointError(f"{path}:{number}: tensor {name!r} has a malformed value") from error
        if len(values) != math.prod(shape):
            raise CheckpointError(
                f"{path}:{number}: tensor {name!r} declares {math.prod(shape)} values, found {len(values)}"
            )
        tensors[name] = np.array(values, dtype=np.float64).reshape(shape)
    return tensors


def save_checkpoint(params: ModelParams, path: Path) -> None:
    write_tensor_file(path, params.snapshot())
    logger.info("Saved checkpoint", extra={"path": str(path), "tensors": len(params)})


def params_from_arrays(arrays: Mapping[str, FloatArray], dims: ModelDims | None = None) -> ModelParams:
    if dims is None:
        try:
            dims = infer_dims({name: values.shape for name, values in arrays.items()})
        except ValueError as error:
            raise CheckpointError(str(error)) from error
    for spec in param_specs(dims):
        values = arrays.get(spec.name)
        if values is None:
            raise CheckpointError(f"checkpoint lacks tensor {spec.name!r}")
        if values.shape != spec.shape:
            raise CheckpointError(
                f"tensor {spec.name!r} has shape {values.shape}, model expects {spec.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise CheckpointError(f"tensor {spec.name!r} holds non-finite values")
    expected = {spec.name for spec in param_specs(dims)}
    unexpected = sorted(arrays.keys() - expected)
    if unexpected:
        raise CheckpointError(f"checkpoint has unexpected tensor {unexpected[0]!r}")
    return ModelParams.from_arrays(dims, {spec.name: arrays[spec.name] for spec in param_specs(dims)})


def load_checkpoint(path: Path, dims: ModelDims | None = None) -> ModelParams:
    return params_from_arrays(read_tensor_file(path), dims)
