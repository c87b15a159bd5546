from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray, Tensor


class MissingGradientError(RuntimeError):
    pass


@dataclass(slots=True)
class OptimState:
    first_moments: dict[str, FloatArray] = field(default_factory=dict)
    second_moments: dict[str, FloatArray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self) -> None:
        if self.step < 0:
            raise ValueError("optimizer step counter must not be negative")
        if self.first_moments.keys() != self.second_moments.keys():
            raise ValueError("first and second moments must cover the same parameters")


@dataclass(frozen=True, slots=True)
class AdamSettings:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ValueError("learning rate and eps must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decay rates must lie in [0, 1)")


def optimizer_step(
    params: Mapping[str, Tensor],
    state: OptimState,
    settings: AdamSettings | None = None,
) -> None:
    """Apply one bias-corrected adaptive-moment update in place, reading ``param.grad``."""
    resolved = settings if settings is not None else AdamSettings()
    missing = [name for name, param in params.items() if param.grad is None]
    if missing:
        raise MissingGradientError(f"parameters without a gradient: {', '.join(missing)}")

    state.step += 1
    step = state.step
    first_correction = 1.0 - math.pow(resolved.beta1, step)
    second_correction = 1.0 - math.pow(resolved.beta2, step)
    for name, param in params.items():
        grad = param.grad
        assert grad is not None
        first = state.first_moments.setdefault(name, np.zeros_like(param.data))
        second = state.second_moments.setdefault(name, np.zeros_like(param.data))
        if first.shape != param.data.shape or second.shape != param.data.shape:
            raise ValueError(f"optimizer moments for {name} do not match its shape")
        first *= resolved.beta1
        first += (1.0 - resolved.beta1) * grad
        second *= resolved.beta2
        second += (1.0 - resolved.beta2) * grad * grad
        corrected_first = first / first_correction
        corrected_second = second / second_correction
        param.data -= resolved.learning_rate * corrected_first / (
            np.sqrt(corrected_second) + resolved.eps
        )
