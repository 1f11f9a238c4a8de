"""ADAM optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Tensor
from .errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus the shared step counter."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], learning_rate: float, **kwargs) -> "AdamState":
        state = cls(learning_rate=learning_rate, **kwargs)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> None:
    """Apply one bias-corrected ADAM update in place.

    m <- b1*m + (1-b1)*g, v <- b2*v + (1-b2)*g^2,
    p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError(
            f"adam_step: {len(params)} params, {len(grads)} grads, {len(state.m)} moment slots"
        )
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape or state.m[i].shape != p.data.shape:
            raise ShapeError(
                f"adam_step: param {i} shape {p.data.shape} vs grad {g.shape}"
            )
        m, v = state.m[i], state.v[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


class Adam:
    """Convenience wrapper tying an AdamState to a parameter list."""

    def __init__(self, params: Sequence[Tensor], learning_rate: float = 0.01, **kwargs):
        self.params = list(params)
        for p in self.params:
            if not p.requires_grad:
                raise ShapeError("Adam requires requires_grad parameters")
        self.state = AdamState.for_params(self.params, learning_rate, **kwargs)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)
