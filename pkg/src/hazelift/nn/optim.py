"""Adagrad optimizer over Param objects."""

from __future__ import annotations

import numpy as np

from .layers import Param

ADAGRAD_EPS = 1e-8


class Adagrad:
    """Accumulates squared gradients; per-element learning rate decays
    as 1/sqrt of that accumulator."""

    def __init__(self, params: list[Param], lr: float = 0.01):
        if lr < 0.0:
            raise ValueError(f"learning rate must be >= 0, got {lr}")
        self.params = list(params)
        self.lr = lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad[...] = 0.0

    def step(self) -> None:
        for p in self.params:
            g = p.grad
            p.accum += g * g
            p.value -= self.lr * g / (np.sqrt(p.accum) + ADAGRAD_EPS)
