from __future__ import annotations

from typing import Sequence

import numpy as np

from .tape import DimensionError, NonFiniteError, Tensor


class Adam:
    """Adam with bias-corrected moment estimates.

    Parameters are updated in place: ``p.value`` is replaced by a new array on
    every step, so previously captured snapshots of the values stay intact.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise DimensionError("one gradient per parameter is required")
        for p, g in zip(self.params, grads):
            if g.shape != p.value.shape:
                raise DimensionError(f"gradient for {p.name} has shape {g.shape}, expected {p.value.shape}")
            if not np.all(np.isfinite(g)):
                bad = int(np.size(g) - np.isfinite(g).sum())
                raise NonFiniteError(f"non-finite gradient for {p.name or 'parameter'} ({bad} entries)")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for j, (p, g) in enumerate(zip(self.params, grads)):
            self.m[j] = b1 * self.m[j] + (1.0 - b1) * g
            self.v[j] = b2 * self.v[j] + (1.0 - b2) * g * g
            p.value = p.value - self.lr * (self.m[j] / c1) / (np.sqrt(self.v[j] / c2) + self.eps)


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Rescale ``grads`` jointly so their concatenated 2-norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if total <= max_norm or total == 0.0:
        return list(grads)
    return [g * (max_norm / total) for g in grads]


def adam_update(state: Adam, grads: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Apply one Adam step and return the updated parameter values."""
    state.step(grads)
    return [p.value for p in state.params]
