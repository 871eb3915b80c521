"""Reverse-mode gradient recording over coarse, fused numpy operations.

Operations in :mod:`lstmrom.nn.ops` compute their forward result eagerly and,
when a :class:`GradientTape` is active, push a node holding a closure that maps
output gradients to input gradients. :func:`backward` replays those closures in
reverse order.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up in a loss, gradient or parameter."""


class Tensor:
    """A float64 array plus a flag telling the tape whether to track it."""

    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.value.shape}, requires_grad={self.requires_grad})"


def constant(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(value, name: str | None = None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


BackwardFn = Callable[[list], Sequence]


class _Node:
    __slots__ = ("inputs", "outputs", "backward")

    def __init__(self, inputs, outputs, backward):
        self.inputs = inputs
        self.outputs = outputs
        self.backward = backward


class GradientTape:
    """Context manager collecting the nodes of one forward pass.

    Example
    -------
    >>> with GradientTape() as tape:
    ...     loss = some_loss(params)
    >>> grads = backward(tape, loss, params)
    """

    _active: list["GradientTape"] = []

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "GradientTape":
        GradientTape._active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        GradientTape._active.remove(self)


def active_tape() -> GradientTape | None:
    return GradientTape._active[-1] if GradientTape._active else None


def record(inputs: Sequence[Tensor], outputs: Sequence[Tensor], backward_fn: BackwardFn) -> None:
    """Register an operation on the active tape if any input is tracked."""
    tape = active_tape()
    if tape is None or not any(x.requires_grad for x in inputs):
        return
    for out in outputs:
        out.requires_grad = True
    tape.nodes.append(_Node(tuple(inputs), tuple(outputs), backward_fn))


def backward(tape: GradientTape, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Exact gradients of a scalar ``loss`` with respect to ``params``.

    Parameters never reached by the loss get zero gradients of their own shape.
    """
    if loss.value.size != 1:
        raise DimensionError(f"backward needs a scalar root, got shape {loss.value.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(tape.nodes):
        gouts = [grads.get(id(o)) for o in node.outputs]
        if all(g is None for g in gouts):
            continue
        gins = node.backward(gouts)
        for x, g in zip(node.inputs, gins):
            if g is None or not x.requires_grad:
                continue
            key = id(x)
            grads[key] = grads[key] + g if key in grads else g
    return [grads.get(id(p), np.zeros_like(p.value)) for p in params]
