"""Trainable building blocks: dense layers, LSTM cells and stacks of them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import ops
from .tape import DimensionError, Tensor, parameter


def glorot_uniform(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


class Dense:
    """Fully connected layer ``activation(W x + b)`` with ``W`` of shape (out, in)."""

    def __init__(self, n_in: int, n_out: int, activation: str = "linear", rng=None, name: str = "dense"):
        if activation not in ops.ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.activation = activation
        self.name = name
        self.weight = parameter(glorot_uniform(rng, n_out, n_in), f"{name}/W")
        self.bias = parameter(np.zeros(n_out), f"{name}/b")

    @property
    def n_in(self) -> int:
        return self.weight.value.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.value.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dense(x, self.weight, self.bias, self.activation)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


def dense_forward(layer: Dense, x) -> np.ndarray:
    """Evaluate one layer on a plain vector (or batch of vectors)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.n_in:
        raise DimensionError(f"expected input of length {layer.n_in}, got {x.shape[-1]}")
    return ops.dense(Tensor(x), layer.weight, layer.bias, layer.activation).value


class MLP:
    """Sequence of dense layers; hidden layers share one activation."""

    def __init__(self, sizes: Sequence[int], hidden_activation="elu", output_activation="linear", rng=None, name="mlp"):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        n = len(sizes) - 1
        self.layers = [
            Dense(
                sizes[j],
                sizes[j + 1],
                output_activation if j == n - 1 else hidden_activation,
                rng=rng,
                name=f"{name}/{j}",
            )
            for j in range(n)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


class LSTMState(NamedTuple):
    h: np.ndarray
    c: np.ndarray


class LSTMCell:
    """Parameters of one forget-gate LSTM cell.

    The four gates (input, forget, cell candidate, output) are stored stacked
    in ``W`` (4H x I), ``U`` (4H x H) and ``b`` (4H); the per-gate properties
    ``W_i`` ... ``b_o`` are views into those blocks.
    """

    GATES = ("i", "f", "g", "o")

    def __init__(self, n_in: int, n_hidden: int, rng=None, name: str = "lstm"):
        rng = np.random.default_rng(0) if rng is None else rng
        self.name = name
        H = n_hidden
        W = np.concatenate([glorot_uniform(rng, H, n_in) for _ in range(4)])
        U = np.concatenate([orthogonal(rng, H) for _ in range(4)])
        b = np.zeros(4 * H)
        b[H : 2 * H] = 1.0
        self.W = parameter(W, f"{name}/W")
        self.U = parameter(U, f"{name}/U")
        self.b = parameter(b, f"{name}/b")

    @property
    def n_in(self) -> int:
        return self.W.value.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.U.value.shape[1]

    def gate(self, which: str, kind: str) -> np.ndarray:
        k = self.GATES.index(which)
        H = self.n_hidden
        return getattr(self, kind).value[k * H : (k + 1) * H]

    W_i = property(lambda self: self.gate("i", "W"))
    W_f = property(lambda self: self.gate("f", "W"))
    W_g = property(lambda self: self.gate("g", "W"))
    W_o = property(lambda self: self.gate("o", "W"))
    U_i = property(lambda self: self.gate("i", "U"))
    U_f = property(lambda self: self.gate("f", "U"))
    U_g = property(lambda self: self.gate("g", "U"))
    U_o = property(lambda self: self.gate("o", "U"))
    b_i = property(lambda self: self.gate("i", "b"))
    b_f = property(lambda self: self.gate("f", "b"))
    b_g = property(lambda self: self.gate("g", "b"))
    b_o = property(lambda self: self.gate("o", "b"))

    def parameters(self) -> list[Tensor]:
        return [self.W, self.U, self.b]

    def run(self, x: Tensor, h0: Tensor, c0: Tensor) -> tuple[Tensor, Tensor]:
        return ops.lstm(x, self.W, self.U, self.b, h0, c0)


def _as_batch(v) -> tuple[np.ndarray, bool]:
    v = np.asarray(v, dtype=np.float64)
    return (v[None, :], True) if v.ndim == 1 else (v, False)


def lstm_cell_step(cell: LSTMCell, x, state: LSTMState) -> LSTMState:
    """Advance one cell by a single step; works on vectors or row batches."""
    xb, squeeze = _as_batch(x)
    hb, _ = _as_batch(state.h)
    cb, _ = _as_batch(state.c)
    if xb.shape[1] != cell.n_in or hb.shape[1] != cell.n_hidden or cb.shape != hb.shape:
        raise DimensionError("lstm_cell_step: input or state does not match the cell")
    hs, c = cell.run(Tensor(xb[:, None, :]), Tensor(hb), Tensor(cb))
    h = hs.value[:, 0]
    return LSTMState(h[0], c.value[0]) if squeeze else LSTMState(h, c.value)


def lstm_sequence_forward(stack: Sequence[LSTMCell], seq, init: Sequence[LSTMState] | None = None):
    """Run stacked cells over one sequence of K vectors (array of shape (K, I)).

    Returns the top cell's per-step outputs (K, H) and the final state of every
    cell.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise DimensionError("lstm_sequence_forward needs a non-empty (K, features) sequence")
    x = Tensor(seq[None])
    finals = []
    for j, cell in enumerate(stack):
        if init is None:
            h0 = c0 = np.zeros((1, cell.n_hidden))
        else:
            h0, c0 = np.atleast_2d(init[j].h), np.atleast_2d(init[j].c)
        x, c = cell.run(x, Tensor(h0), Tensor(c0))
        finals.append(LSTMState(x.value[0, -1].copy(), c.value[0].copy()))
    return x.value[0], finals


@dataclass
class StackOutput:
    sequence: Tensor
    last_hidden: Tensor


class LSTMStack:
    """Stacked (optionally bidirectional) LSTM layers for batched sequences.

    With ``bidirectional=True`` each layer runs a forward and a time-reversed
    cell and concatenates their outputs, so layer widths double.
    """

    def __init__(self, n_in: int, n_hidden: int, depth: int = 1, bidirectional: bool = False, rng=None, name="lstm"):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.bidirectional = bidirectional
        self.n_hidden = n_hidden
        width = 2 * n_hidden if bidirectional else n_hidden
        self.layers: list[list[LSTMCell]] = []
        size = n_in
        for j in range(depth):
            cells = [LSTMCell(size, n_hidden, rng=rng, name=f"{name}/{j}/fw")]
            if bidirectional:
                cells.append(LSTMCell(size, n_hidden, rng=rng, name=f"{name}/{j}/bw"))
            self.layers.append(cells)
            size = width
        self.n_out = width

    def parameters(self) -> list[Tensor]:
        return [p for cells in self.layers for cell in cells for p in cell.parameters()]

    def __call__(self, x: Tensor, init: tuple[Tensor, Tensor] | None = None) -> StackOutput:
        """Run the stack; ``init`` seeds the (h, c) of the first layer only."""
        B = x.value.shape[0]
        zeros = Tensor(np.zeros((B, self.n_hidden)))
        last = None
        for j, cells in enumerate(self.layers):
            h0, c0 = init if (j == 0 and init is not None) else (zeros, zeros)
            fw, _ = cells[0].run(x, h0, c0)
            if self.bidirectional:
                bw_rev, _ = cells[1].run(ops.reverse_time(x), h0, c0)
                bw = ops.reverse_time(bw_rev)
                x = ops.concat([fw, bw])
                last = ops.concat([ops.last_step(fw), ops.last_step(bw_rev)])
            else:
                x = fw
                last = ops.last_step(fw)
        return StackOutput(x, last)
