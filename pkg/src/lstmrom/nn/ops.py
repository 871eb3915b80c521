"""Differentiable numpy operations.

Every function takes and returns :class:`~lstmrom.nn.tape.Tensor` objects and
records a backward closure when a tape is active. Batched layouts are used
throughout: dense inputs are ``(..., features)`` and sequences ``(batch, steps,
features)``.
"""

from __future__ import annotations

import numpy as np

from .tape import DimensionError, Tensor, constant, record

ACTIVATIONS = ("linear", "tanh", "sigmoid", "elu")


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Saturates instead of overflowing for large |z|.
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "elu":
        return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(z)
    if name == "tanh":
        return 1.0 - y * y
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "elu":
        return np.where(z > 0.0, 1.0, y + 1.0)
    raise ValueError(f"unknown activation {name!r}")


def dense(x: Tensor, weight: Tensor, bias: Tensor, activation: str = "linear") -> Tensor:
    """``activation(x @ weight.T + bias)`` over the last axis of ``x``."""
    W, b, xv = weight.value, bias.value, x.value
    if xv.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise DimensionError(
            f"dense: input {xv.shape} incompatible with weight {W.shape} / bias {b.shape}"
        )
    z = xv @ W.T + b
    y = _activate(activation, z)
    out = Tensor(y)

    def _backward(gouts):
        dz = gouts[0] * _activation_grad(activation, z, y)
        dz2 = dz.reshape(-1, W.shape[0])
        dW = dz2.T @ xv.reshape(-1, W.shape[1])
        db = dz2.sum(axis=0)
        dx = dz @ W if x.requires_grad else None
        return [dx, dW, db]

    record((x, weight, bias), (out,), _backward)
    return out


def _cell_forward(x_t, h, c, W, U, b, H):
    z = x_t @ W.T + h @ U.T + b
    s = sigmoid(z)
    i, f, o = s[:, :H], s[:, H : 2 * H], s[:, 3 * H :]
    g = np.tanh(z[:, 2 * H : 3 * H])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return i, f, g, o, c_new, tc, o * tc


def lstm(x: Tensor, W: Tensor, U: Tensor, b: Tensor, h0: Tensor, c0: Tensor) -> tuple[Tensor, Tensor]:
    """One forget-gate LSTM layer unrolled over a batch of sequences.

    Gate blocks are stacked in the order input, forget, cell, output along the
    first axis of ``W`` (4H x I), ``U`` (4H x H) and ``b`` (4H).

    Returns
    -------
    hs : Tensor
        Hidden states for every step, shape ``(batch, steps, H)``.
    c_last : Tensor
        Cell state after the final step, shape ``(batch, H)``.
    """
    xv, Wv, Uv, bv = x.value, W.value, U.value, b.value
    if xv.ndim != 3:
        raise DimensionError(f"lstm expects (batch, steps, features), got {xv.shape}")
    B, T, I = xv.shape
    H = Uv.shape[1]
    if T < 1:
        raise DimensionError("lstm needs a sequence of at least one step")
    if Wv.shape != (4 * H, I) or Uv.shape != (4 * H, H) or bv.shape != (4 * H,):
        raise DimensionError(
            f"lstm: parameters W{Wv.shape} U{Uv.shape} b{bv.shape} do not match input {I}, hidden {H}"
        )
    if h0.value.shape != (B, H) or c0.value.shape != (B, H):
        raise DimensionError(f"lstm: initial state must be ({B}, {H})")

    # Step-major buffers: index 0 of hs_t / cs holds the initial state.
    gates = np.empty((T, 4, B, H))
    hs_t = np.empty((T + 1, B, H))
    cs = np.empty((T + 1, B, H))
    tcs = np.empty((T, B, H))
    h, c = h0.value, c0.value
    hs_t[0], cs[0] = h, c
    for t in range(T):
        i, f, g, o, c, tc, h = _cell_forward(xv[:, t], h, c, Wv, Uv, bv, H)
        gates[t, 0], gates[t, 1], gates[t, 2], gates[t, 3] = i, f, g, o
        cs[t + 1] = c
        tcs[t] = tc
        hs_t[t + 1] = h
    out_h = Tensor(np.ascontiguousarray(hs_t[1:].transpose(1, 0, 2)))
    out_c = Tensor(c.copy())

    def _backward(gouts):
        gi, gf, gg, go = gates[:, 0], gates[:, 1], gates[:, 2], gates[:, 3]
        # Local derivative factors, vectorised over all steps.
        dc_from_h = go * (1.0 - tcs * tcs)
        d3 = np.stack([gg * gi * (1.0 - gi), cs[:-1] * gf * (1.0 - gf), gi * (1.0 - gg * gg)], axis=1)
        d_o = tcs * go * (1.0 - go)
        dhs = (
            gouts[0].transpose(1, 0, 2)
            if gouts[0] is not None
            else np.zeros((T, B, H))
        )
        dc_next = gouts[1] if gouts[1] is not None else np.zeros((B, H))
        dh_next = np.zeros((B, H))
        dZ = np.empty((T, B, 4, H))
        for t in range(T - 1, -1, -1):
            dh = dhs[t] + dh_next
            dc = dh * dc_from_h[t] + dc_next
            dz = dZ[t]
            dz[:, :3] = dc[:, None, :] * d3[t].transpose(1, 0, 2)
            dz[:, 3] = dh * d_o[t]
            dh_next = dz.reshape(B, 4 * H) @ Uv
            dc_next = dc * gf[t]
        dZ2 = dZ.reshape(T * B, 4 * H)
        dU = dZ2.T @ hs_t[:-1].reshape(T * B, H)
        dW = dZ2.T @ xv.transpose(1, 0, 2).reshape(T * B, I)
        db = dZ2.sum(axis=0)
        dx = (dZ2 @ Wv).reshape(T, B, I).transpose(1, 0, 2) if x.requires_grad else None
        return [dx, dW, dU, db, dh_next, dc_next]

    record((x, W, U, b, h0, c0), (out_h, out_c), _backward)
    return out_h, out_c


def last_step(seq: Tensor) -> Tensor:
    """``seq[:, -1, :]`` for a ``(batch, steps, features)`` tensor."""
    v = seq.value
    out = Tensor(v[:, -1, :].copy())

    def _backward(gouts):
        g = np.zeros_like(v)
        g[:, -1, :] = gouts[0]
        return [g]

    record((seq,), (out,), _backward)
    return out


def reverse_time(seq: Tensor) -> Tensor:
    out = Tensor(seq.value[:, ::-1, :].copy())
    record((seq,), (out,), lambda gouts: [gouts[0][:, ::-1, :].copy()])
    return out


def repeat_time(x: Tensor, steps: int) -> Tensor:
    """Broadcast a ``(batch, features)`` tensor to ``(batch, steps, features)``."""
    v = x.value
    out = Tensor(np.repeat(v[:, None, :], steps, axis=1))
    record((x,), (out,), lambda gouts: [gouts[0].sum(axis=1)])
    return out


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    values = [t.value for t in tensors]
    out = Tensor(np.concatenate(values, axis=axis))
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def _backward(gouts):
        return np.split(gouts[0], sizes, axis=axis)

    record(tuple(tensors), (out,), _backward)
    return out


def sq_dist(a: Tensor, b: Tensor) -> Tensor:
    """Per-sample squared Euclidean distance, summed over all non-batch axes."""
    a, b = constant(a), constant(b)
    if a.value.shape != b.value.shape:
        raise DimensionError(f"sq_dist: shapes {a.value.shape} and {b.value.shape} differ")
    diff = a.value - b.value
    axes = tuple(range(1, diff.ndim))
    out = Tensor((diff * diff).sum(axis=axes) if axes else diff * diff)

    def _backward(gouts):
        g = gouts[0].reshape((-1,) + (1,) * (diff.ndim - 1)) * 2.0 * diff
        return [g, -g]

    record((a, b), (out,), _backward)
    return out


def mean(x: Tensor) -> Tensor:
    v = x.value
    out = Tensor(np.asarray(v.mean()))
    record((x,), (out,), lambda gouts: [np.full_like(v, gouts[0] / v.size)])
    return out


def weighted_sum(terms: list[Tensor], weights: list[float]) -> Tensor:
    """``sum_i weights[i] * terms[i]`` for equally shaped tensors."""
    out = Tensor(sum(w * t.value for w, t in zip(weights, terms)))
    record(tuple(terms), (out,), lambda gouts: [w * gouts[0] for w in weights])
    return out
