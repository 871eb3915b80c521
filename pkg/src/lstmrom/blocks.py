"""Encoder/decoder blocks shared by the parameter-driven and the time-series models."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .nn import MLP, Dense, DimensionError, LSTMStack, Tensor, ops


@dataclass
class InputNormalizer:
    """Affine map of regressor inputs onto [0, 1] using training ranges.

    Constant inputs (zero range) are mapped to 0.
    """

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "InputNormalizer":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return cls(X.min(axis=0), X.max(axis=0))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - self.lo) / safe, 0.0)


class SequenceEncoder:
    """Optional time-distributed reducer, stacked LSTM, optional dense latent head.

    The encoder's output is the last hidden state of the top layer (mapped by
    the head when present); per-step outputs are discarded.
    """

    def __init__(self, n_in: int, n_hidden: int, n_latent: int, depth: int = 1, bidirectional: bool = False,
                 reducer: int | None = None, head: bool = False, rng=None, name: str = "enc"):
        self.reducer = Dense(n_in, reducer, "elu", rng=rng, name=f"{name}/reducer") if reducer else None
        size = reducer if reducer else n_in
        self.lstm = LSTMStack(size, n_hidden, depth, bidirectional, rng=rng, name=f"{name}/lstm")
        if head:
            self.head = Dense(self.lstm.n_out, n_latent, "linear", rng=rng, name=f"{name}/head")
        else:
            if self.lstm.n_out != n_latent:
                raise ValueError(
                    f"encoder state width {self.lstm.n_out} differs from latent size {n_latent}; enable the head"
                )
            self.head = None
        self.n_latent = n_latent

    def parameters(self) -> list[Tensor]:
        ps = self.reducer.parameters() if self.reducer else []
        ps += self.lstm.parameters()
        if self.head:
            ps += self.head.parameters()
        return ps

    def __call__(self, seq: Tensor) -> Tensor:
        """Map ``(batch, steps, n_in)`` sequences to ``(batch, n_latent)``."""
        x = self.reducer(seq) if self.reducer else seq
        last = self.lstm(x).last_hidden
        return self.head(last) if self.head else last


class SequenceDecoder:
    """Repeat-vector LSTM decoder.

    The latent vector is expanded (tanh dense) to the LSTM width; the expansion
    initialises ``(h, c)`` of the first layer and is fed as input at every step.
    A time-distributed dense head maps hidden states to the output space.
    """

    def __init__(self, n_latent: int, n_hidden: int, n_out: int, steps: int, depth: int = 1,
                 bidirectional: bool = False, out_hidden: Sequence[int] = (), rng=None, name: str = "dec"):
        self.steps = steps
        self.expand = Dense(n_latent, n_hidden, "tanh", rng=rng, name=f"{name}/expand")
        self.lstm = LSTMStack(n_hidden, n_hidden, depth, bidirectional, rng=rng, name=f"{name}/lstm")
        self.head = MLP([self.lstm.n_out, *out_hidden, n_out], "elu", "linear", rng=rng, name=f"{name}/out")

    def parameters(self) -> list[Tensor]:
        return self.expand.parameters() + self.lstm.parameters() + self.head.parameters()

    def __call__(self, latent: Tensor, steps: int | None = None) -> Tensor:
        """Map ``(batch, n_latent)`` to ``(batch, steps, n_out)``."""
        steps = self.steps if steps is None else steps
        e = self.expand(latent)
        out = self.lstm(ops.repeat_time(e, steps), init=(e, e))
        return self.head(out.sequence)


def named_parameters(blocks: dict[str, object]) -> dict[str, Tensor]:
    out: dict[str, Tensor] = {}
    for prefix, block in blocks.items():
        for p in block.parameters():
            key = f"{prefix}/{p.name}" if not p.name.startswith(prefix) else p.name
            if key in out:
                raise ValueError(f"duplicate parameter name {key}")
            out[key] = p
    return out


class SurrogateModel:
    """Parameter bookkeeping for models composed of named blocks."""

    def blocks(self) -> dict[str, object]:
        raise NotImplementedError

    def groups(self) -> dict[str, list[Tensor]]:
        return {k: b.parameters() for k, b in self.blocks().items()}

    def parameters(self) -> list[Tensor]:
        return [p for ps in self.groups().values() for p in ps]

    def named_parameters(self) -> dict[str, Tensor]:
        return named_parameters(self.blocks())

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self.named_parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"state lacks parameters: {sorted(missing)[:5]}")
        for k, p in params.items():
            v = np.asarray(state[k], dtype=np.float64)
            if v.shape != p.value.shape:
                raise DimensionError(f"parameter {k}: stored shape {v.shape}, model shape {p.value.shape}")
            p.value = v.copy()


def arch_dict(arch) -> dict:
    d = asdict(arch)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def arch_from_dict(cls, d: dict):
    d = dict(d)
    for k in ("regressor_hidden", "out_hidden", "phi_hidden", "merge_hidden"):
        if k in d and d[k] is not None:
            d[k] = tuple(d[k])
    return cls(**d)


def zero_parameters(model) -> None:
    for p in model.parameters():
        p.value = np.zeros_like(p.value)
