"""Minimal float64 neural-network substrate with exact reverse-mode gradients."""

from . import ops
from .layers import (
    Dense,
    LSTMCell,
    LSTMStack,
    LSTMState,
    MLP,
    dense_forward,
    lstm_cell_step,
    lstm_sequence_forward,
)
from .optim import Adam, adam_update, clip_by_global_norm
from .tape import (
    DimensionError,
    GradientTape,
    NonFiniteError,
    Tensor,
    backward,
    constant,
    parameter,
)

__all__ = [
    "Adam",
    "Dense",
    "DimensionError",
    "GradientTape",
    "LSTMCell",
    "LSTMStack",
    "LSTMState",
    "MLP",
    "NonFiniteError",
    "Tensor",
    "adam_update",
    "backward",
    "clip_by_global_norm",
    "constant",
    "dense_forward",
    "lstm_cell_step",
    "lstm_sequence_forward",
    "ops",
    "parameter",
]
