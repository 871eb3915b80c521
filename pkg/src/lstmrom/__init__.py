"""LSTM-based reduced-order surrogates for parametrized dynamical systems.

A parameter-driven model predicts blocks of K reduced states from ``(t, mu)``;
a sequence-to-sequence model extrapolates beyond the training time window.
"""

__version__ = "0.1.0"
