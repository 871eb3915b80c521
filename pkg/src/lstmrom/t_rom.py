"""Sequence-to-sequence forecaster: p past reduced states plus mu to k future states.

Extrapolation rolls the forecaster forward autoregressively, feeding every
k-step forecast back as encoder input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .blocks import InputNormalizer, SequenceDecoder, SequenceEncoder, SurrogateModel
from .dataset import BaseTensor, shuffle_split, split_prev_horizon
from .nn import MLP, DimensionError, Tensor, ops
from .pod import PODBasis, ScalingRecord, invert_scaling, lift
from .training import History, TrainConfig, fit, seed_sequence


@dataclass
class TArch:
    N: int
    n_t: int
    p: int
    k: int
    n_mu: int
    enc_hidden: int | None = None
    enc_depth: int = 1
    dec_hidden: int | None = None
    dec_depth: int = 1
    reducer: int | None = None
    bidirectional: bool = False
    phi_hidden: tuple[int, ...] = (32, 32)
    merge_hidden: tuple[int, ...] = (64,)
    out_hidden: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("N", "n_t", "p", "k", "n_mu"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        self.phi_hidden = tuple(self.phi_hidden)
        self.merge_hidden = tuple(self.merge_hidden)
        self.out_hidden = tuple(self.out_hidden)
        if not self.phi_hidden:
            raise ValueError("the parameter expansion needs at least one layer")

    @property
    def K(self) -> int:
        return self.p + self.k


class TModel(SurrogateModel):
    """Encoder over p steps, parameter expansion phi, merge phi' and k-step decoder.

    The merge network sees ``h_n`` followed by ``phi(mu)``.
    """

    def __init__(self, arch: TArch, normalizer: InputNormalizer | None = None, seed=0):
        self.arch = a = arch
        rng = np.random.default_rng(seed)
        enc_width = a.enc_hidden or a.n_t
        self.encoder = SequenceEncoder(
            a.N, enc_width, a.n_t, a.enc_depth, a.bidirectional, a.reducer,
            head=(enc_width * (2 if a.bidirectional else 1) != a.n_t), rng=rng, name="enc",
        )
        self.phi = MLP([a.n_mu, *a.phi_hidden], "elu", "elu", rng=rng, name="phi")
        self.merge = MLP([a.n_t + a.phi_hidden[-1], *a.merge_hidden, a.n_t], "elu", "linear", rng=rng, name="merge")
        self.decoder = SequenceDecoder(
            a.n_t, a.dec_hidden or a.n_t, a.N, a.k, a.dec_depth, a.bidirectional, a.out_hidden, rng=rng, name="dec"
        )
        if normalizer is None:
            normalizer = InputNormalizer(np.zeros(a.n_mu), np.ones(a.n_mu))
        self.normalizer = normalizer

    def blocks(self) -> dict[str, object]:
        return {"enc": self.encoder, "phi": self.phi, "merge": self.merge, "dec": self.decoder}


def _forecast_tensor(model: TModel, past: np.ndarray, mu: np.ndarray) -> Tensor:
    """``past`` is ``(B, p, N)``, ``mu`` raw ``(B, n_mu)``; returns ``(B, k, N)``."""
    h_n = model.encoder(Tensor(past))
    phi = model.phi(Tensor(model.normalizer(mu)))
    h_prime = model.merge(ops.concat([h_n, phi], axis=-1))
    return model.decoder(h_prime)


def t_forward(model: TModel, past, mu) -> np.ndarray:
    """Forecast ``(k, N)`` from a ``(p, N)`` window (batched: ``(B, p, N)`` and ``(B, n_mu)``)."""
    a = model.arch
    x = np.asarray(past, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (a.p, a.N):
        raise DimensionError(f"expected windows of shape ({a.p}, {a.N}), got {x.shape[-2:]}")
    mu = np.asarray(mu, dtype=np.float64).reshape(x.shape[0], -1)
    if mu.shape[1] != a.n_mu:
        raise DimensionError(f"expected {a.n_mu} parameters, got {mu.shape[1]}")
    out = _forecast_tensor(model, x, mu).value
    return out[0] if squeeze else out


def t_loss(model: TModel, P_batch: np.ndarray, H_batch: np.ndarray, mu_batch: np.ndarray) -> Tensor:
    """Mean squared forecast error, averaged over entries and sequences.

    ``P_batch`` is ``(B, N, p)``, ``H_batch`` is ``(B, N, k)``, as stored in the
    previous/horizon tensors.
    """
    a = model.arch
    P_batch, H_batch = np.asarray(P_batch, dtype=np.float64), np.asarray(H_batch, dtype=np.float64)
    if P_batch.ndim != 3 or P_batch.shape[1:] != (a.N, a.p):
        raise DimensionError(f"P_batch must be (B, {a.N}, {a.p}), got {P_batch.shape}")
    if H_batch.shape != (P_batch.shape[0], a.N, a.k):
        raise DimensionError(f"H_batch must be ({P_batch.shape[0]}, {a.N}, {a.k}), got {H_batch.shape}")
    mu_batch = np.asarray(mu_batch, dtype=np.float64).reshape(P_batch.shape[0], -1)
    forecast = _forecast_tensor(model, P_batch.transpose(0, 2, 1), mu_batch)
    # per-sequence sum of squares / (N k), then the batch mean
    sq = ops.sq_dist(forecast, Tensor(H_batch.transpose(0, 2, 1)))
    return ops.weighted_sum([ops.mean(sq)], [1.0 / (a.N * a.k)])


@dataclass
class TTrainResult:
    model: TModel
    history: History
    split: object


def train_t(model: TModel, data: BaseTensor, cfg: TrainConfig, seed=0) -> TTrainResult:
    """Window-to-window regression on the previous/horizon split of ``data``."""
    a = model.arch
    if data.K != a.K:
        raise DimensionError(f"base tensor has K = {data.K}, model needs p + k = {a.K}")
    pair = split_prev_horizon(data.T, a.p, a.k)
    mus = data.L[:, 1:, 0]
    ss = seed_sequence(seed)
    split_seed, shuffle_seed = ss.spawn(2)
    split = shuffle_split(data.n_sequences, cfg.alpha, split_seed)

    def batch_loss(idx):
        return t_loss(model, pair.P[idx], pair.H[idx], mus[idx])

    history = fit(model.parameters(), batch_loss, split.train_idxs, split.val_idxs, cfg,
                  np.random.default_rng(shuffle_seed), stage="train-t")
    return TTrainResult(model, history, split)


# ------------------------------------------------------------------ rollout


class RolloutBuffer:
    """Working array for autoregressive extrapolation of several instances.

    Holds ``p`` seed steps followed by ``n_ext * k`` forecast slots. The
    cursor ``c`` (0-based) marks the start of the current encoder window
    ``E[:, :, c : c + p]``; each push writes the next ``k`` slots and moves the
    cursor by ``k``.
    """

    def __init__(self, seed_history: np.ndarray, n_ext: int, k: int):
        seed_history = np.asarray(seed_history, dtype=np.float64)
        if seed_history.ndim != 3:
            raise DimensionError("seed history must be (N_test, N, p)")
        if n_ext < 0 or k < 1:
            raise ValueError("need n_ext >= 0 and k >= 1")
        n_test, N, p = seed_history.shape
        self.p, self.k, self.n_ext = p, k, n_ext
        self.E = np.zeros((n_test, N, p + n_ext * k))
        self.E[:, :, :p] = seed_history
        self.cursor = 0
        self.pushes = 0

    @property
    def length(self) -> int:
        return self.E.shape[2]

    def window(self) -> np.ndarray:
        return self.E[:, :, self.cursor : self.cursor + self.p].copy()

    def push(self, forecast: np.ndarray) -> None:
        if self.pushes >= self.n_ext:
            raise IndexError("rollout buffer is full")
        if forecast.shape != (self.E.shape[0], self.E.shape[1], self.k):
            raise DimensionError(f"forecast must be {(self.E.shape[0], self.E.shape[1], self.k)}, got {forecast.shape}")
        start = self.cursor + self.p
        self.E[:, :, start : start + self.k] = forecast
        self.cursor += self.k
        self.pushes += 1

    def extrapolated(self) -> np.ndarray:
        return self.E[:, :, self.p :].copy()


@dataclass
class RolloutResult:
    reduced: np.ndarray  # N x (N_test * N_ext * k), network space
    full: np.ndarray | None  # lifted and de-scaled when a basis was given
    n_ext: int
    k: int


WindowHook = Callable[[int, np.ndarray], None]


def rollout(model: TModel, S_N: np.ndarray, mus: np.ndarray, n_timesteps: int, t_ext: int, n_ext: int,
            basis: PODBasis | None = None, scaling: ScalingRecord | None = None,
            on_window: WindowHook | None = None) -> RolloutResult:
    """Extrapolate ``n_ext * k`` steps past column ``t_ext`` of every instance.

    ``S_N`` holds network-space reduced states, ``N x (N_test * n_timesteps)``;
    the ``p`` columns preceding ``t_ext`` seed the rollout. ``on_window`` is
    called with the iteration number and the ``(N_test, N, p)`` encoder input.
    """
    a = model.arch
    S_N = np.asarray(S_N, dtype=np.float64)
    mus = np.atleast_2d(np.asarray(mus, dtype=np.float64))
    if S_N.shape[0] != a.N or S_N.shape[1] % n_timesteps:
        raise DimensionError("S_N must be N x (N_test * n_timesteps)")
    n_test = S_N.shape[1] // n_timesteps
    if mus.shape != (n_test, a.n_mu):
        raise DimensionError(f"mus must be ({n_test}, {a.n_mu}), got {mus.shape}")
    if t_ext < a.p:
        raise DimensionError(f"need at least p = {a.p} steps of history, t_ext = {t_ext}")
    if t_ext > n_timesteps:
        raise DimensionError(f"t_ext = {t_ext} exceeds the available {n_timesteps} steps")
    traj = S_N.reshape(a.N, n_test, n_timesteps).transpose(1, 0, 2)
    buf = RolloutBuffer(traj[:, :, t_ext - a.p : t_ext], n_ext, a.k)
    for it in range(n_ext):
        window = buf.window()
        if on_window is not None:
            on_window(it, window)
        forecast = t_forward(model, window.transpose(0, 2, 1), mus)  # (N_test, k, N)
        buf.push(forecast.transpose(0, 2, 1))
    ext = buf.extrapolated()  # (N_test, N, n_ext*k)
    reduced = ext.transpose(1, 0, 2).reshape(a.N, n_test * n_ext * a.k)
    full = None
    if basis is not None:
        rec = scaling if scaling is not None else ScalingRecord.disabled(a.N)
        full = lift(basis, invert_scaling(rec, reduced))
    return RolloutResult(reduced, full, n_ext, a.k)
