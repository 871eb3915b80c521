"""Parameter-driven surrogate: LSTM sequence autoencoder plus a latent regressor.

Training fits an encoder, a feedforward regressor ``(t_i, mu) -> u_n`` and a
decoder ``u_n -> K`` reduced states. At prediction time only the regressor and
decoder are evaluated, one query per block of K time steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .blocks import InputNormalizer, SequenceDecoder, SequenceEncoder, SurrogateModel
from .dataset import BaseTensor, shuffle_split
from .nn import MLP, DimensionError, Tensor, ops
from .pod import PODBasis, ScalingRecord, invert_scaling, lift
from .timing import TimingProbe
from .training import History, TrainConfig, fit, seed_sequence


@dataclass
class MuArch:
    """Architecture of the parameter-driven model.

    ``enc_hidden`` / ``dec_hidden`` default to ``n``. When the encoder state
    width differs from ``n`` a dense latent head is required.
    """

    N: int
    n: int
    K: int
    n_mu: int
    enc_hidden: int | None = None
    enc_depth: int = 1
    dec_hidden: int | None = None
    dec_depth: int = 1
    reducer: int | None = None
    latent_head: bool = False
    bidirectional: bool = False
    regressor_hidden: tuple[int, ...] = (64, 64, 64)
    out_hidden: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("N", "n", "K", "n_mu"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        self.regressor_hidden = tuple(self.regressor_hidden)
        self.out_hidden = tuple(self.out_hidden)


class MuModel(SurrogateModel):
    def __init__(self, arch: MuArch, normalizer: InputNormalizer | None = None, seed=0):
        self.arch = arch
        rng = np.random.default_rng(seed)
        a = arch
        self.encoder = SequenceEncoder(
            a.N, a.enc_hidden or a.n, a.n, a.enc_depth, a.bidirectional, a.reducer, a.latent_head, rng=rng, name="enc"
        )
        self.regressor = MLP([a.n_mu + 1, *a.regressor_hidden, a.n], "elu", "linear", rng=rng, name="ffnn")
        self.decoder = SequenceDecoder(
            a.n, a.dec_hidden or a.n, a.N, a.K, a.dec_depth, a.bidirectional, a.out_hidden, rng=rng, name="dec"
        )
        if normalizer is None:
            normalizer = InputNormalizer(np.zeros(a.n_mu + 1), np.ones(a.n_mu + 1))
        self.normalizer = normalizer

    def blocks(self) -> dict[str, object]:
        return {"enc": self.encoder, "ffnn": self.regressor, "dec": self.decoder}


def build_regressor_normalizer(L: np.ndarray, t_max: float | None = None) -> InputNormalizer:
    """Time divided by ``t_max`` (default: the training horizon); each parameter mapped by its training range."""
    rows = np.asarray(L, dtype=np.float64)
    lo = rows.min(axis=1)
    hi = rows.max(axis=1)
    lo[0] = 0.0
    hi[0] = rows[0].max() if t_max is None else t_max
    return InputNormalizer(lo, hi)


# ------------------------------------------------------------------ forward


def _batched(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[None], True
    return x, False


def _encode_tensor(model: MuModel, seq: Tensor) -> Tensor:
    return model.encoder(seq)


def _regress_tensor(model: MuModel, inputs: np.ndarray) -> Tensor:
    return model.regressor(Tensor(model.normalizer(inputs)))


def mu_encode(model: MuModel, sequence) -> np.ndarray:
    """Latent code of a ``(K, N)`` sequence (or a ``(B, K, N)`` batch)."""
    x, squeeze = _batched(sequence, 3)
    a = model.arch
    if x.shape[1:] != (a.K, a.N):
        raise DimensionError(f"expected sequences of shape ({a.K}, {a.N}), got {x.shape[1:]}")
    out = _encode_tensor(model, Tensor(x)).value
    return out[0] if squeeze else out


def mu_regress(model: MuModel, t, mu) -> np.ndarray:
    """Regressor output for raw (un-normalized) ``t_i`` and ``mu``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    mu = np.asarray(mu, dtype=np.float64)
    squeeze = mu.ndim <= 1 and t.size == 1
    mu = mu.reshape(t.size, -1)
    if mu.shape[1] != model.arch.n_mu:
        raise DimensionError(f"expected {model.arch.n_mu} parameters, got {mu.shape[1]}")
    out = _regress_tensor(model, np.column_stack([t, mu])).value
    return out[0] if squeeze else out


def mu_decode(model: MuModel, latent, steps: int | None = None) -> np.ndarray:
    """Decode a latent vector into ``(K, N)`` reduced states (batched: ``(B, K, N)``)."""
    z, squeeze = _batched(latent, 2)
    if z.shape[1] != model.arch.n:
        raise DimensionError(f"expected latent of length {model.arch.n}, got {z.shape[1]}")
    out = model.decoder(Tensor(z), steps).value
    return out[0] if squeeze else out


# --------------------------------------------------------------------- loss


@dataclass
class MuLossBreakdown:
    L_rec: float
    L_int: float
    omega_h: float
    total: float
    graph: Tensor | None = field(default=None, repr=False, compare=False)


def mu_loss(model: MuModel, T_batch: np.ndarray, L_batch: np.ndarray, omega_h: float) -> MuLossBreakdown:
    """Weighted reconstruction and latent-matching loss averaged over the batch.

    ``L_rec`` compares the decoded regressor output with the target sequence;
    ``L_int`` compares the encoder code with the regressor output. Both are
    per-sequence sums of squares. ``graph`` holds the differentiable total.
    """
    if not 0.0 <= omega_h <= 1.0:
        raise ValueError("omega_h must lie in [0, 1]")
    T_batch = np.asarray(T_batch, dtype=np.float64)
    L_batch = np.asarray(L_batch, dtype=np.float64)
    a = model.arch
    if T_batch.ndim != 3 or T_batch.shape[1:] != (a.N, a.K):
        raise DimensionError(f"T_batch must be (B, {a.N}, {a.K}), got {T_batch.shape}")
    if L_batch.ndim != 3 or L_batch.shape[0] != T_batch.shape[0] or L_batch.shape[1] != a.n_mu + 1:
        raise DimensionError(f"L_batch must be (B, {a.n_mu + 1}, K), got {L_batch.shape}")
    target = T_batch.transpose(0, 2, 1)
    u_tilde = _encode_tensor(model, Tensor(target))
    u_n = _regress_tensor(model, L_batch[:, :, 0])
    recon = model.decoder(u_n)
    rec = ops.mean(ops.sq_dist(recon, Tensor(target)))
    hid = ops.mean(ops.sq_dist(u_tilde, u_n))
    total = ops.weighted_sum([rec, hid], [omega_h / 2.0, (1.0 - omega_h) / 2.0])
    return MuLossBreakdown(float(rec.value), float(hid.value), omega_h, float(total.value), total)


# ----------------------------------------------------------------- training


@dataclass
class MuTrainResult:
    model: MuModel
    history: History
    split: object


def train_mu(model: MuModel, data: BaseTensor, omega_h: float, cfg: TrainConfig, seed=0) -> MuTrainResult:
    """Minibatch Adam on the windows of ``data``; returns the best-validation weights.

    ``seed`` drives the train/validation split and the per-epoch shuffling.
    """
    ss = seed_sequence(seed)
    split_seed, shuffle_seed = ss.spawn(2)
    split = shuffle_split(data.n_sequences, cfg.alpha, split_seed)
    T, L = data.T, data.L

    def batch_loss(idx):
        return mu_loss(model, T[idx], L[idx], omega_h).graph

    history = fit(model.parameters(), batch_loss, split.train_idxs, split.val_idxs, cfg,
                  np.random.default_rng(shuffle_seed), stage="train-mu")
    return MuTrainResult(model, history, split)


# --------------------------------------------------------------- prediction


@dataclass
class MuPrediction:
    reduced: np.ndarray  # network space (scaled), N x (N_test * N_t)
    full: np.ndarray  # lifted and de-scaled, N_h x (N_test * N_t)
    queries: list[int]


def n_windows(n_timesteps: int, K: int) -> int:
    return -(-n_timesteps // K)


def predict_mu(model: MuModel, basis: PODBasis, scaling: ScalingRecord, M_test: np.ndarray, n_timesteps: int,
               probe: TimingProbe | None = None) -> MuPrediction:
    """Sequence prediction on every test instance.

    Instance ``i`` uses the columns ``i*N_t + j*K`` of ``M_test`` as regressor
    inputs, so ``ceil(N_t / K)`` regress-then-decode queries are issued; a
    final partial window is decoded in full and truncated.
    """
    M_test = np.asarray(M_test, dtype=np.float64)
    a = model.arch
    if M_test.shape[0] != a.n_mu + 1:
        raise DimensionError(f"M_test needs {a.n_mu + 1} rows, got {M_test.shape[0]}")
    if M_test.shape[1] % n_timesteps:
        raise DimensionError("M_test width is not a multiple of N_t")
    if basis.n_reduced != a.N:
        raise DimensionError(f"basis has {basis.n_reduced} modes, model expects {a.N}")
    n_inst = M_test.shape[1] // n_timesteps
    K = a.K
    n_win = n_windows(n_timesteps, K)
    reduced = np.empty((a.N, n_inst * n_timesteps))
    full = np.empty((basis.n_full, n_inst * n_timesteps))
    queries = []
    for inst in range(n_inst):
        base = inst * n_timesteps
        t0 = time.perf_counter()
        blocks = []
        for j in range(n_win):
            col = M_test[:, base + j * K]
            latent = mu_regress(model, col[0], col[1:])
            blocks.append(mu_decode(model, latent))
        t1 = time.perf_counter()
        seq = np.concatenate(blocks, axis=0)[:n_timesteps].T
        reduced[:, base : base + n_timesteps] = seq
        full[:, base : base + n_timesteps] = lift(basis, invert_scaling(scaling, seq))
        t2 = time.perf_counter()
        queries.append(n_win)
        if probe is not None:
            probe.record(t1 - t0, t2 - t0, n_win)
    return MuPrediction(reduced, full, queries)


def predict_mu_stepwise(model: MuModel, M_test: np.ndarray, n_timesteps: int,
                        probe: TimingProbe | None = None) -> np.ndarray:
    """Reference single-step querying: one regress and one 1-step decode per time step.

    Returns reduced (scaled) predictions; only network time is recorded.
    """
    M_test = np.asarray(M_test, dtype=np.float64)
    n_inst = M_test.shape[1] // n_timesteps
    out = np.empty((model.arch.N, M_test.shape[1]))
    for inst in range(n_inst):
        base = inst * n_timesteps
        t0 = time.perf_counter()
        for j in range(n_timesteps):
            col = M_test[:, base + j]
            out[:, base + j] = mu_decode(model, mu_regress(model, col[0], col[1:]), steps=1)[0]
        t1 = time.perf_counter()
        if probe is not None:
            probe.record(t1 - t0, t1 - t0, n_timesteps)
    return out


__all__ = [
    "MuArch",
    "MuLossBreakdown",
    "MuModel",
    "MuPrediction",
    "build_regressor_normalizer",
    "mu_decode",
    "mu_encode",
    "mu_loss",
    "mu_regress",
    "predict_mu",
    "predict_mu_stepwise",
    "train_mu",
]
