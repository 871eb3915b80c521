"""Sliding-window training tensors built from reduced trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .nn.tape import DimensionError


@dataclass
class BaseTensor:
    """All length-K windows: ``T[i, j, k] = u_N(t_{alpha_i + k}; mu_{beta_i})_j``.

    ``L[i, :, k]`` holds the matching ``(t, mu_1, ..., mu_p)`` column.
    """

    T: np.ndarray
    L: np.ndarray
    n_instances: int
    n_timesteps: int

    @property
    def K(self) -> int:
        return self.T.shape[2]

    @property
    def n_sequences(self) -> int:
        return self.T.shape[0]

    def window_origin(self, i: int) -> tuple[int, int]:
        """``(alpha_i, beta_i)``: start time index and instance of sequence i."""
        per = self.n_timesteps - self.K
        alpha = i % per
        return alpha, (i - alpha) // per


def build_base_tensor(U_N: np.ndarray, n_instances: int, n_timesteps: int, K: int,
                      params: np.ndarray | None = None) -> BaseTensor:
    """Assemble windows from an ``N x (n_instances * n_timesteps)`` reduced matrix.

    Each instance contributes ``n_timesteps - K`` windows starting at time
    indices ``0 .. n_timesteps - K - 1``.
    """
    U_N = np.asarray(U_N, dtype=np.float64)
    if K >= n_timesteps:
        raise DimensionError(f"sequence length K = {K} must be smaller than N_t = {n_timesteps}")
    if K < 1:
        raise DimensionError("K must be positive")
    if U_N.shape[1] != n_instances * n_timesteps:
        raise DimensionError("column count must equal n_instances * n_timesteps")
    if params is None:
        params = np.zeros((1, U_N.shape[1]))
    per = n_timesteps - K
    N = U_N.shape[0]
    traj = U_N.reshape(N, n_instances, n_timesteps)
    ptraj = params.reshape(params.shape[0], n_instances, n_timesteps)
    starts = np.arange(per)[:, None] + np.arange(K)[None, :]  # (per, K)
    # (N, inst, per, K) -> (inst, per, N, K)
    T = traj[:, :, starts].transpose(1, 2, 0, 3).reshape(n_instances * per, N, K)
    L = ptraj[:, :, starts].transpose(1, 2, 0, 3).reshape(n_instances * per, params.shape[0], K)
    return BaseTensor(np.ascontiguousarray(T), np.ascontiguousarray(L), n_instances, n_timesteps)


@dataclass
class PrevHorizonPair:
    P: np.ndarray
    H: np.ndarray


def split_prev_horizon(T: np.ndarray, p: int, k: int) -> PrevHorizonPair:
    """Split windows into the first ``p`` steps and the following ``k``."""
    K = T.shape[2]
    if p < 1 or k < 1 or p + k != K:
        raise DimensionError(f"need p + k = K with p, k >= 1 (got p={p}, k={k}, K={K})")
    return PrevHorizonPair(T[:, :, :p].copy(), T[:, :, p:].copy())


@dataclass
class SplitIndices:
    train_idxs: np.ndarray
    val_idxs: np.ndarray
    alpha: float


def shuffle_split(n_sequences: int, alpha: float, seed) -> SplitIndices:
    """Random disjoint train/validation split with ``round(alpha * n)`` validation items."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("validation fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n_sequences)
    n_val = int(round(alpha * n_sequences))
    return SplitIndices(np.sort(perm[n_val:]), np.sort(perm[:n_val]), alpha)


def iterate_minibatches(T: np.ndarray, L: np.ndarray, indices: np.ndarray, dim_batch: int,
                        seed) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """One epoch: a shuffled partition of ``indices`` into batches of ``dim_batch``.

    ``seed`` may be anything accepted by ``numpy.random.default_rng``, including
    a live ``Generator`` that is advanced in place.
    """
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ValueError("no sequences to iterate over")
    if dim_batch < 1:
        raise ValueError("dim_batch must be at least 1")
    order = np.random.default_rng(seed).permutation(indices)
    for start in range(0, order.size, dim_batch):
        sel = order[start : start + dim_batch]
        yield T[sel], L[sel]


def reassemble_windows(T: np.ndarray, n_instances: int, n_timesteps: int) -> np.ndarray:
    """Rebuild the covered trajectory columns from overlapping windows.

    Time index ``j`` of an instance is taken from the first window covering it;
    only indices ``0 .. n_timesteps - 2`` are covered.
    """
    per, K = n_timesteps - T.shape[2], T.shape[2]
    N = T.shape[1]
    out = np.empty((N, n_instances, per + K - 1))
    for inst in range(n_instances):
        w = T[inst * per : (inst + 1) * per]
        out[:, inst, :per] = w[:, :, 0].T
        out[:, inst, per:] = w[-1, :, 1:]
    return out.reshape(N, -1)
