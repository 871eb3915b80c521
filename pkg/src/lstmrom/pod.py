"""Randomized POD compression and MinMax scaling of reduced coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.tape import DimensionError
from .seeding import seed_sequence


@dataclass
class SnapshotMatrix:
    """Full-order states stored one column per (instance, time) pair.

    Rows are ``n_channels`` blocks of ``n_dofs`` entries each; columns are
    ordered instance-major, then time.
    """

    data: np.ndarray
    n_dofs: int
    n_channels: int
    n_instances: int
    n_timesteps: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        rows, cols = self.data.shape
        if rows != self.n_dofs * self.n_channels:
            raise DimensionError(f"expected {self.n_dofs * self.n_channels} rows, got {rows}")
        if cols != self.n_instances * self.n_timesteps:
            raise DimensionError(f"expected {self.n_instances * self.n_timesteps} columns, got {cols}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("snapshot matrix contains non-finite entries")

    @classmethod
    def from_instances(cls, blocks: list[np.ndarray], n_channels: int = 1) -> "SnapshotMatrix":
        """Stack per-instance ``(rows, N_t)`` blocks side by side."""
        if not blocks:
            raise ValueError("no instances given")
        n_t = blocks[0].shape[1]
        if any(b.shape != blocks[0].shape for b in blocks):
            raise DimensionError("all instances need the same shape")
        rows = blocks[0].shape[0]
        return cls(np.hstack(blocks), rows // n_channels, n_channels, len(blocks), n_t)

    def instance(self, i: int) -> np.ndarray:
        n_t = self.n_timesteps
        return self.data[:, i * n_t : (i + 1) * n_t]

    def time_window(self, start: int, stop: int) -> "SnapshotMatrix":
        """Keep time indices ``start:stop`` of every instance."""
        cols = np.concatenate(
            [np.arange(i * self.n_timesteps + start, i * self.n_timesteps + stop) for i in range(self.n_instances)]
        )
        return SnapshotMatrix(self.data[:, cols], self.n_dofs, self.n_channels, self.n_instances, stop - start)


@dataclass
class PODBasis:
    """Orthonormal reduced basis, one ``N``-column block per channel."""

    V: np.ndarray
    singular_values: np.ndarray
    n_modes: int
    n_channels: int = 1

    @classmethod
    def identity(cls, n: int) -> "PODBasis":
        """Pass-through basis for systems small enough to skip compression."""
        return cls(np.eye(n), np.ones(n), n, 1)

    @property
    def n_full(self) -> int:
        return self.V.shape[0]

    @property
    def n_reduced(self) -> int:
        return self.V.shape[1]


def randomized_range(A: np.ndarray, rank: int, oversampling: int, power_iters: int, rng) -> np.ndarray:
    """Orthonormal basis approximately spanning the dominant column space of A."""
    m, n = A.shape
    ell = min(rank + oversampling, m, n)
    Q, _ = np.linalg.qr(A @ rng.standard_normal((n, ell)))
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    return Q


def randomized_svd(A: np.ndarray, rank: int, oversampling: int = 10, power_iters: int = 2, seed=0):
    """Truncated SVD through a Gaussian range finder with power iterations.

    Returns ``U[:, :rank]``, ``s[:rank]``, ``Vt[:rank]``.
    """
    rng = np.random.default_rng(seed)
    Q = randomized_range(A, rank, oversampling, power_iters, rng)
    Ub, s, Vt = np.linalg.svd(Q.T @ A, full_matrices=False)
    return (Q @ Ub)[:, :rank], s[:rank], Vt[:rank]


def compute_rpod_basis(S: SnapshotMatrix, N: int, oversampling: int = 10, power_iters: int = 2, seed=0) -> PODBasis:
    """Randomized POD basis with ``N`` modes for each channel block of ``S``."""
    rows, cols = S.n_dofs, S.data.shape[1]
    if N < 1 or N > min(rows, cols):
        raise DimensionError(f"N = {N} exceeds the rank bound min({rows}, {cols})")
    ss = seed_sequence(seed).spawn(S.n_channels)
    V = np.zeros((rows * S.n_channels, N * S.n_channels))
    sv = []
    for ch in range(S.n_channels):
        block = S.data[ch * rows : (ch + 1) * rows]
        U, s, _ = randomized_svd(block, N, oversampling, power_iters, seed=ss[ch])
        V[ch * rows : (ch + 1) * rows, ch * N : (ch + 1) * N] = U
        sv.append(s)
    return PODBasis(V, np.concatenate(sv), N, S.n_channels)


def project(basis: PODBasis, u_h: np.ndarray) -> np.ndarray:
    """Reduced coordinates ``V^T u_h`` of a vector or column matrix."""
    u_h = np.asarray(u_h, dtype=np.float64)
    if u_h.shape[0] != basis.n_full:
        raise DimensionError(f"expected leading dimension {basis.n_full}, got {u_h.shape[0]}")
    return basis.V.T @ u_h


def lift(basis: PODBasis, u_N: np.ndarray) -> np.ndarray:
    """Full-order reconstruction ``V u_N``."""
    u_N = np.asarray(u_N, dtype=np.float64)
    if u_N.shape[0] != basis.n_reduced:
        raise DimensionError(f"expected leading dimension {basis.n_reduced}, got {u_N.shape[0]}")
    return basis.V @ u_N


@dataclass
class ScalingRecord:
    """Per-coordinate MinMax statistics, frozen after fitting on training data."""

    minimum: np.ndarray
    maximum: np.ndarray
    enabled: bool = True

    @classmethod
    def disabled(cls, n: int) -> "ScalingRecord":
        return cls(np.zeros(n), np.ones(n), enabled=False)

    @property
    def span(self) -> np.ndarray:
        return self.maximum - self.minimum


def fit_scaling(U_N: np.ndarray, enabled: bool = True) -> ScalingRecord:
    U_N = np.asarray(U_N, dtype=np.float64)
    if not enabled:
        return ScalingRecord.disabled(U_N.shape[0])
    return ScalingRecord(U_N.min(axis=1), U_N.max(axis=1), True)


def _column(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape((-1,) + (1,) * (ndim - 1))


def apply_scaling(rec: ScalingRecord, x: np.ndarray) -> np.ndarray:
    """Map reduced coordinates (leading axis) into [0, 1]; constant ones map to 0."""
    x = np.asarray(x, dtype=np.float64)
    if not rec.enabled:
        return x.copy()
    lo, span = _column(rec.minimum, x.ndim), _column(rec.span, x.ndim)
    return np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)


def invert_scaling(rec: ScalingRecord, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not rec.enabled:
        return x.copy()
    return x * _column(rec.span, x.ndim) + _column(rec.minimum, x.ndim)
