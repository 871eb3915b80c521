"""Error indicators, bootstrap intervals and the evaluation report."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn.tape import DimensionError


def _instances(U: np.ndarray, n_instances: int, n_timesteps: int) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    if U.shape[1] != n_instances * n_timesteps:
        raise DimensionError(f"expected {n_instances * n_timesteps} columns, got {U.shape[1]}")
    # (instances, rows, time)
    return U.reshape(U.shape[0], n_instances, n_timesteps).transpose(1, 0, 2)


def _check_pair(U, U_tilde):
    U = np.asarray(U, dtype=np.float64)
    U_tilde = np.asarray(U_tilde, dtype=np.float64)
    if U.shape != U_tilde.shape:
        raise DimensionError(f"shapes {U.shape} and {U_tilde.shape} differ")
    return U, U_tilde


def eps_rel(U: np.ndarray, U_tilde: np.ndarray, n_instances: int, n_timesteps: int) -> float:
    """Mean over instances of the space-time relative Frobenius error."""
    U, U_tilde = _check_pair(U, U_tilde)
    A = _instances(U, n_instances, n_timesteps)
    B = _instances(U_tilde, n_instances, n_timesteps)
    den = np.sqrt((A * A).sum(axis=(1, 2)))
    if np.any(den == 0):
        raise ZeroDivisionError("a test instance has an identically zero reference solution")
    num = np.sqrt(((A - B) ** 2).sum(axis=(1, 2)))
    return float(np.mean(num / den))


def eps_k(U: np.ndarray, U_tilde: np.ndarray, n_instances: int = 1, n_timesteps: int | None = None) -> np.ndarray:
    """Entry-wise error scaled by the instance's root-mean-square snapshot norm.

    Returns an array shaped like ``U``.
    """
    U, U_tilde = _check_pair(U, U_tilde)
    n_timesteps = U.shape[1] // n_instances if n_timesteps is None else n_timesteps
    A = _instances(U, n_instances, n_timesteps)
    B = _instances(U_tilde, n_instances, n_timesteps)
    den = np.sqrt((A * A).sum(axis=(1, 2)) / n_timesteps)
    if np.any(den == 0):
        raise ZeroDivisionError("a test instance has an identically zero reference solution")
    E = np.abs(A - B) / den[:, None, None]
    return E.transpose(1, 0, 2).reshape(U.shape)


def bootstrap_ci(samples, level: float = 0.95, n_resamples: int = 10_000, seed=0,
                 chunk: int = 256) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``samples``.

    Resample ``r`` draws ``len(samples)`` indices with ``Generator.integers``;
    draws are made in blocks of ``chunk`` resamples, which consumes the stream
    exactly as one draw per resample would.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if n_resamples < 1:
        raise ValueError("n_resamples must be positive")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])
    rng = np.random.default_rng(seed)
    n = x.size
    means = np.empty(n_resamples)
    for start in range(0, n_resamples, chunk):
        stop = min(start + chunk, n_resamples)
        idx = rng.integers(0, n, size=(stop - start, n))
        means[start:stop] = x[idx].mean(axis=1)
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [a, 1.0 - a])
    return float(lo), float(hi)


@dataclass
class EvaluationReport:
    eps_rel: float
    eps_k_mean: float
    eps_k_max: float
    ci_low: float
    ci_high: float
    t_nn: dict = field(default_factory=dict)
    t_rec: dict = field(default_factory=dict)
    queries_per_instance: list[int] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    t_nn_stepwise: dict = field(default_factory=dict)  # single-step reference querying

    def __post_init__(self):
        if self.eps_rel < 0:
            raise ValueError("eps_rel must be non-negative")

    def numerics(self) -> dict:
        """Everything except wall-clock timings (which vary run to run)."""
        d = asdict(self)
        for key in ("t_nn", "t_rec", "t_nn_stepwise"):
            d.pop(key)
        return d

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(**d)


def summarize_eps_k(E: np.ndarray, n_resamples: int, level: float, seed) -> dict:
    """Mean/max of the error field plus a bootstrap interval for the mean.

    The resampling unit is one snapshot column (instance, time): its mean
    entry error. All columns have the same length, so the mean of the column
    means equals the mean over entries.
    """
    col_means = E.mean(axis=0)
    lo, hi = bootstrap_ci(col_means, level, n_resamples, seed)
    return {"mean": float(E.mean()), "max": float(E.max()), "ci": (lo, hi)}
