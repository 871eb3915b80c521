"""Desk-scale full-order data generators for the two reproducible test cases.

* Three-species Lotka-Volterra competition model, integrated with an adaptive
  Dormand-Prince (4,5) scheme and sampled on a uniform grid.
* Unsteady advection-diffusion-reaction on the unit square with zero-flux
  boundaries: cell-centred second-order finite differences in space, BDF2 in
  time with an implicit Euler first step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from .pod import SnapshotMatrix


class SolverError(RuntimeError):
    pass


@dataclass
class FOMSolution:
    """Snapshots plus the aligned parameter matrix with rows (t, mu_1, ..., mu_p)."""

    snapshots: SnapshotMatrix
    params: np.ndarray

    def __post_init__(self):
        if self.params.shape[1] != self.snapshots.data.shape[1]:
            raise ValueError("parameter matrix and snapshots are not column aligned")

    @property
    def n_mu(self) -> int:
        return self.params.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.params[0, : self.snapshots.n_timesteps]

    def mus(self) -> np.ndarray:
        """One parameter row per instance, shape ``(n_instances, n_mu)``."""
        n_t = self.snapshots.n_timesteps
        return self.params[1:, ::n_t].T.copy()

    def time_window(self, start: int, stop: int) -> "FOMSolution":
        S = self.snapshots.time_window(start, stop)
        n_t = self.snapshots.n_timesteps
        cols = np.concatenate([np.arange(i * n_t + start, i * n_t + stop) for i in range(S.n_instances)])
        return FOMSolution(S, self.params[:, cols])


def concatenate_solutions(sols: Sequence[FOMSolution]) -> FOMSolution:
    first = sols[0].snapshots
    data = np.hstack([s.snapshots.data for s in sols])
    n_inst = sum(s.snapshots.n_instances for s in sols)
    S = SnapshotMatrix(data, first.n_dofs, first.n_channels, n_inst, first.n_timesteps)
    return FOMSolution(S, np.hstack([s.params for s in sols]))


def _param_matrix(times: np.ndarray, mu: Sequence[float]) -> np.ndarray:
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    return np.vstack([times, np.repeat(mu[:, None], len(times), axis=1)])


# ---------------------------------------------------------------- parameters


def equispaced(lo: float, hi: float, step: float) -> list[float]:
    """Values ``lo, lo + step, ..., hi`` (inclusive), rounded against drift."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    if hi == lo:
        return [float(lo)]
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(round((hi - lo) / step))
    return [round(lo + j * step, 12) for j in range(n + 1)]


def midpoints(values: Sequence[float]) -> list[float]:
    v = list(values)
    return [round(0.5 * (a + b), 12) for a, b in zip(v[:-1], v[1:])]


def sample_parameter_grid(axes: Iterable[Sequence[float]]) -> list[tuple[float, ...]]:
    """Cartesian product of per-parameter value lists, first axis slowest."""
    axes = [list(a) for a in axes]
    if not axes or any(len(a) == 0 for a in axes):
        raise ValueError("every parameter axis needs at least one value")
    return [tuple(float(x) for x in p) for p in itertools.product(*axes)]


# ----------------------------------------------------------- Lotka-Volterra


@dataclass
class LVConfig:
    dt: float = 0.1
    n_timesteps: int = 100
    u0: tuple[float, float, float] = (0.5, 0.5, 0.5)
    rtol: float = 1e-9
    atol: float = 1e-9
    mu_train: list[float] = field(default_factory=lambda: equispaced(1.0, 3.0, 0.1))

    @property
    def mu_test(self) -> list[float]:
        return midpoints(self.mu_train)


def lotka_volterra_rhs(t: float, u: np.ndarray, mu: float) -> np.ndarray:
    u1, u2, u3 = u
    return np.array(
        [
            u1 * (mu - 0.1 * u1 - 0.5 * u2 - 0.5 * u3),
            u2 * (-mu + 0.5 * u1 - 0.3 * u3),
            u3 * (-mu + 0.2 * u1 + 0.5 * u2),
        ]
    )


def solve_lotka_volterra(cfg: LVConfig, mu: float, n_timesteps: int | None = None) -> FOMSolution:
    if not 1.0 <= mu <= 3.0:
        raise ValueError(f"mu = {mu} outside [1, 3]")
    n_t = cfg.n_timesteps if n_timesteps is None else n_timesteps
    times = cfg.dt * np.arange(n_t)
    sol = solve_ivp(
        lotka_volterra_rhs,
        (0.0, times[-1]),
        np.asarray(cfg.u0, dtype=np.float64),
        method="RK45",
        t_eval=times,
        rtol=cfg.rtol,
        atol=cfg.atol,
        args=(mu,),
    )
    if not sol.success or sol.y.shape[1] != n_t:
        raise SolverError(f"Lotka-Volterra integration failed for mu = {mu}: {sol.message}")
    S = SnapshotMatrix(sol.y, 3, 1, 1, n_t)
    return FOMSolution(S, _param_matrix(times, [mu]))


# ------------------------------------------------ advection-diffusion-reaction


@dataclass
class ADRConfig:
    nx: int = 32
    ny: int = 32
    dt: float = 2 * np.pi / 20
    n_timesteps: int = 100
    reaction: float = 1.0
    source_amplitude: float = 10.0
    source_width: float = 0.07
    mu1_train: list[float] = field(default_factory=lambda: [0.002, 0.003, 0.004, 0.005])
    center_train: list[float] = field(default_factory=lambda: [0.40, 0.45, 0.50, 0.55, 0.60])

    @property
    def n_dofs(self) -> int:
        return self.nx * self.ny

    def train_grid(self) -> list[tuple[float, ...]]:
        return sample_parameter_grid([self.mu1_train, self.center_train, self.center_train])

    def test_grid(self) -> list[tuple[float, ...]]:
        c = midpoints(self.center_train)
        return sample_parameter_grid([midpoints(self.mu1_train), c, c])

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) / self.nx
        y = (np.arange(self.ny) + 0.5) / self.ny
        X, Y = np.meshgrid(x, y)  # row j <-> y_j, flattened index j * nx + i
        return X.ravel(), Y.ravel()


def _neumann_1d(n: int, h: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Second-difference and central-difference matrices with mirror ghost cells."""
    main = -2.0 * np.ones(n)
    main[0] = main[-1] = -1.0
    D2 = sp.diags([np.ones(n - 1), main, np.ones(n - 1)], [-1, 0, 1]) / h**2
    lower = -np.ones(n - 1)
    upper = np.ones(n - 1)
    diag = np.zeros(n)
    diag[0], diag[-1] = -1.0, 1.0
    D1 = sp.diags([lower, diag, upper], [-1, 0, 1]) / (2.0 * h)
    return D2.tocsr(), D1.tocsr()


def adr_operators(cfg: ADRConfig):
    """Laplacian and the two first-derivative matrices on the flattened grid."""
    D2x, D1x = _neumann_1d(cfg.nx, 1.0 / cfg.nx)
    D2y, D1y = _neumann_1d(cfg.ny, 1.0 / cfg.ny)
    Ix, Iy = sp.identity(cfg.nx), sp.identity(cfg.ny)
    lap = sp.kron(Iy, D2x) + sp.kron(D2y, Ix)
    dx = sp.kron(Iy, D1x)
    dy = sp.kron(D1y, Ix)
    return lap.tocsc(), dx.tocsc(), dy.tocsc()


def adr_source(cfg: ADRConfig, center: tuple[float, float]) -> np.ndarray:
    X, Y = cfg.cell_centers()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    return cfg.source_amplitude * np.exp(-r2 / cfg.source_width**2)


def _march_adr(cfg: ADRConfig, mu1: float, sources: np.ndarray) -> np.ndarray:
    """Integrate all source columns for one diffusivity; returns (n_t, N_h, n_src)."""
    lap, dx, dy = adr_operators(cfg)
    n = cfg.n_dofs
    I = sp.identity(n, format="csc")
    base = -mu1 * lap + cfg.reaction * I
    dt = cfg.dt
    out = np.empty((cfg.n_timesteps, n, sources.shape[1]))
    u_prev = np.zeros_like(sources)
    u = np.zeros_like(sources)
    for step in range(1, cfg.n_timesteps + 1):
        t = step * dt
        A = base + np.cos(t) * dx + np.sin(t) * dy
        if step == 1:
            lhs = I / dt + A
            rhs = sources + u / dt
        else:
            lhs = 1.5 / dt * I + A
            rhs = sources + (2.0 * u - 0.5 * u_prev) / dt
        try:
            u_new = splu(lhs.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise SolverError(f"ADR linear solve failed at step {step}") from exc
        if not np.all(np.isfinite(u_new)):
            raise SolverError(f"ADR solution became non-finite at step {step}")
        u_prev, u = u, u_new
        out[step - 1] = u
    return out


def solve_adr_many(cfg: ADRConfig, mus: Sequence[Sequence[float]]) -> FOMSolution:
    """Solve several instances, sharing factorizations across equal diffusivities.

    Snapshots are the states at t_1, ..., t_{N_t} (the zero initial state is
    not stored).
    """
    mus = [tuple(float(v) for v in m) for m in mus]
    for m in mus:
        if len(m) != 3:
            raise ValueError("ADR parameters are (mu1, mu2, mu3)")
    times = cfg.dt * np.arange(1, cfg.n_timesteps + 1)
    blocks: dict[int, np.ndarray] = {}
    for mu1 in sorted({m[0] for m in mus}):
        idx = [j for j, m in enumerate(mus) if m[0] == mu1]
        src = np.column_stack([adr_source(cfg, mus[j][1:]) for j in idx])
        traj = _march_adr(cfg, mu1, src)
        for col, j in enumerate(idx):
            blocks[j] = traj[:, :, col].T
    S = SnapshotMatrix.from_instances([blocks[j] for j in range(len(mus))])
    M = np.hstack([_param_matrix(times, m) for m in mus])
    return FOMSolution(S, M)


def solve_adr(cfg: ADRConfig, mu: Sequence[float]) -> FOMSolution:
    return solve_adr_many(cfg, [mu])


def generate_lv(cfg: LVConfig, mus: Sequence[float], n_timesteps: int | None = None) -> FOMSolution:
    return concatenate_solutions([solve_lotka_volterra(cfg, m, n_timesteps) for m in mus])
