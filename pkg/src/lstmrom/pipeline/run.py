"""End-to-end orchestration: data, reduction, both trainings, prediction, extrapolation, evaluation."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..blocks import InputNormalizer, arch_dict, arch_from_dict
from ..dataset import build_base_tensor
from ..fom import ADRConfig, FOMSolution, LVConfig, generate_lv, solve_adr_many
from ..mu_rom import MuArch, MuModel, build_regressor_normalizer, predict_mu, predict_mu_stepwise, train_mu
from ..pod import PODBasis, ScalingRecord, apply_scaling, compute_rpod_basis, fit_scaling, project
from ..t_rom import RolloutResult, TArch, TModel, rollout, train_t
from ..timing import TimingProbe, TimingStats
from ..training import History, TrainConfig
from .config import PipelineConfig
from .io import Checkpoint, FormatError, load_checkpoint, read_params, read_snapshots, save_checkpoint, write_json, write_series_csv
from .metrics import EvaluationReport, eps_k, eps_rel, summarize_eps_k

log = logging.getLogger(__name__)

DATA_FILES = {
    "train_snapshots": "train.snap",
    "train_params": "train_params.csv",
    "test_snapshots": "test.snap",
    "test_params": "test_params.csv",
}


class StageError(RuntimeError):
    """A failure tagged with the pipeline stage in which it happened."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


# --------------------------------------------------------------------- data


def generate_data(cfg: PipelineConfig) -> tuple[FOMSolution, FOMSolution]:
    """Training and test solutions for the configured case.

    The training set spans ``fom.n_train_steps`` steps; the test set spans
    enough steps to cover the extrapolated window.
    """
    n_train, n_test = cfg.fom.n_train_steps, cfg.n_test_steps
    if cfg.case == "lv":
        lv = LVConfig(dt=cfg.fom.lv_dt)
        return generate_lv(lv, lv.mu_train, n_train), generate_lv(lv, lv.mu_test, n_test)
    if cfg.case == "adr":
        base = ADRConfig(nx=cfg.fom.adr_nx, ny=cfg.fom.adr_nx, dt=cfg.fom.adr_dt)
        tr = ADRConfig(nx=base.nx, ny=base.ny, dt=base.dt, n_timesteps=n_train)
        te = ADRConfig(nx=base.nx, ny=base.ny, dt=base.dt, n_timesteps=n_test)
        return solve_adr_many(tr, base.train_grid()), solve_adr_many(te, base.test_grid())
    if cfg.case == "files":
        return load_solution_files(cfg)
    raise ValueError(f"unknown case {cfg.case!r}")


def load_solution_files(cfg: PipelineConfig, directory=None) -> tuple[FOMSolution, FOMSolution]:
    paths = {}
    for key, default in DATA_FILES.items():
        explicit = getattr(cfg.fom, key)
        if explicit is not None:
            paths[key] = Path(explicit)
        elif directory is not None:
            paths[key] = Path(directory) / default
        else:
            raise FormatError(f"fom.{key} is required for file input")
    out = []
    for which in ("train", "test"):
        S = read_snapshots(paths[f"{which}_snapshots"])
        M = read_params(paths[f"{which}_params"])
        out.append(FOMSolution(S, M))
    return out[0], out[1]


# ---------------------------------------------------------------- reduction


@dataclass
class Reduction:
    basis: PODBasis
    scaling: ScalingRecord
    U_scaled: np.ndarray


def reduce_training_data(cfg: PipelineConfig, train: FOMSolution) -> Reduction:
    S = train.snapshots
    if cfg.pod.identity:
        basis = PODBasis.identity(S.data.shape[0])
    else:
        basis = compute_rpod_basis(S, cfg.pod.N, cfg.pod.oversampling, cfg.pod.power_iters, cfg.stage_seed("rsvd"))
    U_N = project(basis, S.data)
    scaling = fit_scaling(U_N, cfg.pod.scaling)
    return Reduction(basis, scaling, apply_scaling(scaling, U_N))


def scaled_reduced(red: Reduction, sol: FOMSolution) -> np.ndarray:
    return apply_scaling(red.scaling, project(red.basis, sol.snapshots.data))


# ----------------------------------------------------------------- training


def mu_arch_from_config(cfg: PipelineConfig, N: int, n_mu: int) -> MuArch:
    m = cfg.mu
    return MuArch(
        N=N, n=m.n, K=m.K, n_mu=n_mu, enc_hidden=m.enc_hidden, enc_depth=m.enc_depth, dec_hidden=m.dec_hidden,
        dec_depth=m.dec_depth, reducer=m.reducer, latent_head=m.latent_head, bidirectional=m.bidirectional,
        regressor_hidden=tuple(m.regressor_hidden), out_hidden=tuple(m.out_hidden),
    )


def t_arch_from_config(cfg: PipelineConfig, N: int, n_mu: int) -> TArch:
    t = cfg.t
    return TArch(
        N=N, n_t=t.n_t or cfg.mu.n, p=t.p, k=t.k, n_mu=n_mu, enc_hidden=t.enc_hidden, enc_depth=t.enc_depth,
        dec_hidden=t.dec_hidden, dec_depth=t.dec_depth, reducer=t.reducer, phi_hidden=tuple(t.phi_hidden),
        merge_hidden=tuple(t.merge_hidden), out_hidden=tuple(t.out_hidden),
    )


def _train_cfg(s) -> TrainConfig:
    return TrainConfig(n_epochs=s.n_epochs, patience=s.patience, lr=s.lr, dim_batch=s.dim_batch, alpha=s.alpha,
                       clip_norm=s.clip_norm, lr_decay=s.lr_decay)


def fit_mu_model(cfg: PipelineConfig, train: FOMSolution, red: Reduction) -> tuple[MuModel, History]:
    S = train.snapshots
    arch = mu_arch_from_config(cfg, red.basis.n_reduced, train.n_mu)
    model = MuModel(arch, build_regressor_normalizer(train.params, cfg.mu.t_scale), seed=cfg.stage_seed("mu-init"))
    base = build_base_tensor(red.U_scaled, S.n_instances, S.n_timesteps, arch.K, train.params)
    res = train_mu(model, base, cfg.mu.omega_h, _train_cfg(cfg.mu), seed=cfg.stage_seed("mu-train"))
    return model, res.history


def fit_t_model(cfg: PipelineConfig, train: FOMSolution, red: Reduction) -> tuple[TModel, History]:
    S = train.snapshots
    arch = t_arch_from_config(cfg, red.basis.n_reduced, train.n_mu)
    model = TModel(arch, InputNormalizer.fit(train.mus()), seed=cfg.stage_seed("t-init"))
    base = build_base_tensor(red.U_scaled, S.n_instances, S.n_timesteps, arch.K, train.params)
    res = train_t(model, base, _train_cfg(cfg.t), seed=cfg.stage_seed("t-train"))
    return model, res.history


# -------------------------------------------------------------- checkpoints


def model_checkpoint(kind: str, model, red: Reduction, history: History, cfg: PipelineConfig) -> Checkpoint:
    hyper = cfg.to_dict()["mu" if kind == "mu" else "t"]
    seeds = {"master": cfg.seed, "init": f"{kind}-init", "train": f"{kind}-train"}
    extras = {"normalizer/lo": model.normalizer.lo, "normalizer/hi": model.normalizer.hi}
    return Checkpoint(kind, arch_dict(model.arch), hyper, seeds, history.to_dict(), model.state(),
                      red.basis, red.scaling, extras)


def model_from_checkpoint(ckpt: Checkpoint):
    norm = InputNormalizer(ckpt.extras["normalizer/lo"], ckpt.extras["normalizer/hi"])
    if ckpt.kind == "mu":
        model = MuModel(arch_from_dict(MuArch, ckpt.dims), norm)
    elif ckpt.kind == "t":
        model = TModel(arch_from_dict(TArch, ckpt.dims), norm)
    else:
        raise FormatError(f"unknown checkpoint kind {ckpt.kind!r}")
    model.load_state(ckpt.weights)
    return model


def reduction_from_checkpoint(ckpt: Checkpoint) -> Reduction:
    return Reduction(ckpt.basis, ckpt.scaling, np.empty((ckpt.basis.n_reduced, 0)))


# --------------------------------------------------------------- inference


def _per_instance(M: np.ndarray, n_inst: int, n_t: int) -> np.ndarray:
    return M.reshape(M.shape[0], n_inst, n_t)


def concatenate_extension(S_pred: np.ndarray, E_pred: np.ndarray | None, n_inst: int, n_pred: int,
                          t_ext: int, ext_steps: int) -> np.ndarray:
    """Per instance: the first ``t_ext`` predicted columns followed by the extrapolated block."""
    rows = S_pred.shape[0]
    A = _per_instance(S_pred, n_inst, n_pred)[:, :, :t_ext]
    if ext_steps:
        B = _per_instance(E_pred, n_inst, ext_steps)
        A = np.concatenate([A, B], axis=2)
    return A.reshape(rows, n_inst * (t_ext + ext_steps))


def truth_window(sol: FOMSolution, start: int, stop: int) -> np.ndarray:
    n_inst, n_t = sol.snapshots.n_instances, sol.snapshots.n_timesteps
    if stop > n_t:
        raise ValueError(f"test data has {n_t} steps, evaluation needs {stop}")
    return _per_instance(sol.snapshots.data, n_inst, n_t)[:, :, start:stop].reshape(sol.snapshots.data.shape[0], -1)


def column_window(M: np.ndarray, n_inst: int, n_t: int, start: int, stop: int) -> np.ndarray:
    return _per_instance(M, n_inst, n_t)[:, :, start:stop].reshape(M.shape[0], -1)


@dataclass
class PipelineResult:
    report: EvaluationReport
    mu_model: MuModel
    t_model: TModel | None
    reduction: Reduction
    mu_prediction: np.ndarray  # full order, n_test instances x n_train_steps
    extension: RolloutResult | None
    extended: np.ndarray  # full order, t_ext + N_ext k columns per instance
    truth: FOMSolution
    histories: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)


def evaluate(cfg: PipelineConfig, test: FOMSolution, mu_full: np.ndarray, extended: np.ndarray,
             ext: RolloutResult | None, probe: TimingProbe, train_max: float,
             stepwise: TimingProbe | None = None) -> EvaluationReport:
    n_inst = test.snapshots.n_instances
    n_pred = cfg.fom.n_train_steps
    width = cfg.extended_width
    truth_pred = truth_window(test, 0, n_pred)
    e_rel = eps_rel(truth_pred, mu_full, n_inst, n_pred)

    start = cfg.ext.eval_start
    win = width - start
    ref = truth_window(test, start, width)
    approx = column_window(extended, n_inst, width, start, width)
    E = eps_k(ref, approx, n_inst, win)
    summ = summarize_eps_k(E, cfg.eval.n_resamples, cfg.eval.level, cfg.stage_seed("bootstrap"))

    extra: dict = {"n_test": n_inst, "eval_window": [start, width]}
    E_mu = eps_k(truth_pred, mu_full, n_inst, n_pred)
    extra["eps_k_prediction"] = {"mean": float(E_mu.mean()), "max": float(E_mu.max())}
    if ext is not None and cfg.ext_steps:
        t0 = cfg.ext.t_ext
        ref_e = truth_window(test, t0, width) if test.snapshots.n_timesteps >= width else None
        if ref_e is not None:
            E_e = eps_k(ref_e, ext.full, n_inst, cfg.ext_steps)
            extra["eps_k_extrapolated"] = {"mean": float(E_e.mean()), "max": float(E_e.max())}
        vals = ext.full
        finite = bool(np.all(np.isfinite(vals)))
        max_abs = float(np.max(np.abs(vals))) if finite else float("inf")
        extra["stability"] = {
            "finite": finite,
            "max_abs": max_abs,
            "min_value": float(np.min(vals)) if finite else float("nan"),
            "max_value": float(np.max(vals)) if finite else float("nan"),
            "train_max_abs": train_max,
            "diverged": (not finite) or max_abs > cfg.eval.divergence_factor * train_max,
        }
    s = probe.summary()
    return EvaluationReport(
        eps_rel=e_rel, eps_k_mean=summ["mean"], eps_k_max=summ["max"], ci_low=summ["ci"][0], ci_high=summ["ci"][1],
        t_nn=s["t_nn"], t_rec=s["t_rec"], queries_per_instance=s["queries_per_instance"], extra=extra,
        t_nn_stepwise=TimingStats.of(stepwise.t_nn).__dict__ if stepwise is not None else {},
    )


def run_pipeline(cfg: PipelineConfig, data: tuple[FOMSolution, FOMSolution] | None = None,
                 write: bool = True) -> PipelineResult:
    """Train both models on the same reduced data, predict, extrapolate and evaluate.

    Artifacts go to ``cfg.out`` when ``write`` is true and an output directory is set.
    """
    with stage("config"):
        cfg.validate()
    with stage("generate-fom"):
        train, test = data if data is not None else generate_data(cfg)
        if train.snapshots.n_timesteps != cfg.fom.n_train_steps:
            train = train.time_window(0, cfg.fom.n_train_steps)
    with stage("reduce"):
        red = reduce_training_data(cfg, train)
    with stage("train-mu"):
        mu_model, mu_hist = fit_mu_model(cfg, train, red)
    t_model, t_hist = None, None
    if cfg.t.enabled and cfg.ext.n_ext > 0:
        with stage("train-t"):
            t_model, t_hist = fit_t_model(cfg, train, red)
    n_inst = test.snapshots.n_instances
    n_pred = cfg.fom.n_train_steps
    with stage("predict"):
        M_pred = column_window(test.params, n_inst, test.snapshots.n_timesteps, 0, n_pred)
        probe = TimingProbe("predict")
        pred = predict_mu(mu_model, red.basis, red.scaling, M_pred, n_pred, probe)
        stepwise = TimingProbe("stepwise")
        predict_mu_stepwise(mu_model, M_pred, n_pred, stepwise)
    ext = None
    with stage("extrapolate"):
        if t_model is not None:
            ext = rollout(t_model, pred.reduced, test.mus(), n_pred, cfg.ext.t_ext, cfg.ext.n_ext,
                          red.basis, red.scaling)
        extended = concatenate_extension(pred.full, ext.full if ext else None, n_inst, n_pred, cfg.ext.t_ext,
                                         cfg.ext_steps)
    with stage("evaluate"):
        train_max = float(np.max(np.abs(train.snapshots.data)))
        report = evaluate(cfg, test, pred.full, extended, ext, probe, train_max, stepwise)
        histories = {"mu": mu_hist.to_dict()}
        report.extra["mu_epochs"] = mu_hist.n_epochs
        report.extra["mu_best_epoch"] = mu_hist.best_epoch
        if t_hist is not None:
            histories["t"] = t_hist.to_dict()
            report.extra["t_epochs"] = t_hist.n_epochs
            report.extra["t_best_epoch"] = t_hist.best_epoch
    result = PipelineResult(report, mu_model, t_model, red, pred.full, ext, extended, test, histories)
    if write and cfg.out:
        with stage("write"):
            result.artifacts = write_artifacts(cfg, result)
    return result


def write_artifacts(cfg: PipelineConfig, result: PipelineResult) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"config": out / "config.json", "report": out / "report.json", "mu": out / "mu"}
    write_json(paths["config"], cfg.to_dict())
    write_json(paths["report"], result.report.to_dict())
    save_checkpoint(paths["mu"], model_checkpoint("mu", result.mu_model, result.reduction,
                                                  History.from_dict(result.histories["mu"]), cfg))
    if result.t_model is not None:
        paths["t"] = out / "t"
        save_checkpoint(paths["t"], model_checkpoint("t", result.t_model, result.reduction,
                                                     History.from_dict(result.histories["t"]), cfg))
    paths["plot"] = out / "plot_data.csv"
    emit_plot_data(cfg, result, paths["plot"])
    return {k: str(v) for k, v in paths.items()}


def emit_plot_data(cfg: PipelineConfig, result: PipelineResult, path) -> list[str]:
    """Time series of selected DOFs for one test instance: FOM, prediction, extension, error."""
    inst = cfg.eval.plot_instance
    width = cfg.extended_width
    test = result.truth
    n_t = test.snapshots.n_timesteps
    times = test.params[0, inst * n_t : inst * n_t + width]
    ref = _per_instance(test.snapshots.data, test.snapshots.n_instances, n_t)[:, inst, :width]
    ext = _per_instance(result.extended, test.snapshots.n_instances, width)[:, inst, :]
    n_pred = cfg.fom.n_train_steps
    pred = _per_instance(result.mu_prediction, test.snapshots.n_instances, n_pred)[:, inst, :]
    den = np.sqrt(np.mean(np.sum(ref * ref, axis=0)))
    series = {}
    for d in cfg.eval.plot_dofs:
        series[f"fom_{d}"] = ref[d]
        pcol = np.full(width, np.nan)
        m = min(n_pred, width)
        pcol[:m] = pred[d, :m]
        series[f"prediction_{d}"] = pcol
        series[f"extended_{d}"] = ext[d]
        series[f"relerr_{d}"] = np.abs(ref[d] - ext[d]) / den
    write_series_csv(path, times, series)
    return list(series)
