"""Orchestration, metrics, persistence and the command-line interface."""

from ..timing import TimingProbe, timing_probe
from .config import PRESETS, PipelineConfig, get_preset, load_config, stage_seed
from .io import (
    Checkpoint,
    FormatError,
    VersionError,
    load_checkpoint,
    read_params,
    read_series_csv,
    read_snapshots,
    save_checkpoint,
    write_params,
    write_series_csv,
    write_snapshots,
)
from .metrics import EvaluationReport, bootstrap_ci, eps_k, eps_rel
from .run import PipelineResult, StageError, emit_plot_data, run_pipeline

__all__ = [
    "PRESETS",
    "Checkpoint",
    "EvaluationReport",
    "FormatError",
    "PipelineConfig",
    "PipelineResult",
    "StageError",
    "TimingProbe",
    "VersionError",
    "bootstrap_ci",
    "emit_plot_data",
    "eps_k",
    "eps_rel",
    "get_preset",
    "load_checkpoint",
    "load_config",
    "read_params",
    "read_series_csv",
    "read_snapshots",
    "run_pipeline",
    "save_checkpoint",
    "stage_seed",
    "timing_probe",
    "write_params",
    "write_series_csv",
    "write_snapshots",
]
