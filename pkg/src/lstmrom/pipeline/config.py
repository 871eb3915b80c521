"""Run configuration: nested dataclasses, presets, JSON loading and stage seeds."""

from __future__ import annotations

import copy
import json
import math
import zlib
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import numpy as np

CASES = ("lv", "adr", "files")


@dataclass
class FOMSettings:
    n_train_steps: int = 100
    n_test_steps: int | None = None  # default: enough to cover the extrapolation
    lv_dt: float = 0.1
    adr_nx: int = 32
    adr_dt: float = 2 * math.pi / 20
    train_snapshots: str | None = None
    train_params: str | None = None
    test_snapshots: str | None = None
    test_params: str | None = None


@dataclass
class PODSettings:
    N: int = 64
    identity: bool = False
    oversampling: int = 10
    power_iters: int = 2
    scaling: bool = True


@dataclass
class MuSettings:
    K: int = 20
    n: int = 40
    omega_h: float = 0.9
    enc_hidden: int | None = None
    enc_depth: int = 1
    dec_hidden: int | None = None
    dec_depth: int = 1
    reducer: int | None = None
    latent_head: bool = False
    bidirectional: bool = False
    regressor_hidden: list[int] = field(default_factory=lambda: [64, 64, 64])
    out_hidden: list[int] = field(default_factory=list)
    t_scale: float | None = None  # regressor time divisor; default: the training horizon
    n_epochs: int = 4000
    patience: int | None = 50
    lr: float = 1e-3
    dim_batch: int = 32
    alpha: float = 0.2
    clip_norm: float | None = None
    lr_decay: float = 1.0


@dataclass
class TSettings:
    enabled: bool = True
    p: int = 10
    k: int = 10
    n_t: int | None = None  # default: the mu-model latent size
    enc_hidden: int | None = None
    enc_depth: int = 1
    dec_hidden: int | None = None
    dec_depth: int = 1
    reducer: int | None = None
    phi_hidden: list[int] = field(default_factory=lambda: [32, 32])
    merge_hidden: list[int] = field(default_factory=lambda: [64])
    out_hidden: list[int] = field(default_factory=list)
    n_epochs: int = 1000
    patience: int | None = None
    lr: float = 1e-3
    dim_batch: int = 32
    alpha: float = 0.2
    clip_norm: float | None = None
    lr_decay: float = 1.0


@dataclass
class ExtrapolationSettings:
    t_ext: int = 100
    n_ext: int = 5
    eval_start: int = 0


@dataclass
class EvalSettings:
    n_resamples: int = 10_000
    level: float = 0.95
    divergence_factor: float = 10.0
    plot_instance: int = 0
    plot_dofs: list[int] = field(default_factory=lambda: [0])


@dataclass
class PipelineConfig:
    case: str = "lv"
    seed: int = 0
    out: str | None = None
    fom: FOMSettings = field(default_factory=FOMSettings)
    pod: PODSettings = field(default_factory=PODSettings)
    mu: MuSettings = field(default_factory=MuSettings)
    t: TSettings = field(default_factory=TSettings)
    ext: ExtrapolationSettings = field(default_factory=ExtrapolationSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def validate(self) -> None:
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}, got {self.case!r}")
        positive = [
            ("fom.n_train_steps", self.fom.n_train_steps),
            ("mu.K", self.mu.K),
            ("mu.n", self.mu.n),
            ("mu.dim_batch", self.mu.dim_batch),
            ("t.p", self.t.p),
            ("t.k", self.t.k),
            ("t.dim_batch", self.t.dim_batch),
            ("eval.n_resamples", self.eval.n_resamples),
        ]
        if not self.pod.identity:
            positive.append(("pod.N", self.pod.N))
        for name, v in positive:
            if v is None or v < 1:
                raise ValueError(f"{name} must be positive (got {v})")
        for name, v in [("mu.n_epochs", self.mu.n_epochs), ("t.n_epochs", self.t.n_epochs), ("ext.n_ext", self.ext.n_ext)]:
            if v < 0:
                raise ValueError(f"{name} must be non-negative (got {v})")
        for prefix, s in (("mu", self.mu), ("t", self.t)):
            if not s.lr > 0:
                raise ValueError(f"{prefix}.lr must be positive (got {s.lr})")
            if s.clip_norm is not None and not s.clip_norm > 0:
                raise ValueError(f"{prefix}.clip_norm must be positive or None (got {s.clip_norm})")
            if not 0.0 < s.lr_decay <= 1.0:
                raise ValueError(f"{prefix}.lr_decay must lie in (0, 1] (got {s.lr_decay})")
        n_dofs = {"lv": 3, "adr": self.fom.adr_nx**2}.get(self.case)
        if n_dofs is not None and any(not 0 <= d < n_dofs for d in self.eval.plot_dofs):
            raise ValueError(f"eval.plot_dofs must index the {n_dofs} degrees of freedom")
        if self.mu.t_scale is not None and not self.mu.t_scale > 0:
            raise ValueError(f"mu.t_scale must be positive or None (got {self.mu.t_scale})")
        if not 0.0 <= self.mu.omega_h <= 1.0:
            raise ValueError("mu.omega_h must lie in [0, 1]")
        if self.mu.K >= self.fom.n_train_steps:
            raise ValueError("mu.K must be smaller than the number of training steps")
        if self.t.enabled:
            if self.t.p + self.t.k >= self.fom.n_train_steps:
                raise ValueError("t.p + t.k must be smaller than the number of training steps")
            if self.ext.t_ext < self.t.p:
                raise ValueError("ext.t_ext must leave at least t.p steps of history")
        if self.ext.t_ext > self.fom.n_train_steps:
            raise ValueError("ext.t_ext cannot exceed the predicted window fom.n_train_steps")
        if not 0 <= self.ext.eval_start < self.ext.t_ext + self.ext_steps:
            raise ValueError("ext.eval_start must fall inside the extended window")

    @property
    def ext_steps(self) -> int:
        return self.ext.n_ext * self.t.k if self.t.enabled else 0

    @property
    def extended_width(self) -> int:
        return self.ext.t_ext + self.ext_steps

    @property
    def n_test_steps(self) -> int:
        need = max(self.fom.n_train_steps, self.extended_width)
        return need if self.fom.n_test_steps is None else self.fom.n_test_steps

    def to_dict(self) -> dict:
        return asdict(self)

    def stage_seed(self, stage: str) -> np.random.SeedSequence:
        return stage_seed(self.seed, stage)


def stage_seed(master: int, stage: str) -> np.random.SeedSequence:
    """Independent, reproducible stream for one stage of a run."""
    return np.random.SeedSequence([int(master), zlib.crc32(stage.encode("utf-8"))])


# ------------------------------------------------------------ dict handling


def _merge_into(obj, updates: dict, prefix: str = "") -> None:
    names = {f.name: f for f in fields(obj)}
    for key, value in updates.items():
        if key not in names:
            raise KeyError(f"unknown configuration key {prefix}{key}")
        current = getattr(obj, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise TypeError(f"{prefix}{key} must be a mapping")
            _merge_into(current, value, f"{prefix}{key}.")
        else:
            setattr(obj, key, value)


def config_from_dict(d: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    d = dict(d)
    preset = d.pop("preset", None)
    cfg = copy.deepcopy(base) if base is not None else (get_preset(preset) if preset else PipelineConfig())
    _merge_into(cfg, d)
    return cfg


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), base)


def flat_fields(cfg_cls=PipelineConfig, prefix: str = ""):
    """Yield ``(dotted_name, field, default)`` for every leaf setting."""
    for f in fields(cfg_cls):
        default = f.default if f.default is not MISSING else (
            f.default_factory() if f.default_factory is not MISSING else None
        )
        if is_dataclass(default):
            yield from flat_fields(type(default), f"{prefix}{f.name}.")
        else:
            yield f"{prefix}{f.name}", f, default


def set_dotted(cfg, dotted: str, value: Any) -> None:
    *path, leaf = dotted.split(".")
    obj = cfg
    for p in path:
        obj = getattr(obj, p)
    setattr(obj, leaf, value)


# ------------------------------------------------------------------ presets


def _lv() -> PipelineConfig:
    cfg = PipelineConfig(case="lv")
    cfg.pod = PODSettings(N=3, identity=True, scaling=True)
    cfg.mu = MuSettings(K=20, n=40, omega_h=0.9, n_epochs=4000, patience=50, lr=1e-3, lr_decay=0.997, dim_batch=16)
    cfg.t = TSettings(p=10, k=10, n_epochs=1000, patience=None)
    cfg.ext = ExtrapolationSettings(t_ext=100, n_ext=5, eval_start=50)
    cfg.eval.plot_dofs = [0, 1, 2]
    return cfg


def _lv_long() -> PipelineConfig:
    cfg = _lv()
    cfg.ext = ExtrapolationSettings(t_ext=100, n_ext=90, eval_start=100)
    return cfg


def _adr_mu() -> MuSettings:
    return MuSettings(
        K=20, n=100, omega_h=0.9, enc_hidden=100, enc_depth=2, dec_hidden=100, dec_depth=2,
        reducer=64, latent_head=True, regressor_hidden=[64, 64, 64], out_hidden=[64],
        n_epochs=1000, patience=50,
    )


def _adr() -> PipelineConfig:
    cfg = PipelineConfig(case="adr")
    cfg.pod = PODSettings(N=64, identity=False, scaling=True)
    cfg.mu = _adr_mu()
    cfg.t = TSettings(enabled=False)
    cfg.ext = ExtrapolationSettings(t_ext=100, n_ext=0, eval_start=0)
    cfg.eval.plot_dofs = [528]
    return cfg


def _adr_extrapolation() -> PipelineConfig:
    cfg = _adr()
    cfg.fom.n_train_steps = 60
    cfg.fom.n_test_steps = 100
    cfg.t = TSettings(p=10, k=10, n_t=100, enc_hidden=100, n_epochs=1000, patience=None, merge_hidden=[128])
    cfg.ext = ExtrapolationSettings(t_ext=60, n_ext=4, eval_start=40)
    return cfg


def _adr_desk_mu() -> MuSettings:
    # compact surrogate trainable in minutes on one CPU; raw time input resolves the periodic forcing
    return MuSettings(
        K=20, n=32, omega_h=0.9, enc_hidden=32, enc_depth=1, dec_hidden=32, dec_depth=1,
        reducer=None, latent_head=False, regressor_hidden=[64, 64, 64], out_hidden=[64], t_scale=1.0,
        n_epochs=400, patience=50, lr=4e-3, lr_decay=0.993,
    )


def _adr_desk() -> PipelineConfig:
    cfg = _adr()
    cfg.mu = _adr_desk_mu()
    return cfg


def _adr_extrapolation_desk() -> PipelineConfig:
    cfg = _adr_extrapolation()
    cfg.mu = _adr_desk_mu()
    cfg.t = TSettings(
        p=10, k=10, n_t=32, enc_hidden=32, merge_hidden=[128], n_epochs=300, patience=None, lr=2e-3, lr_decay=0.985,
    )
    return cfg


PRESETS = {
    "lv": _lv,
    "lv_long": _lv_long,
    "adr": _adr,
    "adr_extrapolation": _adr_extrapolation,
    "adr_desk": _adr_desk,
    "adr_extrapolation_desk": _adr_extrapolation_desk,
}


def get_preset(name: str) -> PipelineConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
