"""Command-line interface.

Every subcommand accepts ``--preset``, ``--config FILE`` (JSON with the same
nested keys as :class:`PipelineConfig`) and one flag per configuration leaf,
e.g. ``--mu-n-epochs 200`` or ``--t-merge-hidden 64,64``. Precedence is
preset, then file, then flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..fom import FOMSolution
from ..mu_rom import predict_mu
from ..pod import SnapshotMatrix
from ..t_rom import rollout
from ..timing import TimingProbe
from . import config as C
from .io import load_checkpoint, read_snapshots, save_checkpoint, write_json, write_params, write_snapshots
from .run import (
    DATA_FILES,
    StageError,
    column_window,
    concatenate_extension,
    evaluate,
    fit_mu_model,
    fit_t_model,
    generate_data,
    load_solution_files,
    model_checkpoint,
    model_from_checkpoint,
    reduce_training_data,
    reduction_from_checkpoint,
    run_pipeline,
    scaled_reduced,
    stage,
)

log = logging.getLogger("lstmrom")

SUBCOMMANDS = ("generate-fom", "train-mu", "train-t", "predict", "extrapolate", "evaluate", "pipeline")


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _none_or(conv):
    def parse(s: str):
        return None if s.strip().lower() in ("none", "null", "") else conv(s)

    return parse


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _converter(annotation: str):
    a = str(annotation).replace(" ", "")
    if a.startswith("list[int]"):
        return _int_list
    base = {"bool": _parse_bool, "int": int, "float": float, "str": str}
    for name, conv in base.items():
        if a == name:
            return conv
        if a in (f"{name}|None", f"None|{name}"):
            return _none_or(conv)
    raise TypeError(f"no command-line converter for {annotation!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lstmrom", description="LSTM reduced-order surrogates for parametrized dynamics")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--preset", choices=sorted(C.PRESETS), help="start from a named configuration")
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--data", type=Path, help="directory with train/test snapshot and parameter files")
        for dotted, f, _ in C.flat_fields():
            flag = "--" + dotted.replace(".", "-").replace("_", "-")
            required = dotted in ("seed", "out")
            p.add_argument(flag, dest=dotted, type=_converter(f.type), default=argparse.SUPPRESS,
                           required=required, metavar=dotted.split(".")[-1].upper())
        if name in ("train-t", "predict", "extrapolate"):
            p.add_argument("--mu-checkpoint", type=Path, required=name != "train-t",
                           help="trained mu-model directory (train-t reuses its basis and scaling)")
        if name == "extrapolate":
            p.add_argument("--t-checkpoint", type=Path, required=True)
        if name == "evaluate":
            p.add_argument("--prediction", type=Path, required=True, help="extended prediction snapshot file")
    return parser


def resolve_config(args: argparse.Namespace) -> C.PipelineConfig:
    cfg = C.get_preset(args.preset) if args.preset else C.PipelineConfig()
    if args.config is not None:
        cfg = C.load_config(args.config, cfg)
    for dotted, _, _ in C.flat_fields():
        if dotted in vars(args):
            C.set_dotted(cfg, dotted, getattr(args, dotted))
    return cfg


def _data(cfg, args) -> tuple[FOMSolution, FOMSolution]:
    if args.data is not None:
        return load_solution_files(cfg, args.data)
    return generate_data(cfg)


def _train_window(cfg, train: FOMSolution) -> FOMSolution:
    if train.snapshots.n_timesteps != cfg.fom.n_train_steps:
        return train.time_window(0, cfg.fom.n_train_steps)
    return train


def cmd_generate(cfg, args) -> None:
    out = Path(cfg.out)
    with stage("generate-fom"):
        train, test = generate_data(cfg)
        write_snapshots(out / DATA_FILES["train_snapshots"], train.snapshots)
        write_params(out / DATA_FILES["train_params"], train.params)
        write_snapshots(out / DATA_FILES["test_snapshots"], test.snapshots)
        write_params(out / DATA_FILES["test_params"], test.params)


def cmd_train_mu(cfg, args) -> None:
    with stage("generate-fom"):
        train, _ = _data(cfg, args)
        train = _train_window(cfg, train)
    with stage("reduce"):
        red = reduce_training_data(cfg, train)
    with stage("train-mu"):
        model, hist = fit_mu_model(cfg, train, red)
    with stage("write"):
        save_checkpoint(Path(cfg.out) / "mu", model_checkpoint("mu", model, red, hist, cfg))


def cmd_train_t(cfg, args) -> None:
    with stage("generate-fom"):
        train, _ = _data(cfg, args)
        train = _train_window(cfg, train)
    with stage("reduce"):
        if args.mu_checkpoint is not None:
            red = reduction_from_checkpoint(load_checkpoint(args.mu_checkpoint))
            red.U_scaled = scaled_reduced(red, train)
        else:
            red = reduce_training_data(cfg, train)
    with stage("train-t"):
        model, hist = fit_t_model(cfg, train, red)
    with stage("write"):
        save_checkpoint(Path(cfg.out) / "t", model_checkpoint("t", model, red, hist, cfg))


def _predict(cfg, args, test: FOMSolution):
    ck = load_checkpoint(args.mu_checkpoint)
    model = model_from_checkpoint(ck)
    n_inst, n_pred = test.snapshots.n_instances, cfg.fom.n_train_steps
    M = column_window(test.params, n_inst, test.snapshots.n_timesteps, 0, n_pred)
    probe = TimingProbe("predict")
    pred = predict_mu(model, ck.basis, ck.scaling, M, n_pred, probe)
    return ck, M, pred, probe


def _snap(data: np.ndarray, ref: SnapshotMatrix, n_t: int) -> SnapshotMatrix:
    return SnapshotMatrix(data, ref.n_dofs, ref.n_channels, ref.n_instances, n_t)


def cmd_predict(cfg, args) -> None:
    with stage("generate-fom"):
        _, test = _data(cfg, args)
    with stage("predict"):
        ck, M, pred, probe = _predict(cfg, args, test)
    with stage("write"):
        out = Path(cfg.out)
        write_snapshots(out / "prediction.snap", _snap(pred.full, test.snapshots, cfg.fom.n_train_steps))
        write_params(out / "prediction_params.csv", M)
        write_json(out / "timing.json", probe.summary())


def cmd_extrapolate(cfg, args) -> None:
    with stage("generate-fom"):
        _, test = _data(cfg, args)
    with stage("predict"):
        ck, M, pred, _ = _predict(cfg, args, test)
    with stage("extrapolate"):
        t_model = model_from_checkpoint(load_checkpoint(args.t_checkpoint))
        ext = rollout(t_model, pred.reduced, test.mus(), cfg.fom.n_train_steps, cfg.ext.t_ext, cfg.ext.n_ext,
                      ck.basis, ck.scaling)
        width = cfg.extended_width
        extended = concatenate_extension(pred.full, ext.full, test.snapshots.n_instances, cfg.fom.n_train_steps,
                                         cfg.ext.t_ext, ext.n_ext * ext.k)
    with stage("write"):
        write_snapshots(Path(cfg.out) / "extended.snap", _snap(extended, test.snapshots, width))


def cmd_evaluate(cfg, args) -> None:
    with stage("generate-fom"):
        _, test = _data(cfg, args)
    with stage("evaluate"):
        S = read_snapshots(args.prediction)
        if S.n_timesteps != cfg.extended_width:
            raise ValueError(f"prediction has {S.n_timesteps} steps per instance, expected {cfg.extended_width}")
        width = cfg.extended_width
        n_inst, n_pred = test.snapshots.n_instances, cfg.fom.n_train_steps
        if n_pred > width:
            raise ValueError("evaluate needs the prediction window inside the extended matrix")
        mu_part = column_window(S.data, n_inst, width, 0, n_pred)
        report = evaluate(cfg, test, mu_part, S.data, None, TimingProbe("evaluate"), 0.0)
        write_json(Path(cfg.out) / "report.json", report.to_dict())


def cmd_pipeline(cfg, args) -> None:
    data = load_solution_files(cfg, args.data) if args.data is not None else None
    result = run_pipeline(cfg, data=data, write=True)
    r = result.report
    print(f"eps_rel {r.eps_rel:.4e}  eps_k mean {r.eps_k_mean:.4e} max {r.eps_k_max:.4e}  "
          f"CI [{r.ci_low:.4e}, {r.ci_high:.4e}]")


COMMANDS = {
    "generate-fom": cmd_generate,
    "train-mu": cmd_train_mu,
    "train-t": cmd_train_t,
    "predict": cmd_predict,
    "extrapolate": cmd_extrapolate,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with stage("config"):
            cfg = resolve_config(args)
            cfg.validate()
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            write_json(Path(cfg.out) / f"{args.command}.config.json", cfg.to_dict())
        COMMANDS[args.command](cfg, args)
    except StageError as exc:
        print(f"lstmrom {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
