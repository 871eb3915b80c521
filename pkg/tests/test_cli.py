import json

import pytest

from lstmrom.pipeline.cli import build_parser, main
from lstmrom.pipeline.io import read_snapshots

TINY = [
    "--preset", "lv", "--fom-n-train-steps", "20",
    "--mu-K", "5", "--mu-n", "3", "--mu-regressor-hidden", "4", "--mu-n-epochs", "2", "--mu-patience", "none",
    "--t-p", "3", "--t-k", "2", "--t-n-t", "3", "--t-phi-hidden", "2", "--t-merge-hidden", "3", "--t-n-epochs", "2",
    "--ext-t-ext", "20", "--ext-n-ext", "3", "--ext-eval-start", "10", "--eval-n-resamples", "20",
]


def run(cmd, out, *extra):
    return main([cmd, "--seed", "0", "--out", str(out), *TINY, *extra])


def test_flags_mirror_config():
    args = build_parser().parse_args(["train-mu", "--seed", "1", "--out", "x", "--mu-n-epochs", "5",
                                      "--mu-out-hidden", "8,8", "--t-enabled", "false", "--mu-patience", "none"])
    assert getattr(args, "mu.n_epochs") == 5 and getattr(args, "mu.out_hidden") == [8, 8]
    assert getattr(args, "t.enabled") is False and getattr(args, "mu.patience") is None


def test_seed_and_out_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["pipeline", "--out", "x"])


def test_subcommand_chain(tmp_path, capsys):
    data = tmp_path / "data"
    assert run("generate-fom", data) == 0
    assert (data / "train.snap").exists() and (data / "test_params.csv").exists()
    assert run("train-mu", tmp_path / "m", "--data", str(data)) == 0
    assert run("train-t", tmp_path / "t", "--data", str(data), "--mu-checkpoint", str(tmp_path / "m" / "mu")) == 0
    assert run("predict", tmp_path / "p", "--data", str(data), "--mu-checkpoint", str(tmp_path / "m" / "mu")) == 0
    timing = json.loads((tmp_path / "p" / "timing.json").read_text(encoding="utf-8"))
    assert set(timing["queries_per_instance"]) == {4}
    assert run("extrapolate", tmp_path / "e", "--data", str(data), "--mu-checkpoint", str(tmp_path / "m" / "mu"),
               "--t-checkpoint", str(tmp_path / "t" / "t")) == 0
    ext = read_snapshots(tmp_path / "e" / "extended.snap")
    assert ext.n_timesteps == 26
    assert run("evaluate", tmp_path / "v", "--data", str(data), "--prediction", str(tmp_path / "e" / "extended.snap")) == 0
    report = json.loads((tmp_path / "v" / "report.json").read_text(encoding="utf-8"))
    assert report["eps_k_mean"] >= 0
    assert run("pipeline", tmp_path / "full", "--data", str(data)) == 0
    assert "eps_rel" in capsys.readouterr().out


def test_failure_exit_code_and_stage_tag(tmp_path, capsys):
    code = run("train-mu", tmp_path / "m", "--data", str(tmp_path / "missing"))
    assert code == 1
    err = capsys.readouterr().err
    assert "lstmrom train-mu: error: [generate-fom]" in err


def test_invalid_config_is_config_stage(tmp_path, capsys):
    assert run("pipeline", tmp_path / "x", "--mu-omega-h", "2") == 1
    assert "[config]" in capsys.readouterr().err


def test_evaluate_rejects_wrong_width(tmp_path, capsys):
    data = tmp_path / "data"
    run("generate-fom", data)
    code = run("evaluate", tmp_path / "v", "--data", str(data), "--prediction", str(data / "train.snap"))
    assert code == 1 and "[evaluate]" in capsys.readouterr().err
