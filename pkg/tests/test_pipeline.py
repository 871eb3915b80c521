import json

import numpy as np
import pytest

from lstmrom.pipeline import config as C
from lstmrom.pipeline.io import load_checkpoint, read_series_csv
from lstmrom.pipeline.run import (
    StageError,
    column_window,
    concatenate_extension,
    model_from_checkpoint,
    run_pipeline,
    stage,
)
from lstmrom.mu_rom import predict_mu


def tiny_config(out=None, **ext):
    cfg = C.get_preset("lv")
    cfg.out = str(out) if out else None
    cfg.fom.n_train_steps = 20
    cfg.mu = C.MuSettings(K=5, n=3, regressor_hidden=[4], n_epochs=2, patience=None, dim_batch=64)
    cfg.t = C.TSettings(p=3, k=2, n_t=3, phi_hidden=[2], merge_hidden=[3], n_epochs=2, dim_batch=64)
    cfg.ext = C.ExtrapolationSettings(t_ext=20, n_ext=3, eval_start=10)
    cfg.eval.n_resamples = 50
    for k, v in ext.items():
        setattr(cfg.ext, k, v)
    return cfg


@pytest.fixture(scope="module")
def tiny_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return run_pipeline(tiny_config(out)), out


def test_concatenation_exact(rng):
    n_inst, n_pred, t_ext, ext_steps = 3, 6, 4, 5
    S = rng.normal(size=(2, n_inst * n_pred))
    E = rng.normal(size=(2, n_inst * ext_steps))
    X = concatenate_extension(S, E, n_inst, n_pred, t_ext, ext_steps)
    w = t_ext + ext_steps
    assert X.shape == (2, n_inst * w)
    for i in range(n_inst):
        assert np.array_equal(X[:, i * w : i * w + t_ext], S[:, i * n_pred : i * n_pred + t_ext])
        assert np.array_equal(X[:, i * w + t_ext : (i + 1) * w], E[:, i * ext_steps : (i + 1) * ext_steps])


def test_concatenation_without_extension(rng):
    S = rng.normal(size=(2, 12))
    X = concatenate_extension(S, None, 2, 6, 4, 0)
    assert np.array_equal(X, column_window(S, 2, 6, 0, 4))


def test_pipeline_width_and_artifacts(tiny_result):
    result, out = tiny_result
    cfg = tiny_config()
    n_inst = result.truth.snapshots.n_instances
    assert result.extended.shape == (3, n_inst * (20 + 3 * 2))
    for name in ("config.json", "report.json", "plot_data.csv", "mu/manifest.json", "t/weights.bin"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["queries_per_instance"] == [4] * n_inst
    assert report["ci_low"] <= report["eps_k_mean"] <= report["ci_high"]
    assert report["extra"]["eval_window"] == [cfg.ext.eval_start, cfg.extended_width]
    assert "stability" in report["extra"] and "eps_k_extrapolated" in report["extra"]


def test_pipeline_concatenation_invariant(tiny_result):
    result, _ = tiny_result
    n_inst = result.truth.snapshots.n_instances
    X = concatenate_extension(result.mu_prediction, result.extension.full, n_inst, 20, 20, 6)
    assert np.array_equal(X, result.extended)


def test_plot_data_matches_memory(tiny_result):
    result, out = tiny_result
    header, data = read_series_csv(out / "plot_data.csv")
    assert header[0] == "t" and len(header) == 1 + 4 * 3
    assert data.shape[0] == 26
    np.testing.assert_array_equal(data[:, header.index("extended_1")], result.extended[1, :26])
    np.testing.assert_array_equal(data[:, header.index("fom_2")], result.truth.snapshots.data[2, :26])


def test_checkpoint_reload_reproduces_prediction(tiny_result):
    result, out = tiny_result
    ck = load_checkpoint(out / "mu")
    model = model_from_checkpoint(ck)
    n_inst = result.truth.snapshots.n_instances
    M = column_window(result.truth.params, n_inst, result.truth.snapshots.n_timesteps, 0, 20)
    assert np.array_equal(predict_mu(model, ck.basis, ck.scaling, M, 20).full, result.mu_prediction)


def test_no_extension_degenerates_to_prediction():
    cfg = tiny_config(n_ext=0, t_ext=15, eval_start=0)
    result = run_pipeline(cfg, write=False)
    n_inst = result.truth.snapshots.n_instances
    assert result.t_model is None and result.extension is None
    assert np.array_equal(result.extended, column_window(result.mu_prediction, n_inst, 20, 0, 15))


def test_pipeline_deterministic():
    a = run_pipeline(tiny_config(), write=False).report.numerics()
    b = run_pipeline(tiny_config(), write=False).report.numerics()
    assert a == b


def test_seed_changes_result():
    cfg = tiny_config()
    cfg.seed = 1
    a = run_pipeline(tiny_config(), write=False).report.eps_rel
    assert run_pipeline(cfg, write=False).report.eps_rel != a


def test_stage_error_tag():
    with pytest.raises(StageError, match=r"^\[train-mu\] ValueError: bad"):
        with stage("train-mu"):
            raise ValueError("bad")


def test_pipeline_failure_is_stage_tagged():
    cfg = tiny_config()
    cfg.case = "files"
    with pytest.raises(StageError, match=r"\[generate-fom\]"):
        run_pipeline(cfg, write=False)


# ------------------------------------------------------------------ config


def test_stage_seeds_independent_and_stable():
    a = C.stage_seed(0, "mu-init").generate_state(2)
    assert np.array_equal(a, C.stage_seed(0, "mu-init").generate_state(2))
    assert not np.array_equal(a, C.stage_seed(0, "t-init").generate_state(2))
    assert not np.array_equal(a, C.stage_seed(1, "mu-init").generate_state(2))


def test_presets_validate():
    for name in C.PRESETS:
        C.get_preset(name).validate()
    with pytest.raises(KeyError):
        C.get_preset("nope")


def test_preset_values():
    lv = C.get_preset("lv")
    assert (lv.mu.K, lv.mu.n, lv.mu.omega_h, lv.mu.patience, lv.t.p, lv.t.k) == (20, 40, 0.9, 50, 10, 10)
    assert lv.extended_width == 150
    adr = C.get_preset("adr_extrapolation")
    assert adr.extended_width == 100 and adr.fom.n_train_steps == 60


@pytest.mark.parametrize("dotted,value", [("mu.K", 0), ("mu.omega_h", 1.5), ("case", "ns"), ("mu.K", 100),
                                          ("ext.t_ext", 5), ("mu.n_epochs", -1), ("mu.lr", 0.0),
                                          ("t.clip_norm", -1.0), ("mu.lr_decay", 1.5), ("eval.plot_dofs", [3]),
                                          ("mu.t_scale", 0.0)])
def test_validation_errors(dotted, value):
    cfg = C.get_preset("lv")
    C.set_dotted(cfg, dotted, value)
    with pytest.raises(ValueError):
        cfg.validate()


def test_config_from_dict_and_file(tmp_path):
    cfg = C.config_from_dict({"preset": "lv", "seed": 4, "mu": {"n_epochs": 7}})
    assert cfg.seed == 4 and cfg.mu.n_epochs == 7 and cfg.mu.K == 20
    (tmp_path / "c.json").write_text(json.dumps({"t": {"k": 5}}), encoding="utf-8")
    assert C.load_config(tmp_path / "c.json").t.k == 5
    with pytest.raises(KeyError):
        C.config_from_dict({"mu": {"bogus": 1}})
    with pytest.raises(TypeError):
        C.config_from_dict({"mu": 3})


def test_flat_fields_cover_every_leaf():
    names = [d for d, _, _ in C.flat_fields()]
    assert "mu.n_epochs" in names and "ext.t_ext" in names and "seed" in names
    assert len(names) == len(set(names))


def test_randomized_pod_pipeline_path(tmp_path):
    cfg = C.get_preset("adr_extrapolation")
    cfg.out = str(tmp_path)
    cfg.fom.adr_nx = 8
    cfg.fom.n_train_steps = 12
    cfg.pod.N = 4
    cfg.mu = C.MuSettings(K=4, n=3, regressor_hidden=[4], n_epochs=1, patience=None, dim_batch=256)
    cfg.t = C.TSettings(p=2, k=2, n_t=3, phi_hidden=[2], merge_hidden=[3], n_epochs=1, dim_batch=256)
    cfg.ext = C.ExtrapolationSettings(t_ext=12, n_ext=2, eval_start=8)
    cfg.eval.n_resamples = 20
    cfg.eval.plot_dofs = [27]
    result = run_pipeline(cfg)
    n_inst = result.truth.snapshots.n_instances
    assert result.extended.shape == (64, n_inst * 16)
    assert np.isfinite(result.report.eps_rel)
    ck = load_checkpoint(tmp_path / "mu")
    V = ck.basis.V
    assert V.shape == (64, 4)
    assert np.abs(V.T @ V - np.eye(4)).max() < 1e-10
