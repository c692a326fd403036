import json
import math

import jsonschema
import pytest

from grmssvdd.cli import EVALUATION_SCHEMA, main
from grmssvdd.data import dataset_from_dict, dataset_to_dict, MultimodalInstance, assemble_dataset

SYNTH = {"n_events": 12, "channels": [3, 4, 4], "n_timesteps": 60, "magnitude": 10.0}
MODEL = {"d": 2, "C": 0.3, "use_npt": True, "sigma": 10.0, "regularizer": 8, "beta": 1.0, "k": 2, "max_iter": 10}


def write_config(tmp_path, **extra):
    cfg = {"out_dir": str(tmp_path / "out"), "seed": 3, "pca_components": 8, "synth": SYNTH, "model": MODEL}
    cfg.update(extra)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


def run(*args):
    return main([str(a) for a in args])


def prepared(tmp_path, **extra):
    cfg = write_config(tmp_path, **extra)
    assert run("generate", "--config", cfg) == 0
    assert run("preprocess", "--config", cfg) == 0
    return cfg, tmp_path / "out"


def test_generate_creates_directory_and_is_repeatable(tmp_path):
    cfg = write_config(tmp_path)
    assert run("generate", "--config", cfg) == 0
    events = tmp_path / "out" / "events"
    first = {p.name: p.read_bytes() for p in events.iterdir()}
    assert len(first) == 2 * SYNTH["n_events"]
    assert run("generate", "--config", cfg) == 0
    assert {p.name: p.read_bytes() for p in events.iterdir()} == first


def test_invalid_config_fails_with_message(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_key": 1}))
    assert run("generate", "--config", bad) == 1
    assert "no_such_key" in capsys.readouterr().err
    assert run("generate", "--config", write_config(tmp_path, synth={"magnitude": -1})) == 1
    assert run("train", "--config", write_config(tmp_path)) == 1  # nothing preprocessed yet


def test_preprocess_outputs(tmp_path):
    _, out = prepared(tmp_path)
    train = dataset_from_dict(json.loads((out / "train.json").read_text()))
    test = dataset_from_dict(json.loads((out / "test.json").read_text()))
    split = json.loads((out / "split.json").read_text())
    assert len(split["train"]) == 8 and len(split["test"]) == 4
    assert train.D == (8, 8, 8) and test.D == (8, 8, 8)
    assert set(train.labels) == {0, 1}
    for X in train.matrices:
        assert abs(X.mean()) < 1e-9 and abs(X.std() - 1.0) < 1e-9


def test_noise_changes_preprocessed_data(tmp_path):
    cfg, out = prepared(tmp_path)
    clean = (out / "train.json").read_text()
    assert run("preprocess", "--config", cfg, "--noise", 0.1) == 0
    assert (out / "train.json").read_text() != clean


def test_train_baseline_and_rerun(tmp_path):
    cfg, out = prepared(tmp_path, model={**MODEL, "max_iter": 0})
    assert run("train", "--config", cfg) == 0
    first = (out / "model.json").read_bytes()
    assert json.loads(first)["metadata"]["iterations"] == 0
    assert run("train", "--config", cfg) == 0
    assert (out / "model.json").read_bytes() == first


def test_evaluate_report(tmp_path):
    cfg, out = prepared(tmp_path)
    assert run("train", "--config", cfg) == 0
    assert run("evaluate", "--config", cfg) == 0
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, EVALUATION_SCHEMA)
    assert set(report["strategies"]) == {"and", "or", "uni0", "uni1", "uni2"}
    for rep in report["strategies"].values():
        tpr = rep["n_tp"] / (rep["n_tp"] + rep["n_fn"])
        tnr = rep["n_tn"] / (rep["n_tn"] + rep["n_fp"])
        assert rep["gm"] == pytest.approx(math.sqrt(tpr * tnr), abs=1e-12)
    assert (out / "predictions_and.csv").exists() and (out / "report.txt").exists()


def test_perfect_model_report(tmp_path):
    cfg, out = prepared(tmp_path, model={**MODEL, "C": 1.0, "use_npt": False, "max_iter": 5})
    assert run("train", "--config", cfg) == 0
    train = dataset_from_dict(json.loads((out / "train.json").read_text()))
    targets = train.targets()
    far = [MultimodalInstance(tuple(v * 0 + 1e3 for v in i.vectors), 0) for i in targets.instances]
    (out / "test.json").write_text(json.dumps(dataset_to_dict(assemble_dataset(list(targets.instances) + far))))
    assert run("evaluate", "--config", cfg, "--strategy", "and") == 0
    rep = json.loads((out / "report.json").read_text())["strategies"]["and"]
    assert all(rep[k] == 1.0 for k in ("acc", "tpr", "tnr", "pre", "hm", "gm"))


def test_singleton_grid_equals_train_and_evaluate(tmp_path):
    grid = {k: [v] for k, v in MODEL.items() if k not in ("use_npt", "max_iter")}
    grid.update(use_npt=[True], max_iter=MODEL["max_iter"], signs=[[-1, -1, -1]])
    cfg, out = prepared(tmp_path, grid=grid, strategies=["uni1"])
    assert run("gridsearch", "--config", cfg) == 0
    grid_model = (out / "model.json").read_bytes()
    grid_report = (out / "report.json").read_bytes()
    assert run("train", "--config", cfg) == 0
    assert run("evaluate", "--config", cfg) == 0
    assert (out / "model.json").read_bytes() == grid_model
    assert (out / "report.json").read_bytes() == grid_report


def test_grid_signs_and_ranking(tmp_path):
    grid = {"d": [2], "C": [0.3], "beta": [1.0], "sigma": [10.0], "k": [2], "regularizer": [8], "use_npt": [True], "max_iter": 5}
    cfg, out = prepared(tmp_path, grid=grid, strategies=["and", "or"])
    assert run("gridsearch", "--config", cfg) == 0
    payload = json.loads((out / "grid.json").read_text())
    rows = payload["ranked"] + payload["failed"]
    assert payload["n_configs"] == 8 and len(rows) == 16
    assert len({(tuple(r["config"]["signs"]), r["strategy"]) for r in rows}) == 16
    gms = [r["report"]["gm"] for r in payload["ranked"]]
    assert gms == sorted(gms, reverse=True)
    best = json.loads((out / "best.json").read_text())
    assert best["holdout_gm"] == gms[0]


def test_earliness_command(tmp_path):
    cfg, out = prepared(tmp_path, strategies=["and", "uni0"])
    assert run("train", "--config", cfg) == 0
    assert run("earliness", "--config", cfg) == 0
    payload = json.loads((out / "earliness.json").read_text())
    assert payload["cct"] == 0.1 and set(payload["strategies"]) == {"and", "uni0"}
    for rep in payload["strategies"].values():
        assert abs(rep["ttr"] + rep["ftr"] - 1.0) < 1e-12
        assert len(rep["event_ids"]) == 4
