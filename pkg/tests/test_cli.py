import hashlib
import json

import numpy as np
import pytest

from factorgcn.cli import main
from factorgcn.metrics import load_correlation_csv
from factorgcn.models import load_model


@pytest.fixture(scope="module")
def data_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data.json"
    code = main(["generate", "--factors", "4", "--samples", "60", "--seed", "3", "--out", str(path)])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, data_path):
    path = tmp_path_factory.mktemp("cli") / "model.json"
    code = main(
        ["train", "--data", str(data_path), "--out", str(path), "--epochs", "2",
         "--hidden", "8", "--seed", "1"]
    )
    assert code == 0
    return path


def test_generate_writes_dataset(data_path, capsys):
    doc = json.loads(data_path.read_text())
    assert doc["n_factors"] == 4
    assert len(doc["samples"]) == 60
    assert all(len(s["label"]) == 4 for s in doc["samples"])


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["generate", "--factors", "3", "--samples", "20", "--seed", "5",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_rejects_factor_count(tmp_path, capsys):
    code = main(["generate", "--factors", "9", "--samples", "5", "--seed", "0",
                 "--out", str(tmp_path / "x.json")])
    assert code == 2
    assert "factors" in capsys.readouterr().err


def test_generate_missing_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["generate", "--samples", "5", "--out", str(tmp_path / "x.json")])
    assert err.value.code == 2


def test_train_outputs(model_path, data_path):
    report_path = model_path.parent / (model_path.name + ".report.json")
    assert model_path.exists()
    assert report_path.exists()
    assert report_path.with_suffix(".png").exists()
    report = json.loads(report_path.read_text())
    assert len(report["train_losses"]) == 2
    assert "test_micro_f1" in report["final_metrics"]
    model = load_model(model_path)
    assert model.config.epochs == 2


def test_train_deterministic_params(tmp_path, data_path):
    outs = []
    for name in ("m1.json", "m2.json"):
        out = tmp_path / name
        assert main(["train", "--data", str(data_path), "--out", str(out), "--epochs", "1",
                     "--hidden", "4", "--seed", "7"]) == 0
        outs.append(json.loads(out.read_text())["params"])
    assert outs[0] == outs[1]


def test_train_gcn_baseline(tmp_path, data_path):
    out = tmp_path / "gcn.json"
    assert main(["train", "--data", str(data_path), "--out", str(out), "--epochs", "1",
                 "--model", "gcn", "--hidden", "4"]) == 0
    assert load_model(out).config.model == "gcn"


def test_train_lambda_zero(tmp_path, data_path):
    out = tmp_path / "nodisc.json"
    assert main(["train", "--data", str(data_path), "--out", str(out), "--epochs", "1",
                 "--lambda", "0", "--hidden", "4"]) == 0
    assert load_model(out).config.disc_weight == 0.0


def test_train_config_file_with_flag_precedence(tmp_path, data_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 1, "hidden_dim": 4, "seed": 9}))
    out = tmp_path / "m.json"
    assert main(["train", "--data", str(data_path), "--out", str(out),
                 "--config", str(cfg), "--seed", "2"]) == 0
    loaded = load_model(out)
    assert loaded.config.hidden_dim == 4  # from config file
    assert loaded.config.seed == 2  # flag wins


def test_train_missing_dataset(tmp_path):
    code = main(["train", "--data", str(tmp_path / "nope.json"), "--out", str(tmp_path / "m.json"),
                 "--epochs", "1"])
    assert code == 1


def test_eval_trained_model(tmp_path, data_path, model_path, capsys):
    out = tmp_path / "report.json"
    assert main(["eval", "--data", str(data_path), "--model", str(model_path),
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc) >= {"micro_f1", "ged_e", "c_score", "match_histograms"}
    assert doc["ged_e"]["mean"] is not None
    assert out.with_suffix(".png").exists()


def test_eval_random_baseline(tmp_path, data_path):
    out = tmp_path / "random.json"
    assert main(["eval", "--data", str(data_path), "--model", "random", "--seed", "0",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["ged_e"]["mean"] > 0


def test_eval_incompatible_model_exits_2(tmp_path, model_path, capsys):
    other = tmp_path / "data2.json"
    assert main(["generate", "--factors", "3", "--samples", "20", "--seed", "0",
                 "--out", str(other)]) == 0
    code = main(["eval", "--data", str(other), "--model", str(model_path),
                 "--out", str(tmp_path / "r.json")])
    assert code == 2
    assert "n_labels" in capsys.readouterr().err


def test_correlate_round_trip(tmp_path, data_path, model_path):
    out = tmp_path / "corr.csv"
    assert main(["correlate", "--data", str(data_path), "--model", str(model_path),
                 "--out", str(out)]) == 0
    matrix = load_correlation_csv(out)
    assert matrix.shape == (32, 32)  # 4 factors x hidden 8
    assert np.array_equal(matrix, matrix.T)
    np.testing.assert_allclose(np.diag(matrix), 1.0)
    assert out.with_suffix(".png").exists()


def test_sweep_lambdas(tmp_path, data_path):
    out_dir = tmp_path / "sweep"
    assert main(["sweep", "--data", str(data_path), "--lambdas", "0.5", "0",
                 "--epochs", "1", "--out", str(out_dir)]) == 0
    table = (out_dir / "sweep.csv").read_text().strip().splitlines()
    assert table[0].startswith("setting,")
    settings = [float(line.split(",")[0]) for line in table[1:]]
    assert settings == sorted(settings)
    assert (out_dir / "sweep.png").exists()
    assert (out_dir / "model_lambda_0.5.json").exists()
    assert (out_dir / "eval_lambda_0.5.json").exists()


def test_sweep_factor_counts(tmp_path, data_path):
    out_dir = tmp_path / "sweep_f"
    assert main(["sweep", "--data", str(data_path), "--factor-counts", "4", "3",
                 "--epochs", "1", "--out", str(out_dir)]) == 0
    lines = (out_dir / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 3


def test_commands_do_not_mutate_inputs(tmp_path, data_path, model_path):
    before = hashlib.sha256(data_path.read_bytes()).hexdigest()
    main(["eval", "--data", str(data_path), "--model", str(model_path),
          "--out", str(tmp_path / "r.json")])
    assert hashlib.sha256(data_path.read_bytes()).hexdigest() == before
