import json
import math
from pathlib import Path

import pytest

from loadsr.cli import main

SMALL_FIT = """
depth = 3
search_iterations = 3
batch_size = 4
critic_iterations = 15
finetune_iterations = 30
pool_size = 3
seed = 2
"""

ZIP_CONF = """
kind = zip
duration = 8.0
dt = 0.05
dip = 0.5
recovery_tau = 1.5
noise_sigma = 0.0
seed = 4
"""


def write(path, text):
    Path(path).write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def zip_csv(tmp_path):
    conf = write(tmp_path / "gen.conf", ZIP_CONF)
    out = tmp_path / "data.csv"
    assert main(["generate", "--config", conf, "--out", str(out)]) == 0
    return out


def test_generate_writes_csv_and_sidecar(tmp_path, zip_csv):
    header = zip_csv.read_text().splitlines()[0]
    assert header == "t,V,P"
    sidecar = json.loads(zip_csv.with_suffix(".json").read_text())
    assert sidecar["generator"]["kind"] == "zip"
    assert sidecar["generator"]["a_z"] == 0.4
    assert sidecar["seed"] == 4
    assert sidecar["rows"] == 160


def test_generate_same_seed_byte_identical(tmp_path):
    conf = write(tmp_path / "gen.conf", ZIP_CONF)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["generate", "--config", conf, "--out", str(a)]) == 0
    assert main(["generate", "--config", conf, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_invalid_shares_exits_2(tmp_path, capsys):
    conf = write(tmp_path / "gen.conf", ZIP_CONF + "a_z = 0.9\n")
    code = main(["generate", "--config", conf, "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "sum to 1" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    conf = write(tmp_path / "gen.conf", ZIP_CONF + "frobnicate = 3\n")
    code = main(["generate", "--config", conf, "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "frobnicate" in capsys.readouterr().err


def test_fit_outputs_and_roundtrip(tmp_path, zip_csv):
    conf = write(tmp_path / "fit.conf", SMALL_FIT)
    out_dir = tmp_path / "run"
    assert main(["fit", "--data", str(zip_csv), "--config", conf,
                 "--out", str(out_dir)]) == 0

    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["policy_mode"] == "risk_seeking"
    assert manifest["dataset"]["rows"] == 160
    assert manifest["library"]["unary"][0] == "identity"
    assert len(manifest["result"]["best_reward_trace"]) == 3
    assert "wall_time" not in manifest["result"]
    assert manifest["timings"]["search_seconds"] > 0

    # predictions CSV row count equals the evaluated dataset length
    lines = (out_dir / "predictions.csv").read_text().splitlines()
    assert len(lines) == 1 + manifest["dataset"]["rows"]

    # eval on the same data reproduces the manifest's train+test expression rmse
    expression = (out_dir / "expression.txt").read_text().strip()
    assert manifest["result"]["expression"] == expression


def test_fit_policy_flag_recorded(tmp_path, zip_csv):
    conf = write(tmp_path / "fit.conf", SMALL_FIT)
    out_dir = tmp_path / "std"
    assert main(["fit", "--data", str(zip_csv), "--config", conf,
                 "--out", str(out_dir), "--policy", "standard"]) == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["policy_mode"] == "standard"


def test_fit_deterministic_manifests(tmp_path, zip_csv):
    conf = write(tmp_path / "fit.conf", SMALL_FIT)
    manifests = []
    for name in ("r1", "r2"):
        out_dir = tmp_path / name
        assert main(["fit", "--data", str(zip_csv), "--config", conf,
                     "--out", str(out_dir)]) == 0
        data = json.loads((out_dir / "manifest.json").read_text())
        data.pop("timings")
        manifests.append(data)
    assert manifests[0] == manifests[1]


def test_fit_missing_column_exits_3(tmp_path, zip_csv, capsys):
    code = main(["fit", "--data", str(zip_csv), "--out", str(tmp_path / "x"),
                 "--target", "Q"])
    assert code == 3
    assert "'Q'" in capsys.readouterr().err


def test_eval_round_trip_matches_manifest(tmp_path, zip_csv, capsys):
    conf = write(tmp_path / "fit.conf", SMALL_FIT)
    out_dir = tmp_path / "run"
    assert main(["fit", "--data", str(zip_csv), "--config", conf,
                 "--out", str(out_dir)]) == 0
    capsys.readouterr()
    manifest = json.loads((out_dir / "manifest.json").read_text())

    assert main(["eval", "--expr-file", str(out_dir / "expression.txt"),
                 "--data", str(zip_csv)]) == 0
    metrics = json.loads(capsys.readouterr().out)

    # recompute the full-data rmse from the manifest's train/test numbers
    n_train = manifest["dataset"]["train_rows"]
    n_test = manifest["dataset"]["test_rows"]
    combined = math.sqrt((manifest["result"]["train_rmse"] ** 2 * n_train
                          + manifest["result"]["test_rmse"] ** 2 * n_test)
                         / (n_train + n_test))
    assert metrics["rmse"] == pytest.approx(combined, abs=1e-9)


def test_eval_constant_expression(tmp_path, capsys):
    csv_path = tmp_path / "ones.csv"
    csv_path.write_text("t,V,P\n" + "".join(f"{i},1.0,1.0\n" for i in range(10)))
    assert main(["eval", "--expr", "0*((1*x0)) + 1", "--data", str(csv_path)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["rmse"] == 0.0


def test_eval_malformed_expression_exits_2(tmp_path, capsys):
    csv_path = tmp_path / "ones.csv"
    csv_path.write_text("t,V,P\n0,1.0,1.0\n")
    code = main(["eval", "--expr", "1.0*((1.0*x0) + 0.5", "--data", str(csv_path)])
    assert code == 2
    assert "position" in capsys.readouterr().err


def test_benchmark_small_suite(tmp_path, capsys):
    suite = write(tmp_path / "suite.conf", """
tasks = sin_wave
seeds = 0
reports = policy, models
search_iterations = 2
batch_size = 4
critic_iterations = 10
finetune_iterations = 20
pool_size = 3
""")
    out_dir = tmp_path / "bench"
    assert main(["benchmark", "--suite", suite, "--out", str(out_dir)]) == 0
    text = (out_dir / "report.txt").read_text()
    for column in ("risk_0.3", "risk_0.5", "risk_0.7", "standard"):
        assert column in text
    rows = (out_dir / "cells.csv").read_text().splitlines()
    assert rows[0].startswith("task,setting,seed")
    assert len(rows) >= 5  # header + 4 policy cells
    summary = json.loads((out_dir / "report.json").read_text())
    assert summary["aggregates"]["sin_wave"]["risk_0.5"]["count"] == 1
