import csv
import json
from pathlib import Path

import pytest

from kamlab.cli import config_hash, resolve_config, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_missing_config_exits_2(tmp_path, capsys):
    assert run(["kam", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"experiment": "measure", "sampels": 10}))
    assert run(["measure", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_wrong_type_rejected(tmp_path):
    assert run(["measure", "--set", 'samples="many"', "--out", str(tmp_path)]) == 2


def test_validate_names_schedule_violation(capsys):
    assert run(["validate", "--config", str(CONFIGS / "bad-schedule.json")]) == 2
    report = json.loads(capsys.readouterr().out)
    assert any("(c24)" in v for v in report["violations"])


def test_validate_names_axiom_violation(capsys):
    assert run(["validate", "--experiment", "kam", "--set", "tau=-1.0"]) == 2
    report = json.loads(capsys.readouterr().out)
    assert any("(b15)" in v for v in report["violations"])


def test_validate_desk_config_clean(capsys):
    assert run(["validate", "--config", str(CONFIGS / "desk.json")]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == []


def test_measure_outputs_carry_hash_and_seed(tmp_path):
    out = tmp_path / "m"
    assert run(["measure", "--gamma", "1e-2,1e-3", "--samples", "2000", "--seed", "4", "--out", str(out)]) == 0
    rows = read_csv(out / "measure.csv")
    assert rows[0][:2] == ["config_hash", "seed"]
    assert [r[2] for r in rows[1:]] == ["0.01", "0.001"]
    params, _ = resolve_config("measure", {}, {"gammas": [1e-2, 1e-3], "samples": 2000})
    assert all(r[0] == config_hash("measure", params) and r[1] == "4" for r in rows[1:])
    summary = json.loads((out / "measure-summary.json").read_text())
    assert summary["seed"] == 4 and summary["config_hash"] == rows[1][0]


def test_measure_byte_identical_across_runs_and_threads(tmp_path):
    args = ["measure", "--config", str(CONFIGS / "measure.json"), "--samples", "3000"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    assert (tmp_path / "a" / "measure.csv").read_bytes() == (tmp_path / "b" / "measure.csv").read_bytes()


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KAMLAB_SEED", "17")
    assert run(["measure", "--samples", "1000", "--gamma", "1e-2", "--out", str(tmp_path)]) == 0
    assert read_csv(tmp_path / "measure.csv")[1][1] == "17"


def test_seed_flag_beats_config_and_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KAMLAB_SEED", "17")
    assert run(["measure", "--config", str(CONFIGS / "measure.json"), "--samples", "1000",
                "--seed", "3", "--out", str(tmp_path)]) == 0
    assert read_csv(tmp_path / "measure.csv")[1][1] == "3"


def test_oversized_start_fails_validation(tmp_path, capsys):
    assert run(["kam", "--config", str(CONFIGS / "desk.json"), "--set", "amplitude=1e-4",
                "--out", str(tmp_path)]) == 2
    assert "exceeds eps0" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, capsys):
    assert run(["kam", "--set", "gamma=0.5", "--out", str(tmp_path)]) == 3
    assert "numerical failure (NoAdmissibleRotation)" in capsys.readouterr().err


def test_chart_run(tmp_path):
    assert run(["duffing-chart", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "chart.csv")
    assert float(rows[1][rows[0].index("invariant_residual")]) < 1e-10
    doc = json.loads((tmp_path / "chart.json").read_text())
    assert "config_hash" in doc and "seed" in doc


@pytest.mark.slow
def test_kam_end_to_end(tmp_path):
    assert run(["kam", "--config", str(CONFIGS / "desk.json"), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "convergence.csv")
    assert rows[0] == ["config_hash", "seed", "n", "eps_predicted", "eps_measured", "theta", "q_bound"]
    curve = json.loads((tmp_path / "curve.json").read_text())
    assert set(curve) >= {"alpha", "u", "v", "config_hash", "seed"}
    summary = json.loads((tmp_path / "kam-summary.json").read_text())["summary"]
    assert summary["residual"] < 1e-9
