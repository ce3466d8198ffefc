import argparse
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from rep.cli import (
    EXIT_FALSE,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_USAGE,
    SNAPSHOT_COLUMNS,
    TIMESERIES_COLUMNS,
    cmd_verify,
    main,
    path_start_radii,
    setup_logging,
)
from rep.config import build_config, parse_config

TEMPLATES = Path(__file__).resolve().parent.parent / "templates"


def _run(cmd: str, name: str, out: Path) -> int:
    return main([cmd, "--config", str(TEMPLATES / name), "--out", str(out), "--quiet"])


def test_certify_example(tmp_path):
    assert _run("certify", "certificate_example.toml", tmp_path) == EXIT_OK
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["criterion"] is True
    assert cert["T_pred"] == pytest.approx(0.1, rel=1e-6)
    assert cert["C"] == pytest.approx(21.0)
    assert cert["testing_function"] == "r"
    assert cert["inputs"]["grid"]["n_cells"] == 800


def test_negative_control(tmp_path):
    assert _run("certify", "negative_control.toml", tmp_path) == EXIT_FALSE
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["criterion"] is False and cert["T_pred"] is None

    assert _run("simulate", "negative_control.toml", tmp_path) == EXIT_OK
    lines = (tmp_path / "timeseries.csv").read_text().splitlines()
    assert lines[0].split(",") == TIMESERIES_COLUMNS
    # No bound when the criterion is false
    assert all(row.split(",")[2] == "" for row in lines[1:])
    table = pd.read_csv(tmp_path / "timeseries.csv")
    assert np.all(table["max_dw_dr"] >= 0) and table["max_dw_dr"].notna().all()
    snapshot = pd.read_csv(tmp_path / "snapshots" / "snapshot_0000.csv")
    assert list(snapshot.columns) == SNAPSHOT_COLUMNS
    assert len(snapshot) == 200
    assert json.loads((tmp_path / "breakdown.json").read_text()) == {"occurred": False}
    assert (tmp_path / "h_vs_bound.svg").exists()


def test_hypothesis_violation_exit_code(tmp_path):
    config = tmp_path / "dense.toml"
    config.write_text('[grid]\nn_cells = 100\n\n[initial_data]\nfamily = "ball"\nA = 0.3\n')
    assert main(["certify", "--config", str(config), "--out", str(tmp_path / "out"), "--quiet"]) == EXIT_HYPOTHESIS
    report = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert report["cell_index"] == 0
    assert report["pprime"] > 0.5


def test_usage_errors(tmp_path):
    assert _run("certify", "missing.toml", tmp_path) == EXIT_USAGE
    assert main(["certify", "--config", str(TEMPLATES / "vacuum.toml")]) == EXIT_USAGE
    assert main(["explode"]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid]\nn_cells = 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_USAGE


def test_verify_vacuum(tmp_path):
    assert _run("verify", "vacuum.toml", tmp_path) == EXIT_OK
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert verdict["passed"] is True
    assert verdict["breakdown"] == {"occurred": False}


def test_verify_certificate_example(tmp_path):
    assert _run("verify", "certificate_example.toml", tmp_path) == EXIT_OK
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert verdict["breakdown"]["occurred"] is True
    assert verdict["breakdown"]["t_breakdown"] == 0.0
    assert verdict["checks"]["breakdown_time"]["passed"] is True


def test_verify_catches_zeroed_velocity(tmp_path):
    args = argparse.Namespace(config=str(TEMPLATES / "certificate_example.toml"), out=str(tmp_path), quiet=True)
    assert cmd_verify(args, tamper_zero_velocity=True) == EXIT_FALSE
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert verdict["checks"]["riccati_monitor"]["passed"] is False


def test_verify_smooth_ball(tmp_path):
    assert _run("verify", "smooth_ball.yaml", tmp_path) == EXIT_OK
    checks = json.loads((tmp_path / "verdict.json").read_text())["checks"]
    assert {"riccati_monitor", "support", "positivity", "conservation", "subluminality", "cauchy_gap",
            "velocity_source_sign"} <= set(checks)
    assert all(check["passed"] for check in checks.values())


def test_simulate_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run("simulate", "negative_control.toml", first) == EXIT_OK
    assert _run("simulate", "negative_control.toml", second) == EXIT_OK
    assert (first / "timeseries.csv").read_bytes() == (second / "timeseries.csv").read_bytes()
    assert (first / "h_vs_bound.svg").read_bytes() == (second / "h_vs_bound.svg").read_bytes()


def test_path_start_radii_follow_the_seed():
    config = parse_config(TEMPLATES / "smooth_ball.yaml")
    radii = path_start_radii(config)
    assert radii.size == config.monitor.n_paths
    assert np.all(np.diff(radii) >= 0)
    assert radii[0] >= config.radial_grid().centers[0] and radii[-1] < config.grid.R
    assert np.array_equal(radii, path_start_radii(config))
    reseeded = config.model_copy(update={"run": config.run.model_copy(update={"seed": 7})})
    assert not np.array_equal(radii, path_start_radii(reseeded))
    assert path_start_radii(build_config({"monitor": {"n_paths": 0}})).size == 0


def test_invalid_log_level_falls_back(monkeypatch, tmp_path):
    monkeypatch.setenv("REP_LOG_LEVEL", "LOUD")
    setup_logging()
    assert logging.getLogger().level == logging.INFO
    setup_logging(quiet=True)
    assert logging.getLogger().level == logging.WARNING
    assert _run("certify", "certificate_example.toml", tmp_path) == EXIT_OK
