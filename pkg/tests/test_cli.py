"""Tests for cli module"""

import csv
import json
import zipfile
from pathlib import Path

import numpy as np
import pytest

from safefilterbench.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, collect_archives, main
from safefilterbench.log_store import read_npz

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def sweep_config(tmp_path):
    """Two filters, two noise levels, two seeds, short episodes"""
    path = tmp_path / "small.cfg"
    path.write_text(
        "safefilterbench-config 1\n"
        "steps = 30\n"
        "filters = cbf, rssa\n"
        "seeds = 20, 21\n"
        "attack = noise\n"
        "levels = nominal, high\n"
        "n_obstacles = 5\n"
        "k_rep = 1.0e-7\n"
    )
    return path


def read_rows(path):
    """CSV rows as dicts"""
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_run_writes_run_directory(tmp_path):
    """Test a single run writes data.npz and metrics.json"""
    out = tmp_path / "results"
    status = main(["run", "--config", str(CONFIG_DIR / "baseline.cfg"), "--filter", "cbf", "--seed", "20", "--steps", "25", "--out", str(out)])
    assert status == EXIT_OK
    run_dir = out / "cbf" / "nominal" / "20"
    log = read_npz(run_dir / "data.npz")
    assert log.steps == 25
    assert log.metadata["filter"] == "cbf"
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert metrics["seed"] == 20
    assert metrics["steps"] == 25


def test_run_refuses_existing_directory(tmp_path):
    """Test rerunning into an occupied directory needs --overwrite"""
    args = ["run", "--filter", "ssa", "--steps", "10", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    assert main(args) == EXIT_USAGE
    assert main(args + ["--overwrite"]) == EXIT_OK


def test_invalid_filter_is_usage_error(tmp_path, capsys):
    """Test an unknown filter name exits with status 1"""
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--filter", "mpc", "--out", str(tmp_path)])
    assert excinfo.value.code == EXIT_USAGE
    err = capsys.readouterr().err
    assert "mpc" in err
    assert "rssa" in err


def test_bad_config_is_usage_error(tmp_path):
    """Test config errors exit with status 1"""
    path = tmp_path / "bad.cfg"
    path.write_text("safefilterbench-config 1\nsteps = many\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["run", "--config", str(tmp_path / "absent.cfg")]) == EXIT_RUNTIME


def test_level_without_attack_is_usage_error(tmp_path):
    """Test a non-nominal level needs an attack family"""
    assert main(["run", "--level", "high", "--steps", "5", "--out", str(tmp_path)]) == EXIT_USAGE


def test_sweep_and_parse_agree(tmp_path, sweep_config):
    """Test a sweep's report matches parsing its archives afterwards"""
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(sweep_config), "--jobs", "1", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "failures.json").read_text()) == []
    rows = read_rows(out / "parsed_metrics.csv")
    assert len(rows) == 8
    assert {r["level"] for r in rows} == {"nominal", "high"}
    assert (out / "summary.json").exists()
    assert (out / "plot_data.csv").exists()

    reports = tmp_path / "reports"
    assert main(["parse", str(out), "--out", str(reports)]) == EXIT_OK
    assert (reports / "parsed_metrics.csv").read_bytes() == (out / "parsed_metrics.csv").read_bytes()
    assert not (reports / "failures.json").exists()


def test_sweep_reuses_and_parallel_matches(tmp_path, sweep_config):
    """Test a repeated sweep reuses runs and a parallel sweep writes the same report"""
    serial = tmp_path / "serial"
    args = ["sweep", "--config", str(sweep_config), "--out", str(serial)]
    assert main(args + ["--jobs", "1"]) == EXIT_OK
    first = (serial / "parsed_metrics.csv").read_bytes()
    assert main(args + ["--jobs", "1"]) == EXIT_OK
    assert (serial / "parsed_metrics.csv").read_bytes() == first

    parallel = tmp_path / "parallel"
    assert main(["sweep", "--config", str(sweep_config), "--jobs", "2", "--out", str(parallel)]) == EXIT_OK
    assert (parallel / "parsed_metrics.csv").read_bytes() == first
    archive = Path("cbf") / "high" / "21" / "data.npz"
    assert read_npz(serial / archive).equals(read_npz(parallel / archive))


def test_parallel_sweep_survives_corrupt_archive(tmp_path, sweep_config):
    """Test one undecodable reused archive fails only its own run in a parallel sweep"""
    out = tmp_path / "sweep"
    args = ["sweep", "--config", str(sweep_config), "--jobs", "2", "--out", str(out)]
    assert main(args) == EXIT_OK

    archive = out / "cbf" / "nominal" / "20" / "data.npz"
    with zipfile.ZipFile(archive) as bundle:
        members = {name: bundle.read(name) for name in bundle.namelist()}
    members["dist_goal_arm.npy"] = members["dist_goal_arm.npy"].replace(b"'shape'", b"'shape\"", 1)
    with zipfile.ZipFile(archive, "w") as bundle:
        for name, data in members.items():
            bundle.writestr(name, data)

    assert main(args) == EXIT_RUNTIME
    failures = json.loads((out / "failures.json").read_text())
    assert [(f["filter"], f["level"], f["seed"]) for f in failures] == [("cbf", "nominal", 20)]
    assert "dist_goal_arm" in failures[0]["error"]
    assert "unterminated string" in failures[0]["error"]
    rows = read_rows(out / "parsed_metrics.csv")
    assert len(rows) == 7


def test_sweep_filter_and_seed_overrides(tmp_path, sweep_config):
    """Test repeated --filter and --seed narrow the matrix"""
    out = tmp_path / "narrow"
    args = ["sweep", "--config", str(sweep_config), "--jobs", "1", "--out", str(out)]
    assert main(args + ["--filter", "pfm", "--seed", "5", "--level", "medium"]) == EXIT_OK
    rows = read_rows(out / "parsed_metrics.csv")
    assert [(r["filter"], r["level"], r["seed"]) for r in rows] == [("pfm", "medium", "5")]


def test_parse_reports_broken_archive(tmp_path):
    """Test an archive missing dist_goal_arm becomes a failure row"""
    out = tmp_path / "results"
    assert main(["run", "--filter", "rsss", "--steps", "15", "--out", str(out)]) == EXIT_OK
    good = out / "rsss" / "nominal" / "20" / "data.npz"

    with np.load(good) as bundle:
        arrays = {name: bundle[name] for name in bundle.files if name != "dist_goal_arm"}
    broken = out / "broken" / "data.npz"
    broken.parent.mkdir()
    np.savez(broken, **arrays)

    reports = tmp_path / "reports"
    assert main(["parse", str(out), "--out", str(reports)]) == EXIT_RUNTIME
    failures = json.loads((reports / "failures.json").read_text())
    assert len(failures) == 1
    assert failures[0]["path"] == str(broken)
    assert "dist_goal_arm" in failures[0]["error"]
    rows = read_rows(reports / "parsed_metrics.csv")
    assert [r["filter"] for r in rows] == ["rsss"]


def test_pinch_reports_no_solution(tmp_path):
    """Test the pinch scene records infeasible steps in the parsed metrics"""
    out = tmp_path / "pinch"
    args = ["run", "--config", str(CONFIG_DIR / "pinch.cfg"), "--steps", "20", "--out", str(out)]
    assert main(args) == EXIT_OK
    reports = tmp_path / "reports"
    assert main(["parse", str(out), "--out", str(reports)]) == EXIT_OK
    (row,) = read_rows(reports / "parsed_metrics.csv")
    assert row["filter"] == "cbf"
    assert int(row["no_solution_steps"]) == 20
    assert int(row["collision_steps"]) == 0


def test_collect_archives(tmp_path):
    """Test directories expand to sorted archives and files pass through"""
    for name in ("b", "a"):
        (tmp_path / name).mkdir()
        (tmp_path / name / "data.npz").write_bytes(b"")
    single = tmp_path / "single.npz"
    archives = collect_archives([str(tmp_path / "b"), str(tmp_path / "a"), str(single)])
    assert archives == [tmp_path / "b" / "data.npz", tmp_path / "a" / "data.npz", single]
    assert collect_archives([str(tmp_path)])[0] == tmp_path / "a" / "data.npz"


def test_version(capsys):
    """Test --version prints the package version"""
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "safefilterbench" in capsys.readouterr().out
