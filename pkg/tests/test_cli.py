import json
from pathlib import Path

import numpy as np
import pytest

from relnewt.cli import run
from relnewt.io import read_boundary, read_scattering

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _report(path):
    d = json.loads(Path(path).read_text())
    d.pop("meta")
    return d


def test_unknown_flag_exit_2(capsys):
    assert run(["boundary-data", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert run(["boundary-data", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2


def test_boundary_data_f0(tmp_path):
    assert run(["boundary-data", "--config", str(CONFIGS / "f0.json"), "--grid", "16", "--out", str(tmp_path)]) == 0
    ds = read_boundary(tmp_path / "boundary.csv")
    assert len(ds) == 16 * 15


def test_reports_reproducible(tmp_path):
    args = ["boundary-data", "--config", str(CONFIGS / "f1.json"), "--grid", "8"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    assert _report(tmp_path / "a" / "boundary_report.json") == _report(tmp_path / "b" / "boundary_report.json")
    assert (tmp_path / "a" / "boundary.csv").read_bytes() == (tmp_path / "b" / "boundary.csv").read_bytes()


def test_scattering_then_convert(tmp_path):
    assert run(["scattering-data", "--config", str(CONFIGS / "f1.json"), "--out", str(tmp_path / "s")]) == 0
    src = tmp_path / "s" / "scattering.csv"
    assert len(read_scattering(src)) > 0
    assert run(["convert", "--config", str(CONFIGS / "f1.json"), "--input", str(src), "--out", str(tmp_path / "c")]) == 0
    ds = read_boundary(tmp_path / "c" / "boundary.csv")
    assert len(ds) > 0 and np.all(ds.s > 0)
    assert json.loads((tmp_path / "c" / "report.json").read_text())["output"] == "boundary.csv"


def test_trajectory_and_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RELNEWT_THREADS", "3")
    assert run(["trajectory", "--config", str(CONFIGS / "f1.json"), "--start", "-1", "0", "--direction", "1", "0.1",
                "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "trajectory_report.json").read_text())["meta"]
    assert meta["threads"] == 3
    monkeypatch.setenv("RELNEWT_THREADS", "x")
    assert run(["trajectory", "--config", str(CONFIGS / "f1.json"), "--out", str(tmp_path)]) == 2


@pytest.mark.slow
def test_stability_pair(tmp_path):
    assert run(["stability", "--config", str(CONFIGS / "pair_f0_f1.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "stability_report.json").read_text())
    assert rep["slack"] >= 0 and rep["passed"]
    assert "stage_timings_s" in rep["meta"]


def test_invert_small(tmp_path):
    assert run(["boundary-data", "--config", str(CONFIGS / "f1.json"), "--grid", "12", "--out", str(tmp_path)]) == 0
    out = tmp_path / "inv.json"
    assert run(["invert", "--config", str(CONFIGS / "f1.json"), "--data", str(tmp_path / "boundary.csv"),
                "--param-spec", str(CONFIGS / "single_bump.json"), "--out", str(out)]) == 0
    assert abs(json.loads(out.read_text())["params"][0] - 0.1) < 1e-6
