import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from eddpc.bundle import load_bundle
from eddpc.cli import main
from eddpc.dataio import Dataset, save_dataset, save_runs
from eddpc.simlab import OL_STABLE, open_loop_data


@pytest.fixture
def files(tmp_path, ol_data, ol_config):
    data = tmp_path / "data.csv"
    save_dataset(ol_data, data)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(ol_config.to_dict()))
    return tmp_path, data, cfg


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_exit_codes(tmp_path, capsys, ol_data):
    save_dataset(ol_data, tmp_path / "pe.csv")
    code, out, _ = _run(capsys, "check", tmp_path / "pe.csv")
    assert code == 0 and "PE of order 3: yes" in out

    const = open_loop_data(OL_STABLE, np.ones((1, 21)))
    save_dataset(const, tmp_path / "const.csv")
    code, out, _ = _run(capsys, "check", tmp_path / "const.csv")
    assert code == 1 and "PE of order 3: no" in out

    short = Dataset(ol_data.inputs[:, :4], ol_data.states[:, :4])
    save_dataset(short, tmp_path / "short.csv")
    code, out, _ = _run(capsys, "check", tmp_path / "short.csv")
    assert code == 1 and "T >= (m+1)n+m = 5" in out


def test_check_run_directory(tmp_path, capsys, ol_data):
    save_runs([ol_data, ol_data], tmp_path / "runs")
    code, out, _ = _run(capsys, "check", tmp_path / "runs", "--order", "2")
    assert code == 0 and "average of 2 runs" in out and "PE of order 2: yes" in out


def test_missing_and_malformed_files(tmp_path, capsys):
    code, _, err = _run(capsys, "check", tmp_path / "nope.csv")
    assert code == 1 and err
    bad = tmp_path / "bad.csv"
    bad.write_text("u1,x1\n1,oops\n")
    code, _, err = _run(capsys, "check", bad)
    assert code == 1 and ("oops" in err or "x1" in err)


def test_build_and_simulate(files, capsys):
    tmp, data, cfg = files
    bundle = tmp / "ctrl.json"
    code, out, _ = _run(capsys, "build", data, cfg, "--out", bundle)
    assert code == 0 and "regions: 9" in out
    assert len(load_bundle(bundle).controller) == 9

    trace = tmp / "trace.csv"
    code, out, _ = _run(capsys, "simulate", bundle, "--plant", "ol-stable", "--x0", "1,1",
                        "--steps", "20", "--oracle", "--bounds=-2,2", "--out", trace)
    assert code == 0
    metrics = json.loads(out)
    assert metrics["status"] == "ok" and metrics["rmse_oracle"] <= 1e-6
    assert metrics["bound_hits_pct"] > 0
    rows = list(csv.reader(open(trace)))
    assert rows[0] == ["t", "x1", "x2", "u1", "x1_oracle", "x2_oracle"] and len(rows) == 22


def test_build_merge_flag(files, capsys):
    tmp, data, cfg = files
    code, out, _ = _run(capsys, "build", data, cfg, "--out", tmp / "b.json",
                        "--merge", "first_move")
    assert code == 0 and "regions: 7" in out


def test_build_unconstrained(tmp_path, capsys, ol_data):
    save_dataset(ol_data, tmp_path / "d.json")
    (tmp_path / "c.json").write_text(json.dumps({"horizons": {"N": 2}, "Q": [1, 1],
                                                 "R": [[0.1]]}))
    code, out, _ = _run(capsys, "build", tmp_path / "d.json", tmp_path / "c.json",
                        "--out", tmp_path / "b.json")
    assert code == 0 and "regions: 1 " in out


def test_build_rejects_uninformative_data(files, capsys):
    tmp, _, cfg = files
    dead = Dataset(np.zeros((1, 21)), np.zeros((2, 21)))
    save_dataset(dead, tmp / "dead.csv")
    code, _, err = _run(capsys, "build", tmp / "dead.csv", cfg, "--out", tmp / "b.json")
    assert code == 1 and "rank(" in err and "representation" in err


def test_simulate_infeasible_exit(tmp_path, capsys, ol_data, ol_config):
    cfg = ol_config.to_dict()
    cfg["constraints"] = {**cfg["constraints"],
                          "state_bounds": {"lower": [-1, -1], "upper": [1, 1]}}
    save_dataset(ol_data, tmp_path / "d.csv")
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert _run(capsys, "build", tmp_path / "d.csv", tmp_path / "c.json",
                "--out", tmp_path / "b.json")[0] == 0
    code, out, err = _run(capsys, "simulate", tmp_path / "b.json", "--plant", "ol-stable",
                          "--x0", "8,8")
    assert code == 2 and json.loads(out)["status"] == "infeasible" and "step 0" in err


def test_simulate_needs_one_target(files, capsys):
    tmp, data, cfg = files
    _run(capsys, "build", data, cfg, "--out", tmp / "b.json")
    assert _run(capsys, "simulate", tmp / "b.json")[0] == 1
    # regulation bundle on the quadrotor
    assert _run(capsys, "simulate", tmp / "b.json", "--quadrotor")[0] == 1


@pytest.mark.slow
def test_bench_writes_outputs(tmp_path, capsys):
    code, out, _ = _run(capsys, "bench", "ol-stable", "--out", tmp_path, "--set", "repeats=1")
    assert code == 0 and "finished" in out
    assert (tmp_path / "ol-stable_summary.json").exists()
    assert _run(capsys, "bench", "ol-stable", "--out", tmp_path, "--set", "bogus=1")[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "eddpc", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("check", "build", "simulate", "bench"):
        assert cmd in res.stdout
