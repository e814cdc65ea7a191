import csv
import json
import math
import os

import numpy as np
import pytest

from crib_memory import protocol
from crib_memory.cli import main
from crib_memory.config import RunSpec, dump_config
from crib_memory.errors import ProtocolError
from crib_memory.noise import dephasing_factor
from crib_memory.protocol import cmd_analytic, cmd_run, cmd_sweep, dumps_summary, run_protocol

SMALL = {"medium": {"n_z": 20}, "broadening": {"n_classes": 101}}


def small(**sections):
    spec = RunSpec().updated(**SMALL)
    return spec.updated(**sections) if sections else spec


def write_config(tmp_path, spec, name="run.ini"):
    path = tmp_path / name
    path.write_text(dump_config(spec))
    return str(path)


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# run -------------------------------------------------------------------------------

def test_run_writes_summary_and_grids(tmp_path):
    spec = small(noise={"k3": 5.0})
    summary = cmd_run(spec, str(tmp_path))
    assert sorted(os.listdir(tmp_path)) == ["absorption.csv", "retrieval-backward.csv", "summary.json"]
    rows = np.loadtxt(tmp_path / "absorption.csv", delimiter=",", skiprows=1)
    n_t = spec.absorption_times().size
    assert rows.shape == (20 * n_t, 4)
    with open(tmp_path / "absorption.csv") as fh:
        assert fh.readline().strip() == "t,z,I13,I23"
    rows = np.loadtxt(tmp_path / "retrieval-backward.csv", delimiter=",", skiprows=1)
    assert rows.shape == (20 * spec.retrieval_times().size, 4)
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk == json.loads(dumps_summary(summary))
    assert on_disk["schema_version"] == 1 and on_disk["seed"] == 0
    assert on_disk["parameters"]["noise"]["k3"] == 5.0


def test_grids_can_be_skipped(tmp_path):
    cmd_run(small(output={"write_grids": False}), str(tmp_path))
    assert os.listdir(tmp_path) == ["summary.json"]


def test_paper_runs():
    back = run_protocol(RunSpec().updated(noise={"k3": 5.0}))
    assert 0.775 <= back.diagnostics.efficiency_total <= 0.79
    fwd = run_protocol(RunSpec().updated(noise={"k3": 5.0}, protocol={"direction": "forward"}))
    assert abs(fwd.diagnostics.efficiency_total_max_over_z - 0.43) <= 0.01
    assert fwd.summary["efficiency"]["direction"] == "forward"


def test_empty_medium_run():
    s = run_protocol(small(medium={"optical_depth": 0.0})).summary
    assert s["efficiency"]["exit"]["total"] == 0.0
    assert s["fidelity"]["conditional"] is None
    assert s["diagnostics"]["weak_field_pass"] is True


def test_summary_is_thread_invariant():
    spec = small(noise={"k3": 5.0, "mode": "monte_carlo", "n_samples": 100, "seed": 17})
    a = dumps_summary(run_protocol(spec, threads=1).summary)
    b = dumps_summary(run_protocol(spec, threads=3).summary)
    assert a == b


def test_failure_leaves_no_partial_output(tmp_path, monkeypatch):
    def boom(record, path):
        open(path, "w").close()
        raise ProtocolError("disk full")

    monkeypatch.setattr(protocol, "write_stage_grid", boom)
    with pytest.raises(ProtocolError):
        cmd_run(small(), str(tmp_path))
    assert os.listdir(tmp_path) == []


# sweep and analytic tables ---------------------------------------------------------

def test_sweep_table(tmp_path):
    rows = cmd_sweep(RunSpec(), [4.5, 10.0], [0.0, 20.0], str(tmp_path))
    table = read_table(tmp_path / "sweep.csv")
    assert len(table) == len(rows) == 4
    assert list(table[0]) == list(protocol.SWEEP_COLUMNS)
    by_point = {(float(r["optical_depth"]), float(r["k3"])): r for r in table}
    for depth in (4.5, 10.0):
        assert float(by_point[depth, 0.0]["efficiency_exit"]) == 0.0
    deep = float(by_point[10.0, 20.0]["efficiency_exit"])
    assert abs(deep - dephasing_factor(20.0) ** 2) <= 0.01
    assert abs(deep - 0.950) <= 0.01
    assert abs(deep - float(by_point[10.0, 20.0]["analytic_exit"])) <= 0.01


def test_forward_sweep_peaks_near_depth_two():
    spec = RunSpec().updated(protocol={"direction": "forward"})
    rows = protocol.sweep(spec, [1.5, 2.0, 2.5], [math.inf])
    eff = [r[3] for r in rows]
    assert int(np.argmax(eff)) == 1
    assert abs(eff[1] - 0.541) <= 0.015


def test_sweep_thread_invariant():
    spec = small()
    assert protocol.sweep(spec, [1.0, 3.0], [1.0], threads=1) == protocol.sweep(spec, [1.0, 3.0], [1.0], threads=2)
    with pytest.raises(ValueError):
        protocol.sweep(spec, [], [1.0])


def test_analytic_tables(tmp_path):
    names = cmd_analytic(RunSpec(), str(tmp_path))
    assert sorted(os.listdir(tmp_path)) == names
    mx = {float(r["k3"]): r for r in read_table(tmp_path / "max_efficiency.csv")}
    assert float(mx[5.0]["backward"]) == pytest.approx(0.798, abs=5e-4)
    assert float(mx[5.0]["forward"]) == pytest.approx(0.432, abs=5e-4)
    gam = {float(r["optical_depth"]): r for r in read_table(tmp_path / "retrieval_coefficients.csv")}
    assert float(gam[4.5]["gamma_backward"]) == pytest.approx(0.9889, abs=1e-4)
    k = read_table(tmp_path / "dephasing_factor.csv")
    assert float(k[0]["k"]) == 0 and float(k[0]["K"]) == 0
    fid = read_table(tmp_path / "phase_fidelity.csv")
    assert all(0 <= float(r["fidelity"]) <= 1 + 1e-12 for r in fid)


# command line ---------------------------------------------------------------------

def test_cli_run_exit_zero(tmp_path, capsys):
    cfg = write_config(tmp_path, small())
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out"), "--seed", "3"]) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["seed"] == 3
    assert json.loads(capsys.readouterr().out)["direction"] == "backward"


def test_cli_config_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[broadening]\nn_classes = 200\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "n_classes must be odd" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 1
    assert main(["run", "--threads", "0", "--out", str(tmp_path / "o")]) == 1


def test_cli_numerical_failure_exit_two(tmp_path, capsys):
    cfg = tmp_path / "huge.ini"
    cfg.write_text("[pulse]\npeak = 1e305\n[medium]\nn_z = 5\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert "numerical failure" in capsys.readouterr().err
    assert os.listdir(out) == []


def test_cli_sweep_and_analytic(tmp_path, capsys):
    cfg = write_config(tmp_path, small())
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"),
                 "--depths", "1,2", "--k3", "5"]) == 0
    assert len(read_table(tmp_path / "s" / "sweep.csv")) == 2
    assert main(["analytic", "--out", str(tmp_path / "a")]) == 0
    assert "max_efficiency.csv" in capsys.readouterr().out


def test_cli_validate_is_deterministic(tmp_path, capsys):
    reports = []
    for name in ("v1", "v2"):
        out = tmp_path / name
        assert main(["validate", "--criteria", "7,10", "--out", str(out), "--seed", "1"]) == 0
        reports.append((out / "validation.json").read_bytes())
    assert reports[0] == reports[1]
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("[PASS] C7") and lines[1].startswith("[PASS] C10")


@pytest.mark.slow
def test_cli_validate_coarse_grid_fails_convergence(tmp_path, capsys):
    cfg = write_config(tmp_path, RunSpec().updated(medium={"n_z": 10}))
    assert main(["validate", "--config", cfg, "--criteria", "11", "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().out.startswith("[FAIL] C11")
    rep = json.loads((tmp_path / "validation.json").read_text())
    assert rep["passed"] is False
