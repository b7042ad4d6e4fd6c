"""End-to-end command-line workflows on temporary files.

Commands run in-process through cli.run so exit codes and artifacts can be
asserted without spawning interpreters; one smoke test covers the installed
console script.
"""

import json
import shutil
import subprocess

import numpy as np
import pytest

from swingctl.cli import run
from swingctl.scenario_io import bundled_path, load_checkpoint, load_curve, load_trajectory


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n")


@pytest.fixture()
def files(tmp_path):
    """2-bus network plus a short quiet scenario and a stepped one."""
    net = tmp_path / "net.json"
    shutil.copy(bundled_path("net_2bus.json"), net)
    quiet = tmp_path / "quiet.json"
    write_json(
        quiet,
        {
            "format_version": 1,
            "kind": "scenario",
            "T": 1.0,
            "dt": 0.01,
            "init": {"omega_range": 0.0, "p_frac": 0.0},
            "label": "rest",
        },
    )
    step = tmp_path / "step.json"
    write_json(
        step,
        {
            "format_version": 1,
            "kind": "scenario",
            "T": 2.0,
            "dt": 0.01,
            "disturbances": [{"bus": 1, "dp": -0.25, "t0": 0.2, "t1": 1.0}],
            "init": {"omega_range": 0.0, "p_frac": 0.0},
            "label": "step",
        },
    )
    train = tmp_path / "train.json"
    write_json(
        train,
        {
            "format_version": 1,
            "kind": "scenario",
            "T": 10.0,
            "dt": 0.005,
            "disturbances": [{"bus": 1, "dp": -0.15, "t0": 0.0, "t1": 0.1}],
            "init": {"omega_range": 0.1, "p_frac": 0.1},
            "label": "train",
        },
    )
    return {"dir": tmp_path, "net": str(net), "quiet": str(quiet), "step": str(step), "train": str(train)}


def simulate(files, scenario_key, out, report, extra=()):
    return run(
        [
            "simulate",
            "--net",
            files["net"],
            "--scenario",
            files[scenario_key],
            "--out",
            str(out),
            "--report",
            str(report),
            *extra,
        ]
    )


def test_simulate_zero_controller_at_rest(files, capsys):
    out = files["dir"] / "traj.csv"
    report = files["dir"] / "verdicts.json"
    assert simulate(files, "quiet", out, report) == 0
    stdout = capsys.readouterr().out
    assert "frequency_invariance: pass" in stdout
    assert out.exists() and report.exists()
    obj = json.loads(report.read_text())
    assert obj["all_pass"] is True
    assert {c["name"] for c in obj["checks"]} == {
        "frequency_invariance",
        "lyapunov_descent",
        "budget_conservation",
        "convergence",
    }
    traj = load_trajectory(out)
    assert np.abs(traj.omega).max() < 1e-12


def test_simulate_artifacts_are_byte_identical(files):
    args = ["--noise", "0.002", "--seed", "5"]
    a, ra = files["dir"] / "a.csv", files["dir"] / "a.json"
    b, rb = files["dir"] / "b.csv", files["dir"] / "b.json"
    assert simulate(files, "step", a, ra, args) == 0
    assert simulate(files, "step", b, rb, args) == 0
    assert a.read_bytes() == b.read_bytes()
    assert ra.read_text() == rb.read_text()


def test_simulate_seed_changes_noise_draws(files):
    a, b = files["dir"] / "a.csv", files["dir"] / "b.csv"
    r = files["dir"] / "r.json"
    assert simulate(files, "step", a, r, ["--noise", "0.002", "--seed", "1"]) == 0
    assert simulate(files, "step", b, r, ["--noise", "0.002", "--seed", "2"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_simulate_safe_controller_on_step(files, capsys):
    # the event ends at t=1; by t=12 the closed loop is back at the tolerance
    out = files["dir"] / "safe.csv"
    report = files["dir"] / "safe.json"
    code = simulate(files, "step", out, report, ["--controller", "safe", "--horizon", "12"])
    assert code == 0
    assert json.loads(report.read_text())["all_pass"] is True
    capsys.readouterr()


def test_train_then_simulate_and_compare_from_checkpoint(files, capsys):
    ckpt = files["dir"] / "ckpt.json"
    curve = files["dir"] / "curve.csv"
    code = run(
        [
            "train",
            "--net",
            files["net"],
            "--scenario",
            files["train"],
            "--episodes",
            "2",
            "--batch",
            "2",
            "--steps",
            "50",
            "--seed",
            "3",
            "--quiet",
            "--out",
            str(ckpt),
            "--curve",
            str(curve),
        ]
    )
    assert code == 0
    params, meta = load_checkpoint(ckpt)
    assert params.kind == "constrained"
    assert meta["config"]["episodes"] == 2 and meta["config"]["seed"] == 3
    assert load_curve(curve).shape == (2, 5)

    out = files["dir"] / "pol.csv"
    report = files["dir"] / "pol.json"
    assert simulate(files, "step", out, report, ["--controller", str(ckpt)]) == 0

    cmp_path = files["dir"] / "cmp.csv"
    code = run(
        [
            "compare",
            "--net",
            files["net"],
            "--scenario",
            files["step"],
            "--controller",
            "zero",
            "--controller",
            f"trained={ckpt}",
            "--controller",
            "safe",
            "--train-window",
            "1.0",
            "--out",
            str(cmp_path),
        ]
    )
    assert code == 0
    lines = cmp_path.read_text().splitlines()
    assert lines[1] == "method,stability,safety,cost,cost_train_window,settle_time_s,worst_nadir_hz"
    assert [ln.split(",")[0] for ln in lines[2:]] == ["zero", "trained", "safe"]
    capsys.readouterr()


def test_train_monotone_policy(files, capsys):
    ckpt = files["dir"] / "mono.json"
    code = run(
        [
            "train",
            "--net",
            files["net"],
            "--scenario",
            files["train"],
            "--policy",
            "monotone",
            "--episodes",
            "2",
            "--batch",
            "2",
            "--steps",
            "40",
            "--quiet",
            "--out",
            str(ckpt),
            "--curve",
            str(files["dir"] / "mono_curve.csv"),
        ]
    )
    assert code == 0
    params, _ = load_checkpoint(ckpt)
    assert params.kind == "monotone"
    out = files["dir"] / "mono.csv"
    assert simulate(files, "step", out, files["dir"] / "mono_v.json", ["--controller", str(ckpt)]) == 0
    capsys.readouterr()


def test_verify_passes_then_fails_on_corrupted_budgets(files, capsys):
    out = files["dir"] / "traj.csv"
    report = files["dir"] / "verdicts.json"
    assert simulate(files, "quiet", out, report) == 0
    code = run(["verify", "--net", files["net"], "--traj", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    cols = lines[10].split(",")
    cols[5] = "0.5"  # b_1 with no matching withdrawal elsewhere
    lines[10] = ",".join(cols)
    out.write_text("\n".join(lines) + "\n")
    code = run(["verify", "--net", files["net"], "--traj", str(out)])
    assert code == 1
    assert "budget_conservation: FAIL" in capsys.readouterr().out


def test_verify_writes_report_when_asked(files, capsys):
    out = files["dir"] / "traj.csv"
    assert simulate(files, "quiet", out, files["dir"] / "v.json") == 0
    rep = files["dir"] / "again.json"
    assert run(["verify", "--net", files["net"], "--traj", str(out), "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["all_pass"] is True
    capsys.readouterr()


def test_usage_errors_exit_two(files):
    with pytest.raises(SystemExit) as ex:
        run(["simulate", "--net", files["net"]])  # missing --scenario
    assert ex.value.code == 2
    with pytest.raises(SystemExit) as ex:
        run(["simulate", "--net", files["net"], "--scenario", files["quiet"], "--projection", "maybe"])
    assert ex.value.code == 2
    with pytest.raises(SystemExit) as ex:
        run(["explode"])
    assert ex.value.code == 2


def test_missing_input_exits_one_with_message(files, capsys):
    code = run(["simulate", "--net", str(files["dir"] / "ghost.json"), "--scenario", files["quiet"]])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error: SchemaError")
    assert "file not found" in err


def test_malformed_band_exits_one(files, capsys):
    code = run(["simulate", "--net", files["net"], "--scenario", files["quiet"], "--band", "0.2"])
    assert code == 1
    assert "--band must be 'lo,hi'" in capsys.readouterr().err


def test_infeasible_network_exits_one(files, capsys):
    bad = files["dir"] / "heavy.json"
    write_json(
        bad,
        {
            "format_version": 1,
            "kind": "network",
            "buses": [
                {"id": 1, "M": 1.0, "D": 1.0, "p_nom": 1.2},
                {"id": 2, "M": 1.0, "D": 1.0, "p_nom": -1.2},
            ],
            "edges": [{"from": 1, "to": 2, "b": 1.0}],
        },
    )
    code = run(["simulate", "--net", str(bad), "--scenario", files["quiet"]])
    assert code == 1
    assert "EquilibriumError" in capsys.readouterr().err


def test_console_script_help():
    proc = subprocess.run(["swingctl", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "compare" in proc.stdout
