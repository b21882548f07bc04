import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nablavar.cli import main

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"
GOLDEN = sorted(PROBLEMS.glob("*.json"))


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def penalty_problem(tmp_path, **extra):
    data = json.loads((PROBLEMS / "penalty.json").read_text())
    data.update(extra)
    return write_json(tmp_path / "penalty.json", data)


def test_golden_problems_exist():
    assert len(GOLDEN) >= 5


@pytest.mark.parametrize("problem", GOLDEN, ids=lambda p: p.stem)
def test_solve_check_round_trip(problem, tmp_path, capsys):
    assert main(["solve", str(problem), "--out-dir", str(tmp_path)]) == 0
    csv = tmp_path / f"{problem.stem}.trajectory.csv"
    sol = json.loads((tmp_path / f"{problem.stem}.solution.json").read_text())
    assert csv.exists()
    assert sol["report"]["max_abs"] <= 1e-9
    assert main(["check", str(problem), str(csv)]) == 0
    assert "PASS" in capsys.readouterr().out


def test_solve_is_deterministic(tmp_path):
    problem = str(PROBLEMS / "penalty_control.json")
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["solve", problem, "--out-dir", str(out)]) == 0
        outputs.append(((out / "penalty_control.solution.json").read_bytes(), (out / "penalty_control.trajectory.csv").read_bytes()))
    assert outputs[0] == outputs[1]


def test_lagrange_csv_layout(tmp_path):
    assert main(["solve", str(PROBLEMS / "fixed_ends.json"), "--out-dir", str(tmp_path), "--format", "csv"]) == 0
    lines = (tmp_path / "fixed_ends.trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x,xnabla,el_residual"
    assert len(lines) == 6
    # no derivative at the minimum, no EL residual before t_2
    assert lines[1].split(",")[2:] == ["", ""]
    assert lines[2].split(",")[3] == ""
    assert not (tmp_path / "fixed_ends.solution.json").exists()


def test_control_csv_layout(tmp_path):
    assert main(["solve", str(PROBLEMS / "constant_extremal.json"), "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "constant_extremal.trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x,u_rho,p,r1,r2,r3"
    assert len(lines) == 6


def test_solver_failure_exits_3(tmp_path, capsys):
    assert main(["solve", penalty_problem(tmp_path), "--tol", "1e-20", "--max-iters", "1", "--out-dir", str(tmp_path)]) == 3
    assert "error" in capsys.readouterr().err


def test_domain_error_during_solve_exits_3(tmp_path):
    problem = write_json(
        tmp_path / "p.json",
        {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "v^2 + ln(x - 5)"},
    )
    assert main(["solve", problem, "--out-dir", str(tmp_path)]) == 3


CORRUPT = {
    "not_json": "{ this is not json",
    "no_kind": {"timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "v^2"},
    "bad_kind": {"kind": "hamilton", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "v^2"},
    "syntax": {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "v^^2"},
    "unknown_function": {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "tan(v)"},
    "wrong_variable": {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "u^2"},
    "unbound_param": {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "k*v^2"},
    "bad_endpoint": {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "v^2", "x_a": "pinned"},
    "bad_options": {"kind": "lagrange", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "lagrangian": "v^2", "solver": {"tol": -1}},
    "missing_dynamics": {"kind": "control", "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 4}, "integrand": "u^2"},
    "array_root": [1, 2, 3],
}


@pytest.mark.parametrize("name", sorted(CORRUPT))
def test_corrupt_problem_exits_2(name, tmp_path):
    path = tmp_path / f"{name}.json"
    content = CORRUPT[name]
    path.write_text(content if isinstance(content, str) else json.dumps(content))
    assert main(["solve", str(path), "--out-dir", str(tmp_path)]) == 2


def test_missing_file_exits_2(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == 2


def test_bad_timescale_exits_4(tmp_path):
    problem = write_json(
        tmp_path / "p.json",
        {"kind": "lagrange", "timescale": {"type": "points", "values": [0, 1, 1 + 1e-14]}, "lagrangian": "v^2"},
    )
    assert main(["solve", problem]) == 4


def test_usage_errors_exit_2():
    assert main([]) == 2
    assert main(["solve"]) == 2
    assert main(["frobnicate"]) == 2


@pytest.mark.parametrize(
    "body",
    [
        "t,x\n0,1\n",
        "t,y\n0,0\n0.1,0\n",
        "t,x\n" + "".join(f"{i / 10},abc\n" for i in range(11)),
        "t,x\n" + "".join(f"{i / 10 + 0.01},0\n" for i in range(11)),
        "t,x\n" + "".join(f"{i / 10},nan\n" for i in range(11)),
    ],
    ids=["short", "missing_column", "non_numeric", "wrong_times", "nan"],
)
def test_corrupt_trajectory_exits_2(body, tmp_path):
    traj = tmp_path / "traj.csv"
    traj.write_text(body)
    assert main(["check", str(PROBLEMS / "penalty.json"), str(traj)]) == 2


def test_check_rejects_non_extremal(tmp_path, capsys):
    traj = tmp_path / "line.csv"
    traj.write_text("t,x\n" + "".join(f"{t!r},{t!r}\n" for t in np.linspace(0, 1, 11).tolist()))
    assert main(["check", str(PROBLEMS / "penalty.json"), str(traj)]) == 5
    assert "FAIL" in capsys.readouterr().out
    assert main(["check", str(PROBLEMS / "penalty.json"), str(traj), "--tol", "10"]) == 0


def test_eval_prints_action(tmp_path, capsys):
    # x = t/2 with alpha = beta = 2: 1/4 + 0 + 2*(1/2)^2 = 0.75
    traj = tmp_path / "half.csv"
    traj.write_text("t,x\n" + "".join(f"{t!r},{t / 2!r}\n" for t in np.linspace(0, 1, 11).tolist()))
    assert main(["eval", str(PROBLEMS / "penalty.json"), str(traj)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.75, rel=1e-15)


def test_eval_control_objective(tmp_path, capsys):
    assert main(["solve", str(PROBLEMS / "constant_extremal.json"), "--out-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["eval", str(PROBLEMS / "constant_extremal.json"), str(tmp_path / "constant_extremal.trajectory.csv")]) == 0
    assert abs(float(capsys.readouterr().out)) < 1e-18


UNIT = '{"type": "points", "values": [0, 1, 2, 3]}'


def test_integrate(capsys):
    assert main(["integrate", "--timescale", UNIT, "--expr", "t"]) == 0
    assert float(capsys.readouterr().out) == 6.0
    assert main(["integrate", "--timescale", UNIT, "--expr", "k*t", "--param", "k=2", "--from", "1", "--to", "3"]) == 0
    assert float(capsys.readouterr().out) == 10.0


def test_integrate_from_file(tmp_path, capsys):
    path = tmp_path / "ts.json"
    path.write_text('{"type": "qscale", "q": 2, "kmin": 0, "kmax": 3}')
    assert main(["integrate", "--timescale", str(path), "--expr", "1"]) == 0
    assert float(capsys.readouterr().out) == 7.0


def test_differentiate(capsys):
    assert main(["differentiate", "--timescale", UNIT, "--expr", "k*t^2", "--param", "k=3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["t,value", "1,3", "2,9", "3,15"]


@pytest.mark.parametrize(
    "argv",
    [
        ["integrate", "--timescale", UNIT, "--expr", "x"],
        ["integrate", "--timescale", UNIT, "--expr", "k*t"],
        ["integrate", "--timescale", UNIT, "--expr", "t", "--param", "k"],
        ["integrate", "--timescale", UNIT, "--expr", "t", "--from", "0.5"],
        ["integrate", "--timescale", "{bad", "--expr", "t"],
        ["differentiate", "--timescale", UNIT, "--expr", "1/(t-1)"],
    ],
)
def test_integrate_bad_input_exits_2(argv):
    assert main(argv) == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "nablavar", "solve", str(PROBLEMS / "fixed_ends.json"), "--out-dir", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert out.returncode == 0, out.stderr
    assert "objective = " in out.stdout
