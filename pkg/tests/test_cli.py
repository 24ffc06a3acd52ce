from __future__ import annotations

import json
import subprocess
import sys

import pytest

from incentix.cli import main

from conftest import SCENARIOS

CLASSROOM = str(SCENARIOS / "classroom.json")
WEAK = str(SCENARIOS / "classroom_weak.json")
NONCONVEX = str(SCENARIOS / "nonconvex.json")
A22ZERO = str(SCENARIOS / "nonconvex_a22zero.json")
PATH3 = str(SCENARIOS / "gadget_path3.json")
K2 = str(SCENARIOS / "gadget_k2.json")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_validate_ok(capsys):
    code, doc = run_json(capsys, "validate", CLASSROOM)
    assert code == 0
    assert doc["ok"] and not doc["errors"] and not doc["warnings"]


def test_validate_warnings(capsys):
    # The a22zero variant carries an action with no outgoing edges.
    code, doc = run_json(capsys, "validate", A22ZERO)
    assert code == 1
    assert doc["warnings"] and not doc["errors"]


def test_validate_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps(
            {
                "actions": ["a"],
                "features": [
                    {"name": "X", "f": {"family": "linear", "scale": 1.0}}
                ],
                "edges": [{"action": "a", "feature": "X", "weight": "-1/2"}],
                "budget": 1,
            }
        )
    )
    code, doc = run_json(capsys, "validate", str(bad))
    assert code == 2
    assert doc["errors"]


def test_input_error_exits(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "nope.json"))
    assert code == 2 and "error:" in err
    mangled = tmp_path / "mangled.json"
    mangled.write_text("{oops")
    code, _, err = run(capsys, "kappa", str(mangled), "--action", "a")
    assert code == 2 and "error:" in err


def test_kappa_action(capsys):
    code, doc = run_json(capsys, "kappa", CLASSROOM, "--action", "study")
    assert code == 0
    assert doc["kappa"] == "1" and doc["verdict"] is True
    assert doc["witness_z"] is None
    code, weak = run_json(capsys, "kappa", WEAK, "--action", "study")
    assert weak["kappa"] == "2/3" and weak["verdict"] is False
    from fractions import Fraction

    assert sum(Fraction(v) for v in weak["witness_y"]) == Fraction(2, 3)


def test_kappa_numeric_fallback(capsys):
    # "1" is an action name in this file and wins over the index reading;
    # "0" is not a name, so it resolves as a position.
    code, doc = run_json(capsys, "kappa", NONCONVEX, "--action", "0")
    assert code == 0 and doc["kappa"] == "1"
    code, doc = run_json(capsys, "kappa", CLASSROOM, "--action", "1")
    assert code == 0 and doc["kappa"] == "1"


def test_kappa_set(capsys):
    code, doc = run_json(capsys, "kappa", CLASSROOM, "--set", "cheat,copy")
    assert code == 0
    assert doc["kappa"] == "3/4" and doc["verdict"] is False
    assert doc["witness_z"] is not None


def test_kappa_unknown_action(capsys):
    code, _, err = run(capsys, "kappa", CLASSROOM, "--action", "bogus")
    assert code == 2 and "bogus" in err


def test_kappa_flags_exclusive():
    with pytest.raises(SystemExit) as info:
        main(["kappa", CLASSROOM, "--action", "a", "--set", "a,b"])
    assert info.value.code == 2


def test_synthesize_ok(capsys):
    code, doc = run_json(capsys, "synthesize", CLASSROOM, "--profile", "0,1,0")
    assert code == 0
    assert doc["beta"] == [1.0, 0.5]
    assert doc["kkt_residual"] <= 1e-7
    assert doc["kappa"] == "1" and doc["verdict"] is True


def test_synthesize_obstruction(capsys):
    code, doc = run_json(
        capsys, "synthesize", CLASSROOM, "--profile", "1/2,0,1/2"
    )
    assert code == 3
    assert doc["kappa"] == "3/4" and doc["verdict"] is False
    assert "beta" not in doc


def test_synthesize_budget_mismatch(capsys):
    code, _, err = run(capsys, "synthesize", CLASSROOM, "--profile", "1/3,1/3,0")
    assert code == 2 and "budget" in err


def test_respond(capsys):
    code, doc = run_json(capsys, "respond", CLASSROOM, "--beta", "1,1")
    assert code == 0
    assert doc["profile"] == pytest.approx([0.0, 1.0, 0.0], abs=1e-9)
    assert doc["report"]["verdict"] is True
    code, doc = run_json(
        capsys, "respond", CLASSROOM, "--beta", "1,1", "--designated", "cheat"
    )
    assert doc["undesired_support"] == ["study"]
    code, doc = run_json(
        capsys, "respond", CLASSROOM, "--beta", "1,1", "--designated", "study"
    )
    assert doc["undesired_support"] == []


def test_respond_bad_mechanism(capsys):
    code, _, err = run(capsys, "respond", CLASSROOM, "--beta", "1,-1")
    assert code == 2 and "negative" in err
    code, _, err = run(capsys, "respond", CLASSROOM, "--beta", "1,1,1")
    assert code == 2


def test_optimize_card(capsys):
    code, doc = run_json(
        capsys, "optimize", PATH3,
        "--designated", "u,v,w", "--objective", "card",
    )
    assert code == 0
    assert doc["value"] == 2
    assert doc["support"] == ["u", "w"]
    assert doc["maximal_supports"] == [["u", "w"], ["v"]]


def test_optimize_neg_sq_dist(capsys):
    code, doc = run_json(
        capsys, "optimize", NONCONVEX,
        "--designated", "1,3", "--objective", "neg_sq_dist:1/3,0,2/3,0",
    )
    assert code == 0
    assert doc["value"] == pytest.approx(0.0, abs=1e-6)
    assert doc["x_star"] == pytest.approx([1 / 3, 0, 2 / 3, 0], abs=1e-4)


def test_optimize_infeasible(capsys):
    code, _, err = run(
        capsys, "optimize", WEAK, "--designated", "study", "--objective", "card"
    )
    assert code == 3 and "infeasible designated set" in err


def test_optimize_bad_objective(capsys):
    code, _, err = run(
        capsys, "optimize", CLASSROOM, "--designated", "study",
        "--objective", "parabola",
    )
    assert code == 2 and "unknown objective" in err
    code, _, err = run(
        capsys, "optimize", CLASSROOM, "--designated", "study",
        "--objective", "dot:1,2",
    )
    assert code == 2 and "3 entries" in err


def sweep_rows(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "beta_i,beta_j,support,utility"
    return [line.split(",") for line in lines[1:]]


def point_args(b2, b3):
    return (
        "sweep", A22ZERO,
        "--feature-grid", f"F2:{b2}:{b2}:1",
        "--feature-grid", f"F3:{b3}:{b3}:1",
        "--fixed", "F1=1",
    )


def test_sweep_single_points(capsys):
    # Interior points of the support regions; boundaries are avoided
    # because the tie there makes the label solver-dependent.
    ((_, _, support, _),) = sweep_rows(capsys, *point_args(0.36, 0.24))
    assert support == "1+3"
    ((_, _, support, _),) = sweep_rows(capsys, *point_args(0.7041, 0.6735))
    assert support == "1+3"
    ((_, _, support, _),) = sweep_rows(capsys, *point_args(0.3, 0.9))
    assert support == "1+3+4"
    ((_, _, support, utility),) = sweep_rows(capsys, *point_args(0.05, 0.05))
    assert support == "1"
    assert float(utility) > 0


def test_sweep_grid_shape_and_zero_row(capsys):
    rows = sweep_rows(
        capsys, "sweep", A22ZERO,
        "--feature-grid", "F2:0:1.2:3",
        "--feature-grid", "F3:0:1.2:3",
    )
    assert len(rows) == 9
    # With no fixed entries the origin is the zero mechanism.
    assert rows[0][2] == "" and float(rows[0][3]) == 0.0
    assert all(len(r) == 4 for r in rows)


def test_sweep_is_deterministic(capsys):
    argv = (
        "sweep", A22ZERO,
        "--feature-grid", "F2:0.2:1.0:4",
        "--feature-grid", "F3:0.2:1.0:4",
        "--fixed", "F1=1",
    )
    code, first, _ = run(capsys, *argv)
    code2, second, _ = run(capsys, *argv)
    assert code == code2 == 0
    assert first == second


def test_sweep_argument_errors(capsys):
    code, _, err = run(
        capsys, "sweep", A22ZERO, "--feature-grid", "F2:0:1:2"
    )
    assert code == 2 and "exactly two" in err
    code, _, err = run(
        capsys, "sweep", A22ZERO,
        "--feature-grid", "F2:0:1:2", "--feature-grid", "F2:0:1:2",
    )
    assert code == 2 and "distinct" in err
    code, _, err = run(
        capsys, "sweep", A22ZERO,
        "--feature-grid", "F2:1:0:5", "--feature-grid", "F3:0:1:2",
    )
    assert code == 2 and "zero width" in err
    code, _, err = run(
        capsys, "sweep", A22ZERO,
        "--feature-grid", "F2:0:1:2", "--feature-grid", "F3:0:1:2",
        "--fixed", "F2=1",
    )
    assert code == 2 and "already swept" in err
    code, _, err = run(
        capsys, "sweep", A22ZERO,
        "--feature-grid", "FX:0:1:2", "--feature-grid", "F3:0:1:2",
    )
    assert code == 2 and "FX" in err


def test_gadget_matches_fixtures(capsys):
    code, out, _ = run(capsys, "gadget", "u-v,v-w")
    assert code == 0
    with open(PATH3, "r", encoding="utf-8") as fh:
        assert out == fh.read()
    code, out, _ = run(capsys, "gadget", "u-v")
    with open(K2, "r", encoding="utf-8") as fh:
        assert out == fh.read()


def test_gadget_file_and_errors(capsys, tmp_path):
    listing = tmp_path / "edges.txt"
    listing.write_text("u-v\nv-w\n")
    code, out, _ = run(capsys, "gadget", "--file", str(listing))
    with open(PATH3, "r", encoding="utf-8") as fh:
        assert out == fh.read()
    code, _, err = run(capsys, "gadget")
    assert code == 2
    code, _, err = run(capsys, "gadget", "u-")
    assert code == 2 and "edge token" in err


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "incentix.cli", "validate", CLASSROOM],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["ok"]
