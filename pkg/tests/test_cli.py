import csv
import io
import json

import numpy as np
import pytest

from mifb import diagnostics
from mifb.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_validate_zero_inertia_is_admissible():
    code, out = run("validate", "--builtin", "poly-p4", "--preset", "none")
    assert code == 0 and "admissible yes" in out


def test_validate_hand_example_is_inadmissible(tmp_path):
    inst = write_json(tmp_path / "i.json", {"kind": "least_squares", "A": [[1.0]], "b": [0.0],
                                            "regularizer": {"type": "zero"}})
    params = write_json(tmp_path / "p.json", {"s": 1, "mu": 0.1, "nu": 0.1, "a": [[0.2]], "b": [[0.0]],
                                              "gamma": {"type": "constant", "value": 0.5}})
    code, out = run("validate", "--instance", inst, "--params", params)
    assert code == 1
    assert "beta_inf   0.35" in out and "delta      -0.05" in out


def test_validate_step_too_large_is_input_error(tmp_path, capsys):
    params = write_json(tmp_path / "p.json", {"a": [[0.0]], "gamma": {"type": "constant", "value": 1.0}})
    code, _ = run("validate", "--builtin", "poly-p4", "--params", params)
    assert code == 2 and "outside (0, 1/L)" in capsys.readouterr().err


def test_unreadable_and_malformed_inputs(tmp_path, capsys):
    assert run("validate", "--instance", str(tmp_path / "none.json"), "--preset", "none")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("validate", "--instance", str(bad), "--preset", "none")[0] == 2
    assert run("validate", "--preset", "none")[0] == 2  # missing instance source
    assert run("frobnicate")[0] == 2


def test_solve_poly_writes_trace(tmp_path):
    code, out = run("solve", "--builtin", "poly-p4", "--preset", "none", "--max-iters", "5000",
                    "--out", str(tmp_path))
    assert code in (0, 3)
    rows = list(csv.DictReader(open(tmp_path / "trace_none.csv")))
    assert len(rows) == 5001
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["runs"]["none"]["termination"] == "max_iters"
    assert "power_law" in out


def test_solve_fixed_point_start_exits_zero(tmp_path):
    inst = write_json(tmp_path / "i.json", {"kind": "poly1d", "p": 4, "x0": [0.0]})
    code, out = run("solve", "--instance", inst, "--preset", "none")
    assert code == 0 and "after 1 iterations" in out


def test_solve_inadmissible_needs_force():
    code, out = run("solve", "--builtin", "poly-p4", "--preset", "ifb-equal", "--max-iters", "50")
    assert code == 1 and "--force" in out
    code, _ = run("solve", "--builtin", "poly-p4", "--preset", "ifb-equal", "--max-iters", "50", "--force")
    assert code == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_solve_numerical_failure_exit_code(tmp_path):
    # the gradient A^T A x overflows on the first iteration
    inst = write_json(tmp_path / "i.json", {"kind": "least_squares", "A": [[1e200]], "b": [0.0],
                                            "lipschitz": 1.0, "regularizer": {"type": "zero"},
                                            "x0": [1.0]})
    code, out = run("solve", "--instance", inst, "--preset", "none")
    assert code == 4 and "numerical_failure" in out


def test_fit_synthetic_power_and_linear(tmp_path):
    k = np.arange(1, 1001)
    p = tmp_path / "pow.csv"
    p.write_text("k,phi\n" + "".join(f"{i},{float(i) ** -2.0!r}\n" for i in k))
    code, out = run("fit", str(p))
    rep = json.loads(out)
    assert code == 0 and rep["regime"] == "power_law"
    assert rep["power_exponent"] == pytest.approx(-2.0, abs=1e-6)
    g = tmp_path / "geo.csv"
    g.write_text("k,phi\n" + "".join(f"{i},{float(0.9 ** i)!r}\n" for i in k[:200]))
    rep = json.loads(run("fit", str(g), "--theta", "0.5")[1])
    assert rep["regime"] == "linear" and rep["linear_factor"] == pytest.approx(0.9, abs=1e-6)
    assert rep["predicted_regime"] == "linear"


def test_fit_malformed_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("step,value\n1,2\n")
    assert run("fit", str(bad))[0] == 2
    bad.write_text("k,phi\n1,abc\n")
    assert run("fit", str(bad))[0] == 2


@pytest.mark.parametrize("suite", ["scad-ls", "poly-p18"])
def test_fit_round_trip_matches_pipeline(tmp_path, suite):
    code, _ = run("reproduce", "--builtin", suite, "--out", str(tmp_path),
                  *(["--max-iters", "3000"] if suite.startswith("poly") else []))
    summary = json.loads((tmp_path / "summary.json").read_text())
    theta = summary["kl_exponent"]
    for name, entry in summary["runs"].items():
        code, out = run("fit", str(tmp_path / f"trace_{name}.csv"), "--theta", repr(theta))
        assert code == 0
        assert json.loads(out) == entry["rate"]


def test_reproduce_l1_passes(tmp_path):
    code, out = run("reproduce", "--builtin", "l1-ls", "--out", str(tmp_path))
    assert code == 0
    assert out.count(" yes") == 4


def test_reproduce_reports_mismatch():
    # 30 iterations are far too few for the polynomial tail
    code, out = run("reproduce", "--builtin", "poly-p4", "--max-iters", "30")
    assert code == 1 and "NO" in out


def test_lipschitz_overflow_is_numerical_failure(tmp_path, capsys):
    inst = write_json(tmp_path / "i.json", {"kind": "least_squares", "A": [[1e200]], "b": [0.0],
                                            "regularizer": {"type": "zero"}})
    assert run("validate", "--instance", inst, "--preset", "none")[0] == 4
    assert "power iteration" in capsys.readouterr().err
