import io
import json
import math
import subprocess
import sys

import pytest

from apkit.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def report(*argv):
    code, out, err = call(*argv)
    assert code == 0, err
    return json.loads(out)


def test_periods_example_exact_periods():
    doc = report("periods", "--f", "sin(t1)", "--eps", "1e-6", "--domain", "0:100:1001",
                 "--tau", "0:16*pi:9", "--l", "7")
    taus = [a["tau"][0] for a in doc["report"]["accepted"]]
    assert taus == pytest.approx([2 * math.pi * k for k in range(9)])
    assert doc["report"]["verdicts"] == [{"l": 7.0, "relatively_dense": True}]
    assert doc["job"]["f"] == "sin(t1)" and doc["tool"] == "ap" and doc["version"]


def test_periods_spec_grid_near_multiples():
    doc = report("periods", "--f", "sin(t1)", "--eps", "0.01", "--domain", "0:100:1001",
                 "--tau", "0:50:5001")
    for a in doc["report"]["accepted"]:
        k = round(a["tau"][0] / (2 * math.pi))
        assert abs(a["tau"][0] - 2 * math.pi * k) <= 0.01


def hammerstein_job(tmp_path, **extra):
    job = {"command": "hammerstein", "g": "sin(t1)", "F": "sin(x1)", "kernel": "laplace:0.25:1",
           "L": 1, "grid": "0:20:401", "tol": 1e-8}
    job.update(extra)
    path = tmp_path / "job.json"
    path.write_text(json.dumps(job))
    return str(path)


def test_hammerstein_job(tmp_path):
    doc = report("hammerstein", "--job", hammerstein_job(tmp_path))
    tr = doc["report"]["trace"]
    assert tr["q"] == 0.5 and tr["converged"] and tr["residual"] <= 1e-8
    assert len(doc["report"]["values"]) == 401
    assert doc["job"]["kernel"] == "laplace:0.25:1"


def test_solver_reports_at_requested_points(tmp_path):
    full = report("hammerstein", "--job", hammerstein_job(tmp_path))["report"]
    pts = report("hammerstein", "--job", hammerstein_job(tmp_path), "--points", "5;10")["report"]
    assert pts["points"] == [[5.0], [10.0]]
    # 5 and 10 are grid nodes, so the interpolant reproduces the grid samples
    assert [v[0] for v in pts["values"]] == pytest.approx([full["values"][100][0], full["values"][200][0]], abs=1e-12)


def test_cli_overrides_job(tmp_path):
    code, _, err = call("hammerstein", "--job", hammerstein_job(tmp_path), "--L", "4")
    assert code == 3 and "L*|k|_1" in err


def test_job_command_mismatch(tmp_path):
    code, _, err = call("delay", "--job", hammerstein_job(tmp_path))
    assert code == 2 and "hammerstein" in err


def test_malformed_expression_exit_2():
    code, out, err = call("mean", "--dim", "1", "--f", "sin(t1")
    assert code == 2 and out == ""
    assert "1:7" in err


def test_unknown_identifier_exit_2():
    code, _, err = call("mean", "--dim", "1", "--f", "sin(t2)")
    assert code == 2 and "t2" in err


def test_missing_option_and_bad_grid():
    assert call("periods", "--f", "sin(t1)", "--domain", "0:1:3", "--tau", "0:1:3")[0] == 2
    assert call("periods", "--f", "sin(t1)", "--eps", "1", "--domain", "0:1", "--tau", "0:1:3")[0] == 2
    assert call("nosuch")[0] == 2


def test_evaluation_fault_is_numerical():
    code, _, err = call("mean", "--dim", "1", "--f", "1/t1", "--T", "1,2", "--nodes", "5")
    assert code == 3 and "division by zero" in err


def test_poisson_mass_refusal():
    code, _, err = call("semigroup", "--kind", "poisson", "--t0", "1", "--f", "cis(t1)",
                        "--at", "0:1:2", "--radius", "5")
    assert code == 3 and "mass" in err


def test_deterministic_bytes(tmp_path):
    args = ("sampling", "--n", "1", "--l", "2", "--N", "8", "--trials", "20", "--seed", "4")
    a, b = call(*args)[1], call(*args)[1]
    assert a == b
    doc = json.loads(a)
    assert doc["report"]["seed"] == 4 and doc["report"]["violations"] == 0


def test_out_file_and_csv(tmp_path):
    path = tmp_path / "vp.csv"
    code, out, _ = call("vp", "--f", "cos(t1)", "--k", "1,2,4", "--format", "csv", "--out", str(path))
    assert code == 0 and out == ""
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "k,m,sup_error,kernel_mass,nodes"
    assert float(rows[1].split(",")[2]) == pytest.approx(0.5)
    assert call("mean", "--dim", "1", "--f", "1", "--format", "csv")[0] == 2


def test_mean_coeff_spectrum():
    doc = report("mean", "--dim", "1", "--f", "cis(t1)")
    assert abs(doc["report"]["value"][0]["re"]) <= 0.011
    doc = report("coeff", "--dim", "2", "--f", "3*cis(t1+2*t2)", "--freq", "1,2", "--T", "10,20",
                 "--nodes", "201")
    assert doc["report"]["value"][0]["re"] == pytest.approx(3)
    doc = report("spectrum", "--dim", "1", "--f", "cis(t1) + 0.5*cis(sqrt(2)*t1)",
                 "--candidates", "1;sqrt(2);0;2", "--threshold", "0.1")
    assert [a["freq"][0] for a in doc["report"]["accepted"]] == pytest.approx([1.0, math.sqrt(2)])


def test_recur_decay_split():
    doc = report("recur", "--f", "hs(t1, 60)", "--taus", "8*pi;16*pi;32*pi", "--domain", "0:100:1001")
    assert len(doc["report"]["sup_diff"]) == 3
    doc = report("decay", "--q", "1/(1+t1^2+t2^2)", "--radii", "5,10,20",
                 "--domain=-30:30:61,-30:30:61")
    assert doc["report"]["passed"]
    doc = report("split", "--f", "sin(t1) + 1/(1+t1^2)", "--g", "sin(t1)", "--q", "1/(1+t1^2)",
                 "--domain", "0:100:2001", "--radii", "5,10,20", "--eps", "1e-9",
                 "--tau", "0:16*pi:801", "--l", "7")
    assert doc["report"]["passed"]


def test_operators_commands():
    doc = report("semigroup", "--kind", "gauss", "--t0", "0.5", "--f", "cis(t1)", "--points", "0")
    assert doc["report"]["values"][0][0]["re"] == pytest.approx(math.exp(-0.5), abs=1e-6)
    doc = report("convolve", "--kernel", "exp_orthant:1", "--causal", "--f", "cis(t1)",
                 "--box", "0:40:40001", "--points", "0")
    v = doc["report"]["values"][0][0]
    assert complex(v["re"], v["im"]) == pytest.approx(1 / (1 + 1j), abs=1e-6)
    doc = report("convolve", "--kernel-expr", "exp(-abs(t1))/2", "--kernel-l1", "1",
                 "--f", "1", "--box=-40:40:8001", "--at", "0:1:2")
    assert doc["report"]["values"][0][0] == pytest.approx(1, abs=1e-4)
    doc = report("heat", "--u0", "1", "--points", "4,1")
    assert doc["report"]["values"][0][0] == pytest.approx(math.erf(2), abs=1e-6)


def test_delay_command():
    doc = report("delay", "--alpha=-1", "--omega-tilde", "1", "--f", "0.25*sin(t1)*cos(x1)",
                 "--L", "0.25", "--r", "1", "--grid", "0:20:401")
    assert doc["report"]["trace"]["q"] == 0.25 and doc["report"]["trace"]["residual"] <= 1e-8
    code, _, err = call("delay", "--alpha=-1", "--omega-tilde", "1", "--f", "sin(x1)", "--L", "1",
                        "--r", "1", "--grid", "0:20:401")
    assert code == 3


def test_vp_2d_command():
    doc = report("vp", "--dim", "2", "--f", "cos(t1)*cos(t2)", "--k", "4", "--m", "4")
    assert doc["report"][0]["sup_error"] == pytest.approx(1 - 0.64, abs=1e-6)


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "apkit.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ap ")
