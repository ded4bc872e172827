import math
import subprocess
import sys

import pytest

from propsmall.cli import COMMON, DEFAULTS, main, resolve_config, run


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def summary(text):
    return dict(line[6:].split("=", 1) for line in text.splitlines() if line.startswith("# fit."))


def test_decay_example(capsys):
    code, out, _ = invoke(capsys, "run", "decay", "--field", "harmonic_poly:n=2,k=3", "--d", "1.5", "--a", "1:8:0.5")
    assert code == 0
    rows = body(out)
    assert rows[0] == "a,content,admissible"
    assert [float(r.split(",")[0]) for r in rows[1:]] == [1 + 0.5 * i for i in range(15)]
    assert "slope" in summary(out)


def test_doubling_example(capsys):
    code, out, _ = invoke(capsys, "run", "doubling", "--field", "affine", "--cube", "unit", "--dilation", "20")
    assert code == 0
    header, row = body(out)
    assert header == "target,N_ball,N_cube,x*,r*"
    assert abs(float(row.split(",")[2]) - math.log(20)) < 1e-3


def test_malformed_config(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("field = affine\nthis line has no equals sign\n")
    code, out, err = invoke(capsys, "run", "doubling", "--config", str(cfg))
    assert code == 2 and out == ""
    assert err == "error: parse: this line has no equals sign\n"


@pytest.mark.parametrize("argv,token", [
    (["--field", "nope"], "nope"),
    (["--cube", "0,0"], "0,0"),
    (["--set", "bogus=1"], "bogus"),
    (["--centers", "many"], "many"),
])
def test_parse_errors(capsys, argv, token):
    code, _, err = invoke(capsys, "run", "doubling", *argv)
    assert code == 2 and err == f"error: parse: {token}\n"


def test_unknown_experiment(capsys):
    code, _, err = invoke(capsys, "run", "telepathy")
    assert code == 3 and err == "error: unknown-experiment: telepathy\n"


def test_solver_non_convergence(capsys):
    code, _, err = invoke(capsys, "run", "solve", "--res", "33", "--maxiter", "2")
    assert code == 4 and err.startswith("error: not-converged: ")
    assert err.count("\n") == 1


def test_config_file_and_override_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nfield = affine\ndilation = 8\ncenters = 5\nradii = 2\n")
    code, out, _ = invoke(capsys, "run", "doubling", "--config", str(cfg), "--dilation", "20")
    assert code == 0
    assert "# dilation=20" in out.splitlines() and "# field=affine" in out.splitlines()
    assert abs(float(body(out)[1].split(",")[2]) - math.log(20)) < 1e-9


def test_echo_lists_every_resolved_key(capsys):
    code, out, _ = invoke(capsys, "run", "census", "--field", "affine", "--N0", "5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# experiment=census"
    echoed = [line[2:].split("=", 1)[0] for line in lines[1:] if line.startswith("# ") and not line.startswith("# fit.")]
    assert echoed == sorted(set(COMMON) | set(DEFAULTS["census"]))


@pytest.mark.parametrize("experiment,extra", [
    ("solve", ["--res", "17"]),
    ("doubling", ["--centers", "5", "--radii", "3"]),
    ("decay", ["--res", "65"]),
    ("census", ["--B", "4"]),
    ("critical", ["--K", "4,8"]),
    ("remez", ["--res", "17", "--centers", "5", "--radii", "2"]),
    ("recursion", ["--a", "1:60:0.5", "--levels", "2"]),
    ("eigen", ["--kmax", "5"]),
    ("content", ["--res", "17"]),
])
def test_every_experiment_is_deterministic(capsys, experiment, extra):
    c1, out1, _ = invoke(capsys, "run", experiment, *extra)
    c2, out2, _ = invoke(capsys, "run", experiment, *extra)
    assert c1 == c2 == 0 and out1 == out2 and len(body(out1)) >= 2


def test_output_file(tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, out, _ = invoke(capsys, "run", "eigen", "--kmax", "4", "--out", str(target))
    assert code == 0 and out == ""
    assert target.read_text().startswith("# experiment=eigen\n")


def test_solved_field_path(capsys):
    code, out, _ = invoke(capsys, "run", "doubling", "--coeffs", "perturbed:n=2,eps=0.2", "--res", "33",
                          "--centers", "3", "--radii", "2")
    assert code == 0 and float(body(out)[1].split(",")[2]) >= 0


def test_run_returns_same_text_as_main(capsys):
    cfg = resolve_config("recursion", {}, {"a": "1:60:0.5", "levels": "2"})
    _, out, _ = invoke(capsys, "run", "recursion", "--a", "1:60:0.5", "--levels", "2")
    assert run(cfg) == out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "propsmall", "run", "nothing"], capture_output=True, text=True)
    assert proc.returncode == 3 and proc.stderr.strip() == "error: unknown-experiment: nothing"
