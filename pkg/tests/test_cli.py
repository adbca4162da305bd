import csv
import io
import json

import numpy as np
import pytest

from beltrami import cli, solver
from beltrami.gmsh import polynomial_charts, write_gmsh
from beltrami.mesh import sphere_charts
from beltrami.operators import load_matrix

FAST = ["--p", "2", "--far-rule", "smooth"]

# p = 2 discretizations leave manufactured right-hand sides visibly non-mean-zero
pytestmark = pytest.mark.filterwarnings("ignore::beltrami.solver.MeanNotZeroWarning")


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _csv_rows(text):
    lines = text.splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in lines if not l.startswith("#")))))
    return comments, rows


def test_sphere_csv(capsys):
    code, out, _ = _run(capsys, "--experiment", "sphere-convergence", "--levels", "0,1", *FAST)
    assert code == 0
    comments, rows = _csv_rows(out)
    assert comments[0].startswith("# beltrami ")
    cfg = json.loads(comments[1][len("# config ") :])
    assert cfg["p"] == 2 and cfg["levels"] == [0, 1]
    assert list(rows[0]) == list(cli.CSV_COLUMNS)
    assert [r["n_tri"] for r in rows] == ["48", "192"]
    assert rows[0]["iterations"] == "0"
    err = [float(r["l2_error"]) for r in rows]
    assert err[1] < err[0] < 1e-2
    assert "e" in rows[0]["l2_error"] and len(rows[0]["l2_error"].split("e")[0]) == 8


def test_csv_is_deterministic_apart_from_timing(capsys):
    args = ("--experiment", "sphere-convergence", "--levels", "48", *FAST)
    _, a, _ = _run(capsys, *args)
    _, b, _ = _run(capsys, *args)
    strip = lambda t: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in _csv_rows(t)[1]]  # noqa: E731
    assert strip(a) == strip(b)


def test_torus_json_to_file(tmp_path, capsys):
    out = tmp_path / "t.json"
    code, stdout, _ = _run(
        capsys, "--experiment", "torus-convergence", "--levels", "32", "--format", "json",
        "--out", str(out), "--solver", "gmres", *FAST,
    )
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert doc["converged"] is True
    row = doc["rows"][0]
    assert row["n_tri"] == 32 and row["iterations"] > 0
    # true residual; the GMRES estimate reaches 1e-14, rounding leaves ~cond * eps
    assert row["residual"] <= 1e-12
    assert row["condition"] > 1


def test_gmsh_solve(tmp_path, capsys):
    path = tmp_path / "s.msh"
    write_gmsh(polynomial_charts(sphere_charts(0), 3), path, 3)
    code, out, _ = _run(capsys, "--experiment", "gmsh-solve", "--mesh", str(path), "--format", "json", *FAST)
    assert code == 0
    row = json.loads(out)["rows"][0]
    assert row["n_tri"] == 48 and row["skipped_elements"] == 0
    assert row["l2_error"] < 1e-2


def test_hodge_on_sphere(capsys):
    code, out, _ = _run(
        capsys, "--experiment", "hodge", "--surface", "sphere", "--levels", "0", "--format", "json", *FAST
    )
    assert code == 0
    row = json.loads(out)["rows"][0]
    for key in cli.HODGE_COLUMNS:
        assert key in row
    assert row["norm_F"] == pytest.approx(1.0, abs=0.05)
    assert row["reconstruction"] <= 1e-12


def test_hodge_csv_has_extra_columns(capsys):
    code, out, _ = _run(capsys, "--experiment", "hodge", "--surface", "sphere", "--levels", "0", *FAST)
    assert code == 0
    _, rows = _csv_rows(out)
    assert list(rows[0]) == list(cli.CSV_COLUMNS) + list(cli.HODGE_COLUMNS)


def test_dump_matrix(tmp_path, capsys):
    base = tmp_path / "A"
    code, _, _ = _run(
        capsys, "--experiment", "sphere-convergence", "--levels", "0", "--p", "1",
        "--far-rule", "smooth", "--dump-matrix", str(base),
    )
    assert code == 0
    op = load_matrix(f"{base}.48")
    assert op.entries.shape == (144, 144) and np.isfinite(op.entries).all()


@pytest.mark.parametrize(
    "argv",
    [
        ["--experiment", "sphere-convergence", "--p", "13"],
        ["--experiment", "sphere-convergence", "--levels", "50"],
        ["--experiment", "torus-convergence", "--levels", "33"],
        ["--experiment", "gmsh-solve"],
        ["--experiment", "sphere-convergence", "--ell", "0"],
        ["--experiment", "sphere-convergence", "--quad-tol", "0"],
        ["--experiment", "sphere-convergence", "--threads", "0"],
        ["--experiment", "gmsh-solve", "--mesh", "/nonexistent.msh"],
    ],
)
def test_structured_errors(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code == 2 and out == ""
    doc = json.loads(err)
    assert set(doc) == {"error", "stage", "message"}


def test_size_guard(monkeypatch, capsys):
    monkeypatch.setattr(cli, "LARGE_N", 100)
    code, _, err = _run(capsys, "--experiment", "sphere-convergence", "--levels", "0", *FAST)
    assert code == 2 and "allow-large" in json.loads(err)["message"]
    code, _, _ = _run(capsys, "--experiment", "sphere-convergence", "--levels", "0", "--allow-large", *FAST)
    assert code == 0


def test_unconverged_solve_exits_one(monkeypatch, capsys):
    def stalled(A, b, *args):
        return solver.GMRESResult(np.zeros_like(b), [1.0, 1.0], False, "stagnation")

    monkeypatch.setattr(solver, "gmres", stalled)
    code, out, _ = _run(
        capsys, "--experiment", "sphere-convergence", "--levels", "0", "--solver", "gmres",
        "--format", "json", *FAST,
    )
    assert code == 1
    doc = json.loads(out)
    assert doc["converged"] is False and doc["rows"][0]["converged"] is False


def test_bad_level_list_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["--experiment", "sphere-convergence", "--levels", "a,b"])
    assert info.value.code == 2


def test_level_semantics():
    assert cli._sphere_level(0) == 0 and cli._sphere_level(192) == 1
    assert cli._torus_tiling(0) == 4 and cli._torus_tiling(128) == 8
    with pytest.raises(cli.ConfigError):
        cli._sphere_level(100)


def test_threads_option(capsys):
    code, _, _ = _run(capsys, "--experiment", "sphere-convergence", "--levels", "0", "--threads", "1", *FAST)
    assert code == 0
