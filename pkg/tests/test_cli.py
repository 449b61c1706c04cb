import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mvfield import cli, harness


@pytest.fixture
def files(tmp_path):
    sq = tmp_path / "square.json"
    sq.write_text(json.dumps({"vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]}))
    canon = tmp_path / "canonical.json"
    canon.write_text(json.dumps({"vertices": [list(v) for v in harness.CANONICAL]}))
    return tmp_path, sq, canon


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_pgm(path):
    data = path.read_bytes()
    parts = data.split(b"\n", 3)
    assert parts[0] == b"P5"
    w, h = map(int, parts[1].split())
    assert parts[2] == b"255"
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    assert pixels.size == w * h
    return pixels.reshape(h, w)


def test_eval_one(files, capsys):
    _, sq, _ = files
    code, out, _ = run(capsys, "eval", "--polygon", sq, "--function", "one", "--x", 0.5, "--y", 0.5)
    assert code == 0
    lines = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(lines["g"]) == 1.0
    assert abs(float(lines["phi"]) - 11.313708) < 1e-6
    assert float(lines["error"]) >= 0


def test_eval_boundary_backend(files, capsys):
    _, sq, _ = files
    code, out, _ = run(capsys, "eval", "--polygon", sq, "--function", "saddle", "--x", 0.3,
                       "--y", 0.6, "--backend", "boundary", "--order", 8)
    assert code == 0 and "phi_quadrature" in out


def test_eval_exterior_is_input_error(files, capsys):
    _, sq, _ = files
    code, _, err = run(capsys, "eval", "--polygon", sq, "--function", "one", "--x", 2, "--y", 2)
    assert code == 2 and "ExteriorPoint" in err


def test_usage_errors(files, capsys):
    _, sq, _ = files
    assert run(capsys, "eval", "--polygon", sq)[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "eval", "--polygon", sq, "--function", "one", "--x", 0.5, "--y", 0.5,
               "--backend", "magic")[0] == 1


@pytest.mark.parametrize("argv", [
    ["--function", "pwl:1,2,3"],
    ["--function", "nonsense"],
    ["--function", "one", "--order", "99"],
    ["--function", "one", "--tol", "-1"],
])
def test_input_errors(files, capsys, argv):
    _, sq, _ = files
    code, _, err = run(capsys, "eval", "--polygon", sq, "--x", 0.5, "--y", 0.5, *argv)
    assert code == 2 and err.startswith("error:")


def test_missing_and_bad_polygon(files, capsys):
    tmp, _, _ = files
    assert run(capsys, "eval", "--polygon", tmp / "nope.json", "--function", "one",
               "--x", 0, "--y", 0)[0] == 2
    bow = tmp / "bow.json"
    bow.write_text(json.dumps({"vertices": [[0, 0], [1, 1], [1, 0], [0, 1]]}))
    code, _, err = run(capsys, "eval", "--polygon", bow, "--function", "one", "--x", 0, "--y", 0)
    assert code == 2 and "SelfIntersection" in err


def test_strict_non_convergence(files, capsys):
    _, sq, _ = files
    argv = ["eval", "--polygon", sq, "--function", "tanhridge", "--x", 0.5, "--y", 1e-7,
            "--tol", "1e-300"]
    code, _, err = run(capsys, *argv)
    assert code == 0 and "warning" in err
    code, _, err = run(capsys, *argv, "--strict")
    assert code == 3


def test_grid_outputs(files, capsys):
    tmp, sq, _ = files
    out = tmp / "grid"
    code, _, _ = run(capsys, "grid", "--polygon", sq, "--function", "saddle", "--nx", 10, "--out", out)
    assert code == 0
    rows = list(csv.DictReader((out / "grid.csv").open()))
    assert len(rows) == 100
    assert all(r["class"] == "interior" and np.isfinite(float(r["g"])) for r in rows)
    assert rows[0]["x"] == "0.050000000000000003"  # 17 significant digits
    img = read_pgm(out / "g.pgm")
    assert img.shape == (10, 10) and img.min() >= 1
    side = json.loads((out / "error.json").read_text())
    assert side["scale"] == "log10" and side["min"] == 1e-12 and side["image"] == "error.pgm"


def test_grid_exterior_pixels_black(files, capsys):
    tmp, _, canon = files
    out = tmp / "g2"
    code, _, _ = run(capsys, "grid", "--polygon", canon, "--function", "tanhridge",
                     "--nx", 20, "--ny", 25, "--out", out)
    assert code == 0
    g = read_pgm(out / "g.pgm")
    e = read_pgm(out / "error.pgm")
    assert g.shape == (25, 20)
    rows = list(csv.DictReader((out / "grid.csv").open()))
    ext = np.array([r["class"] == "exterior" for r in rows]).reshape(25, 20)
    assert ext.any()
    assert np.all(g[ext] == 0) and np.all(e[ext] == 0)
    assert np.all(g[~ext] >= 1)
    # same row order in the image and the CSV: top row first
    assert float(rows[0]["y"]) > float(rows[-1]["y"])


def test_grid_is_deterministic(files, capsys, monkeypatch):
    tmp, _, canon = files
    blobs = []
    for threads, name in (("1", "a"), ("4", "b")):
        monkeypatch.setenv("MVFIELD_THREADS", threads)
        run(capsys, "grid", "--polygon", canon, "--function", "saddle", "--nx", 17, "--out", tmp / name)
        blobs.append([(tmp / name / f).read_bytes() for f in
                      ("grid.csv", "g.pgm", "error.pgm", "g.json", "error.json")])
    assert blobs[0] == blobs[1]


def test_grid_requires_extendable(files, capsys):
    tmp, sq, _ = files
    code, _, err = run(capsys, "grid", "--polygon", sq, "--function", "pwl:0,1,2,3", "--out", tmp)
    assert code == 2 and "FunctionNotExtendable" in err


def test_probe(files, capsys):
    tmp, sq, _ = files
    code, out, _ = run(capsys, "probe", "--polygon", sq, "--function", "saddle",
                       "--target", "vertex:1", "--out", tmp / "p")
    assert code == 0 and "angular" in out
    rows = list(csv.DictReader((tmp / "p" / "probe.csv").open()))
    assert len(rows) == 2 * 3 * 4
    assert {r["backend"] for r in rows} == {"angular", "boundary"}


def test_probe_off_boundary(files, capsys):
    tmp, sq, _ = files
    code, _, err = run(capsys, "probe", "--polygon", sq, "--function", "saddle",
                       "--target", "edge:0:1.5", "--out", tmp)
    assert code == 2 and "TargetNotOnBoundary" in err
    code, _, err = run(capsys, "probe", "--polygon", sq, "--function", "saddle",
                       "--target", "middle", "--out", tmp)
    assert code == 2


def test_selftest_exit_status(capsys, monkeypatch):
    from mvfield.harness import CheckResult
    monkeypatch.setattr(harness, "selftest", lambda seed=0: [CheckResult("a", True, "ok")])
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and "1 passed, 0 failed" in out
    monkeypatch.setattr(harness, "selftest",
                        lambda seed=0: [CheckResult("a", True, "ok"), CheckResult("b", False, "bad")])
    code, out, _ = run(capsys, "selftest")
    assert code == cli.EXIT_SELFTEST and "FAIL  b" in out


def test_module_entry_point(files):
    _, sq, _ = files
    res = subprocess.run([sys.executable, "-m", "mvfield", "eval", "--polygon", str(sq),
                          "--function", "one", "--x", "0.25", "--y", "0.5"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("g = ")
