import json

import numpy as np
import pytest

from matsl import io as mio
from matsl.cli import main
from matsl.core import make_problem
from matsl.graphs import star_problem


@pytest.fixture
def files(tmp_path):
    dd = tmp_path / "dd.json"
    mio.write_json(mio.problem_to_dict(make_problem(None, np.zeros((1, 1)), np.zeros((1, 1)))), dd)
    star = tmp_path / "star.json"
    mio.write_json(mio.problem_to_dict(star_problem(3)), star)
    return tmp_path, dd, star


def test_zerocase_and_recover(files, capsys):
    tmp, dd, _ = files
    out = tmp / "z.json"
    assert main(["zerocase", str(dd), "--nmax", "20", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert [e["lambda"] for e in d["entries"][:3]] == [1.0, 4.0, 9.0]
    assert np.isclose(d["entries"][1]["alpha"][0][0][0], 8 / np.pi)
    assert main(["recover", str(out)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert np.allclose(mio.matrix_from_json(rec["T1"]), 0)
    assert np.allclose(mio.matrix_from_json(rec["T2"]), 0, atol=1e-8)


def test_spectrum_deterministic(files):
    tmp, _, star = files
    a, b = tmp / "a.json", tmp / "b.json"
    assert main(["spectrum", str(star), "--nmax", "4", "--out", str(a)]) == 0
    assert main(["--threads", "3", "spectrum", str(star), "--nmax", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_csv_output(files, capsys):
    _, dd, _ = files
    assert main(["zerocase", str(dd), "--nmax", "2", "--csv"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "n,k,lambda,mult,re_11,im_11"


def test_weyl(files, capsys):
    _, dd, _ = files
    assert main(["weyl", str(dd), "--lambda=-1,0"]) == 0
    M = json.loads(capsys.readouterr().out)["M"]
    assert abs(M[0][0][0] - 1 / np.tanh(np.pi)) < 1e-10
    assert main(["weyl", str(dd), "--lambda", "4"]) == 2
    assert "NearPole" in capsys.readouterr().err


def test_verify_star(files, capsys):
    _, _, star = files
    assert main(["verify", str(star), "--nmax", "32"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert float(out.strip().splitlines()[-1].split()[-1]) < 1e-8


def test_basis(files, capsys):
    tmp, dd, _ = files
    z = tmp / "z.json"
    main(["zerocase", str(dd), "--nmax", "16", "--out", str(z)])
    assert main(["basis", str(z), "--N", "16", "--grid", "2048"]) == 0
    r = json.loads(capsys.readouterr().out)
    assert abs(r["gram_min"] - np.pi / 2) < 1e-6 and abs(r["gram_max"] - np.pi / 2) < 1e-6


def test_graph_reduce(tmp_path, capsys):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({
        "edges": [{"v0": "a", "v1": "b", "length": [1, 1]}, {"v0": "b", "v1": "c", "length": [1, 1]}],
        "vertices": [{"id": "a", "condition": "dirichlet"}, {"id": "b", "condition": {"kirchhoff": 0}},
                     {"id": "c", "condition": "dirichlet"}]}))
    assert main(["graph-reduce", str(g)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert np.isclose(d["rescale"], np.pi)
    p = mio.problem_from_dict(d)
    assert np.allclose(p.boundary.T2, 0.5)


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"m": 2, "T1": [[1, 1], [0, 1]], "T2": [[1, 0], [0, 1]]}))
    assert main(["spectrum", str(bad), "--nmax", "3"]) == 1
    assert "NotProjector" in capsys.readouterr().err
    assert main(["spectrum", str(tmp_path / "missing.json"), "--nmax", "3"]) == 1
    few = tmp_path / "few.json"
    mio.write_json({"m": 1, "entries": [{"n": 1, "k": 1, "lambda": 1.0, "multiplicity": 1,
                                         "alpha": [[[0.6, 0.0]]]}]}, few)
    assert main(["recover", str(few)]) == 2
    assert "NoConvergence" in capsys.readouterr().err
