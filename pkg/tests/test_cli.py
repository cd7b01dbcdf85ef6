import json
from pathlib import Path

import numpy as np
import pytest

from ksc.cli import main
from ksc.data import read_labels

DATA = Path(__file__).resolve().parents[1] / "data"
TOY = str(DATA / "three_gaussians.csv")
NESTED = str(DATA / "nested_blobs.csv")
IMAGE = str(DATA / "three_regions.png")


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def selected(tmp_path_factory):
    out = tmp_path_factory.mktemp("select")
    assert run("select", "--data", TOY, "--labels-last", "--out-dir", out) == 0
    return out


def test_select_picks_three(selected):
    man = json.loads((selected / "manifest.json").read_text())
    assert man["best"]["k"] == 3
    assert man["command"] == "select" and "seed" in man and "versions" in man
    lines = (selected / "grid.csv").read_text().splitlines()
    assert lines[0] == "k,bandwidth,criterion,value" and len(lines) == 1 + 4 * 9


def test_predict_dimension_mismatch(selected, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5,6\n")
    code = run("predict", "--model", selected / "model.ksc", "--data", bad, "--out-dir", tmp_path)
    assert code == 2
    assert "expected d=2" in capsys.readouterr().err


def test_eval_identical(selected, tmp_path, capsys):
    lab = selected / "test_labels.csv"
    assert run("eval", "--labels", lab, lab, "--out-dir", tmp_path) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ari"] == 1.0 and doc["nmi"] == 1.0
    assert json.loads((tmp_path / "metrics.json").read_text()) == doc


def test_eval_with_graph_and_data(tmp_path, capsys):
    (tmp_path / "g.txt").write_text("a b\nb c\na c\nd e\ne f\nd f\n")
    (tmp_path / "l.csv").write_text("id,cluster\na,0\nb,0\nc,0\nd,1\ne,1\nf,1\n")
    (tmp_path / "x.csv").write_text("0,0\n0,1\n1,0\n9,9\n9,8\n8,9\n")
    assert run("eval", "--labels", tmp_path / "l.csv", tmp_path / "l.csv", "--graph",
               tmp_path / "g.txt", "--data", tmp_path / "x.csv", "--out-dir", tmp_path) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["modularity"] == 0.5 and doc["msv"] > 0.8 and doc["sizes"] == {"0": 3, "1": 3}


def test_missing_file(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "nope.csv", "--k", 3, "--sigma2", 0.02,
               "--out-dir", tmp_path) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        run("train", "--bogus")
    assert exc.value.code == 2


def test_soft_membership_csv(selected, tmp_path):
    assert run("soft", "--model", selected / "model.ksc", "--data", TOY, "--labels-last",
               "--out-dir", tmp_path) == 0
    lines = (tmp_path / "memberships.csv").read_text().splitlines()
    assert lines[0] == "id,sm_1,sm_2,sm_3"
    rows = np.array([[float(v) for v in l.split(",")[1:]] for l in lines[1:]])
    assert np.abs(rows.sum(axis=1) - 1).max() <= 1e-12


def test_sparsify_and_predict(selected, tmp_path):
    assert run("sparsify", "--model", selected / "model.ksc", "--method", "icd", "--icd-rmax", 20,
               "--out-dir", tmp_path) == 0
    rep = json.loads((tmp_path / "sparsity.json").read_text())
    assert rep["n_reduced"] == 20
    assert run("predict", "--model", tmp_path / "reduced.ksc", "--data", TOY, "--labels-last",
               "--out-dir", tmp_path / "p") == 0
    _, labels = read_labels(tmp_path / "p" / "labels.csv")
    assert len(labels) == 600


def test_hier_outputs(tmp_path):
    assert run("hier", "--mode", "ahksc", "--data", NESTED, "--labels-last", "--sigma2", 0.03,
               "--k", 4, "--levels", 3, "--out-dir", tmp_path) == 0
    merges = (tmp_path / "linkage.txt").read_text().splitlines()
    assert all(len(m.split()) == 3 for m in merges)
    assert (tmp_path / "level_0.csv").exists()


def test_hksc_needs_theta(tmp_path, capsys):
    assert run("hier", "--data", NESTED, "--labels-last", "--out-dir", tmp_path) == 2
    assert "--theta" in capsys.readouterr().err
