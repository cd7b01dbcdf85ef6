"""End-to-end acceptance checks, one test per criterion.

Each test records a single ``[ACCEPT n] PASS|FAIL ...`` line; the lines are
printed in the pytest terminal summary (see conftest.py). Run with
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import functools
import itertools
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from ksc.cli import main as cli_main
from ksc.data import SplitSpec, load_image, split
from ksc.hierarchy import ahksc, hksc, linkage_from_levels
from ksc.kernels import KernelSpec, gram
from ksc.metrics import ari, modularity, nmi
from ksc.model import binarize, build_codebook, hamming_decode, predict, train, train_kernel
from ksc.segmentation import SegmentConfig, segment_image
from ksc.selection import grid_search
from ksc.soft import memberships_from_distances, sksc
from ksc.sparse import (
    ConvergenceWarning, cluster_weights, group_lasso, icd, reduced_eigproblem, sparse_predict,
    sparsify, zero_threshold,
)
from ksc.spectral import dual_matrix, solve_dual
from ksc.synthetic import (
    block_kernel, low_rank_kernel, nested_blobs, three_gaussians, three_region_image, two_blobs,
)

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
BLF_GRID = np.logspace(-3.5, -1.5, 9)
TOY_SPLIT = (0.5, 0.2, 0.3)
RESULTS = {}
ACCEPT_LINES = []


def criterion(num, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS[num] = False
                _emit(f"[ACCEPT {num}] FAIL {title}: {type(exc).__name__}: {exc}".splitlines()[0])
                raise
            RESULTS[num] = True
            _emit(f"[ACCEPT {num}] PASS {title} ({detail}; {time.perf_counter() - t0:.1f}s)")
        return run
    return wrap


def _emit(line):
    ACCEPT_LINES.append(line)
    print(line)


@criterion(1, "toy recovery")
def test_toy_recovery():
    ds = three_gaussians(600, seed=0)
    tr, va, te = split(ds, SplitSpec(TOY_SPLIT, seed=0))
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        res = grid_search(tr, va, "rbf", range(2, 6), BLF_GRID, "blf")
        best = res.best_entry
        labels = predict(train(tr, KernelSpec("rbf", best.bandwidth), best.k), te)
    elapsed = time.perf_counter() - t0
    score = ari(labels, te.labels)
    assert best.k == 3, f"selected k={best.k}"
    assert score >= 0.95, f"test ARI {score:.4f}"
    assert elapsed < 30, f"took {elapsed:.1f}s"
    return f"k=3, sigma2={best.bandwidth:.3g}, ARI={score:.4f}, {elapsed:.1f}s single-threaded"


@criterion(2, "eigen-structure invariants")
def test_eigen_invariants():
    rng = np.random.default_rng(2024)
    worst = np.zeros(3)
    for _ in range(50):
        n = int(rng.integers(10, 80))
        X = rng.normal(size=(n, int(rng.integers(1, 5))))
        sq = ((X[:, None] - X[None]) ** 2).sum(-1)
        omega = gram(KernelSpec("rbf", float(np.median(sq)) * rng.uniform(0.2, 2.0)), X)
        k = int(rng.integers(2, 6))
        sol = solve_dual(omega, k)
        A = dual_matrix(omega, sol.degrees)
        m = train_kernel(omega, k)
        e = omega @ m.alphas + m.biases
        worst = np.maximum(worst, [
            np.abs(sol.alphas.sum(axis=0)).max(),
            np.abs(A @ sol.alphas - sol.alphas * sol.eigenvalues).max(),
            np.abs((e / sol.degrees[:, None]).sum(axis=0)).max(),
        ])
    assert worst[0] <= 1e-8, f"|1'alpha| = {worst[0]:.2e}"
    assert worst[1] <= 1e-8, f"residual = {worst[1]:.2e}"
    assert worst[2] <= 1e-10, f"weighted centering = {worst[2]:.2e}"
    return f"max |1'a|={worst[0]:.1e}, residual={worst[1]:.1e}, centering={worst[2]:.1e}"


@criterion(3, "block-diagonal oracle")
def test_block_oracle():
    count = 0
    for k in range(2, 6):
        for sizes in itertools.combinations_with_replacement(range(1, 51), k):
            if not k < sum(sizes) <= 50:
                continue
            truth = np.repeat(np.arange(k), sizes)
            got = train_kernel(block_kernel(sizes), k).train_labels
            assert ari(got, truth) == 1.0, f"all-ones blocks {sizes}"
            count += 1
    rng = np.random.default_rng(3)
    for trial in range(300):
        k = int(rng.integers(2, 6))
        sizes = rng.integers(2, 50 // k + 1, k)
        perm = rng.permutation(sizes.sum())
        omega = block_kernel(sizes, seed=trial, within="rbf")[np.ix_(perm, perm)]
        truth = np.repeat(np.arange(k), sizes)[perm]
        assert ari(train_kernel(omega, k).train_labels, truth) == 1.0, f"rbf blocks {sizes}"
    return f"{count} all-ones size multisets + 300 shuffled RBF-valued blocks, ARI=1"


@criterion(4, "ICD fidelity")
def test_icd_fidelity():
    worst = 0.0
    cases = 0
    for rank in range(2, 6):
        for n in (50, 120, 200):
            for seed in range(3):
                omega, _ = low_rank_kernel(n, rank, 0.1, seed=seed)
                f = icd(omega, tol=1e-12 * np.trace(omega))
                assert f.rank == rank
                alphas, values, _ = reduced_eigproblem(f, rank)
                full = solve_dual(omega, rank).eigenvalues
                rel = np.abs(values - full) / np.abs(full)
                worst = max(worst, rel.max())
                assert rel.max() <= 1e-6, f"rank {rank}, n {n}: rel err {rel.max():.2e}"
                signs = binarize(alphas)
                labels = hamming_decode(signs, build_codebook(signs, rank))
                assert ari(labels, train_kernel(omega, rank).train_labels) == 1.0
                cases += 1
    return f"{cases} cases, max rel eigenvalue error {worst:.1e}, ARI=1"


@criterion(5, "sparsity path")
def test_sparsity_path():
    tr, _, te = split(three_gaussians(600, seed=0), SplitSpec(TOY_SPLIT, seed=0))
    kernel = KernelSpec("rbf", 0.02)
    m = train(tr, kernel, 3)
    omega = gram(kernel, tr.points)
    w = cluster_weights(m.train_labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        beta0 = group_lasso(omega, m.alphas, 0.0, w)
        z = zero_threshold(omega, m.alphas, w)
        beta_z = group_lasso(omega, m.alphas, 1.001 * z, w)
        red = sparsify(m, "group_lasso", lam=0.4 * z, omega=omega)
    err = np.abs(beta0 - m.alphas).max()
    assert err <= 1e-8, f"lambda=0 deviation {err:.2e}"
    assert not beta_z.any(), "beta nonzero above the zero threshold"
    frac = red.size / len(tr)
    score = ari(sparse_predict(red, te), te.labels)
    assert frac <= 0.10, f"kept {red.size} rows"
    assert score >= 0.9, f"sparse test ARI {score:.4f}"
    return f"|b-a|={err:.1e} at 0, beta=0 above {z:.3g}, {red.size}/{len(tr)} rows -> ARI={score:.4f}"


def _direct(d):
    k = len(d)
    num = [np.prod([d[j] for j in range(k) if j != q]) for q in range(k)]
    return np.array(num) / sum(num)


@criterion(6, "soft KSC")
def test_soft_ksc():
    sm = memberships_from_distances([[0.1, 0.2, 0.7]])[0]
    assert abs(sm[0] - 0.14 / 0.23) <= 1e-12 and round(sm[0], 4) == 0.6087
    rng = np.random.default_rng(6)
    spots = [np.array([0.1, 0.2, 0.7]), np.array([0.4, 0.4])]
    spots += [rng.uniform(0.01, 2.0, int(rng.integers(2, 7))) for _ in range(200)]
    worst_spot = max(np.abs(memberships_from_distances([d])[0] - _direct(d)).max() for d in spots)
    assert worst_spot <= 1e-12, f"spot mismatch {worst_spot:.2e}"

    kernel = KernelSpec("rbf", 0.02)
    fixtures = [three_gaussians(600, seed=0), two_blobs(300, seed=0), nested_blobs(seed=0)[0]]
    worst_sum = 0.0
    for ds, k in zip(fixtures, (3, 2, 4)):
        tr, _, te = split(ds, SplitSpec(TOY_SPLIT, seed=0))
        _, soft, _ = sksc(tr, te, kernel, k)
        worst_sum = max(worst_sum, np.abs(soft.memberships.sum(axis=1) - 1).max())
    assert worst_sum <= 1e-12, f"row sum error {worst_sum:.2e}"
    return f"0.6087 case ok, {len(spots)} spot values within {worst_spot:.1e}, row sums within {worst_sum:.1e}"


@criterion(7, "hierarchy")
def test_hierarchy():
    ds, _ = nested_blobs(seed=0)
    tr, va, te = split(ds, SplitSpec(TOY_SPLIT, seed=0))
    sup = te.labels // 2
    link_h = hksc(tr, va, te, np.logspace(-3.5, -0.5, 13), 6, 5.0)
    link_a = ahksc(tr, va, te, KernelSpec("rbf", 0.03), 4, 3)
    for name, link in (("hksc", link_h), ("ahksc", link_a)):
        link.check()
        best = max(ari(lab, sup) for lab in link.level_labels)
        assert best == 1.0, f"{name}: best super-cluster ARI {best:.3f}"
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(3, 40))
        levels = [rng.integers(0, int(rng.integers(2, 9)), n)]
        while np.unique(levels[-1]).size > 1 and rng.random() > 0.2:
            ids = np.unique(levels[-1])
            target = rng.integers(0, max(1, ids.size - 1), ids.size)
            levels.append(target[np.searchsorted(ids, levels[-1])])
        linkage_from_levels(levels).check()
    sizes = lambda l: [int(np.unique(x).size) for x in l.level_labels]
    return f"hksc levels {sizes(link_h)}, ahksc levels {sizes(link_a)}, 100 random linkages ok"


@criterion(8, "metrics")
def test_metrics():
    rng = np.random.default_rng(8)
    for _ in range(50):
        a = rng.integers(0, 5, int(rng.integers(2, 60)))
        if np.unique(a).size < 2:
            a[:2] = [0, 1]
        b = rng.permutation(8)[a]
        assert ari(a, b) == pytest.approx(1.0, abs=1e-12)
        assert nmi(a, b) == pytest.approx(1.0, abs=1e-12)
    A = np.zeros((6, 6))
    for tri in ((0, 1, 2), (3, 4, 5)):
        for i, j in itertools.permutations(tri, 2):
            A[i, j] = 1.0
    assert modularity(A, [0, 0, 0, 1, 1, 1]) == 0.5
    for _ in range(50):
        n = int(rng.integers(2, 30))
        W = rng.random((n, n))
        assert modularity(W + W.T, np.full(n, int(rng.integers(0, 9)))) == 0.0
    return "ARI=NMI=1 on 50 relabelings, triangles Q=0.5, single-cluster Q=0"


@criterion(9, "image segmentation")
def test_segmentation():
    image, truth = three_region_image(64, noise=0.05, seed=0)
    t0 = time.perf_counter()
    labels, _ = segment_image(image, SegmentConfig(k=3))
    elapsed = time.perf_counter() - t0
    score = ari(labels.ravel(), truth.ravel())
    fixture = load_image(DATA / "three_regions.png")
    assert np.array_equal(fixture, image), "bundled fixture differs from the generator"
    assert score >= 0.9, f"pixel ARI {score:.4f}"
    assert elapsed < 60, f"took {elapsed:.1f}s"
    return f"pixel ARI={score:.4f}, {elapsed:.1f}s"


def _pipelines(out):
    toy = str(DATA / "three_gaussians.csv")
    nested = str(DATA / "nested_blobs.csv")
    image = str(DATA / "three_regions.png")
    sel = out / "select"
    graph = out / "graph.txt"
    rng = np.random.default_rng(10)
    edges = [(i, j) for t in (0, 20) for i, j in itertools.combinations(range(t, t + 20), 2)
             if rng.random() < 0.5] + [(0, 20), (5, 33)]
    graph.write_text("".join(f"n{i} n{j}\n" for i, j in edges))
    return [
        ["select", "--data", toy, "--labels-last", "--out-dir", sel],
        ["train", "--data", toy, "--labels-last", "--k", "3", "--sigma2", "0.005",
         "--out-dir", out / "train"],
        ["train", "--graph", graph, "--k", "2", "--out-dir", out / "train_graph"],
        ["select", "--graph", graph, "--criterion", "modularity", "--out-dir", out / "select_graph"],
        ["predict", "--model", sel / "model.ksc", "--data", toy, "--labels-last",
         "--out-dir", out / "predict"],
        ["soft", "--model", sel / "model.ksc", "--data", toy, "--labels-last",
         "--out-dir", out / "soft"],
        ["hier", "--mode", "hksc", "--theta", "5", "--data", nested, "--labels-last",
         "--out-dir", out / "hksc"],
        ["hier", "--mode", "ahksc", "--k", "4", "--sigma2", "0.03", "--data", nested,
         "--labels-last", "--out-dir", out / "ahksc"],
        ["sparsify", "--model", sel / "model.ksc", "--method", "icd", "--icd-rmax", "30",
         "--out-dir", out / "icd"],
        ["sparsify", "--model", sel / "model.ksc", "--method", "glasso", "--lambda", "30",
         "--out-dir", out / "glasso"],
        ["sparsify", "--model", sel / "model.ksc", "--method", "rl1", "--rho", "10",
         "--out-dir", out / "rl1"],
        ["predict", "--model", out / "icd" / "reduced.ksc", "--data", toy, "--labels-last",
         "--out-dir", out / "predict_icd"],
        ["eval", "--labels", out / "predict" / "labels.csv", out / "predict_icd" / "labels.csv",
         "--data", toy, "--labels-last", "--out-dir", out / "eval"],
        ["segment", "--image", image, "--k", "3", "--out-dir", out / "segment"],
    ]


def _snapshot(out):
    return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*"))
            if p.suffix in (".csv", ".txt", ".ksc", ".png") or p.name in ("sparsity.json",
                                                                            "metrics.json")}


@criterion(10, "CLI determinism")
def test_cli_determinism(tmp_path, capsys):
    snaps = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        out.mkdir()
        codes = [cli_main([str(x) for x in argv]) for argv in _pipelines(out)]
        assert codes == [0] * len(codes), f"exit codes {codes}"
        for argv in _pipelines(out):
            assert (Path(argv[argv.index("--out-dir") + 1]) / "manifest.json").exists()
        snaps.append(_snapshot(out))
    capsys.readouterr()
    a, b = snaps
    assert a.keys() == b.keys()
    differ = [str(k) for k in a if a[k] != b[k]]
    assert not differ, f"outputs differ between runs: {differ}"
    n_csv = sum(1 for k in a if k.suffix == ".csv")
    man = json.loads((tmp_path / "a" / "select" / "manifest.json").read_text())
    assert man["best"]["k"] == 3
    return f"{len(_pipelines(tmp_path))} pipelines, {n_csv} CSVs + {len(a) - n_csv} other artifacts identical"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
