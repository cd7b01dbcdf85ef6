import numpy as np
import pytest
from hypothesis import given, strategies as st

from ksc.data import Dataset, SplitSpec, split
from ksc.kernels import KernelSpec, gram
from ksc.metrics import ari
from ksc.model import (Codebook, SpectrumError, binarize, build_codebook, decode, hamming_decode,
                       predict, train, train_kernel)
from ksc.spectral import dual_matrix
from ksc.synthetic import block_kernel, three_gaussians


def test_binarize_zero_is_positive():
    np.testing.assert_array_equal(binarize([-0.1, 0.0, 2.0]), [-1, 1, 1])


def test_codebook_counting():
    cb = build_codebook(np.array([[1]] * 6 + [[-1]] * 4), 2)
    assert cb.codewords.tolist() == [[1], [-1]]
    rows = [[1, 1]] * 3 + [[-1, -1]] * 3 + [[1, -1]]
    assert build_codebook(rows, 2).codewords.tolist() == [[1, 1], [-1, -1]]
    # ties by first occurrence
    rows = [[-1, -1], [1, 1], [1, 1], [-1, -1]]
    assert build_codebook(rows, 2).codewords.tolist() == [[-1, -1], [1, 1]]
    with pytest.raises(SpectrumError, match="k unsupported by spectrum"):
        build_codebook([[1, 1], [-1, -1], [1, 1]], 3)


def test_codebook_validation():
    with pytest.raises(ValueError):
        Codebook(np.array([[1], [1]]))
    with pytest.raises(ValueError):
        Codebook(np.array([[1, 0], [1, 1]]))


def test_decode_examples():
    cb = Codebook(np.array([[1, 1], [-1, -1], [1, -1]]))
    assert decode([1, -1], cb) == 2
    assert decode([1, -1], Codebook(np.array([[1, 1], [-1, -1]]))) == 0
    assert decode([-1], Codebook(np.array([[1], [-1]]))) == 1


@given(st.integers(2, 6), st.integers(0, 10**6))
def test_decode_idempotent_and_brute_force(k, seed):
    rng = np.random.default_rng(seed)
    words = set()
    while len(words) < k:
        words.add(tuple(rng.choice([-1, 1], size=k - 1)) if k > 2 else (1,) if not words else (-1,))
    cb = Codebook(np.array(sorted(words)))
    for p, c in enumerate(cb.codewords):
        assert decode(c, cb) == p
    codes = rng.choice([-1, 1], size=(20, k - 1))
    got = hamming_decode(codes, cb)
    for c, g in zip(codes, got):
        dists = [int((c != w).sum()) for w in cb.codewords]
        assert g == dists.index(min(dists))


def test_two_pairs_k2():
    X = np.array([[0.0, 0.0], [0.05, 0.0], [5.0, 5.0], [5.05, 5.0]])
    m = train(Dataset(X), KernelSpec("rbf", 0.5), 2)
    assert sorted(m.codebook.codewords.tolist()) == [[-1], [1]]
    lab = m.train_labels
    assert lab[0] == lab[1] and lab[2] == lab[3] and lab[0] != lab[2]
    # brute force: explicit eigensolve and manual signs
    om = gram(KernelSpec("rbf", 0.5), X)
    w, V = np.linalg.eig(dual_matrix(om))
    v = V[:, np.argmax(w.real)].real
    assert ari(np.sign(v), lab) == 1.0


@pytest.mark.parametrize("sizes", [(4, 6), (3, 3, 5), (2, 7, 4, 5), (5, 6, 7, 8, 9), (10,) * 5])
def test_block_kernel_partition(sizes):
    om = block_kernel(sizes)
    truth = np.repeat(np.arange(len(sizes)), sizes)
    m = train_kernel(om, len(sizes))
    assert ari(m.train_labels, truth) == 1.0


def test_duplicate_dataset_same_codebook():
    ds = three_gaussians(9, std=0.03, seed=3)
    spec = KernelSpec("rbf", 0.05)
    single = train(ds, spec, 3)
    double = train(Dataset(np.vstack([ds.points, ds.points])), spec, 3)
    assert double.codebook.codewords.tolist() == single.codebook.codewords.tolist()
    np.testing.assert_array_equal(double.train_labels[:9], single.train_labels)


def test_predict_on_training_set_and_duplicates():
    ds = three_gaussians(120, seed=1)
    m = train(ds, KernelSpec("rbf", 0.01), 3)
    np.testing.assert_array_equal(predict(m, ds), m.train_labels)
    assert predict(m, ds.points[[17]])[0] == m.train_labels[17]
    assert set(np.unique(predict(m, np.random.default_rng(0).uniform(size=(50, 2))))) <= {0, 1, 2}


def test_permutation_invariance():
    ds = three_gaussians(150, seed=2)
    perm = np.random.default_rng(5).permutation(150)
    spec = KernelSpec("rbf", 0.01)
    a = train(ds, spec, 3).train_labels
    b = train(ds.subset(perm), spec, 3).train_labels
    assert ari(a[perm], b) == 1.0


def test_three_gaussian_held_out():
    ds = three_gaussians(600, seed=0)
    tr, _, te = split(ds, SplitSpec((0.5, 1 / 6, 1 / 3), 0))
    assert len(te) == 200
    m = train(tr, KernelSpec("rbf", 0.005), 3)
    assert ari(predict(m, te), te.labels) >= 0.95


def test_dimension_mismatch_names_expected_d():
    m = train(three_gaussians(30, seed=0), KernelSpec("rbf", 0.01), 3)
    with pytest.raises(ValueError, match="expected d=2"):
        predict(m, np.zeros((2, 3)))


def test_train_preconditions():
    with pytest.raises(ValueError):
        train(Dataset(np.zeros((2, 1)) + [[0], [1]]), KernelSpec("rbf", 1.0), 2)
    with pytest.raises(ValueError):
        train_kernel(np.eye(5), 1)
