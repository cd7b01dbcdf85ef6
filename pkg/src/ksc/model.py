"""KSC training, ECOC codebook and out-of-sample prediction."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset
from .kernels import KernelSpec, gram
from .spectral import compute_bias, project, solve_dual


class SpectrumError(ValueError):
    """The requested number of clusters is not supported by the eigenvectors."""


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray  # k x (k-1) of +-1

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=int)
        if cw.ndim != 2 or cw.shape[0] < 2:
            raise ValueError("codebook needs at least two codewords")
        if not np.all(np.abs(cw) == 1):
            raise ValueError("codewords must be +-1 vectors")
        if len({tuple(r) for r in cw}) != cw.shape[0]:
            raise ValueError("codewords must be pairwise distinct")
        object.__setattr__(self, "codewords", cw)

    @property
    def k(self) -> int:
        return self.codewords.shape[0]


def binarize(values) -> np.ndarray:
    """Sign with sign(0) = +1."""
    return np.where(np.asarray(values) >= 0, 1, -1)


def build_codebook(signs, k: int) -> Codebook:
    """The k most frequent sign patterns; equal counts keep first-occurrence order."""
    signs = np.atleast_2d(np.asarray(signs, dtype=int))
    counts = Counter(map(tuple, signs))
    if len(counts) < k:
        raise SpectrumError(
            f"k unsupported by spectrum: only {len(counts)} distinct sign patterns for k={k}"
        )
    # Counter preserves insertion order and sorted() is stable
    ranked = sorted(counts.items(), key=lambda kv: -kv[1])
    return Codebook(np.array([p for p, _ in ranked[:k]]))


def hamming_decode(codes, cb: Codebook) -> np.ndarray:
    codes = np.atleast_2d(np.asarray(codes, dtype=int))
    if codes.shape[1] != cb.codewords.shape[1]:
        raise ValueError(f"code length {codes.shape[1]} does not match codebook ({cb.codewords.shape[1]})")
    dist = (codes[:, None, :] != cb.codewords[None, :, :]).sum(axis=2)
    return np.argmin(dist, axis=1)  # argmin returns the lowest id on ties


def decode(code, cb: Codebook) -> int:
    return int(hamming_decode(np.asarray(code)[None, :], cb)[0])


@dataclass
class KscModel:
    kernel: KernelSpec
    alphas: np.ndarray
    biases: np.ndarray
    codebook: Codebook
    eigenvalues: np.ndarray
    train_points: Optional[np.ndarray] = None  # None for precomputed kernels
    degrees: Optional[np.ndarray] = None
    train_labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float).ravel()
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float).ravel()
        if self.alphas.shape[1] != self.biases.size or self.biases.size != self.codebook.k - 1:
            raise ValueError("alphas, biases and codebook disagree on k-1")

    @property
    def k(self) -> int:
        return self.codebook.k

    @property
    def n_train(self) -> int:
        return self.alphas.shape[0]

    @property
    def dim(self) -> Optional[int]:
        return None if self.train_points is None else self.train_points.shape[1]

    def kernel_rows(self, points) -> np.ndarray:
        if self.train_points is None:
            raise ValueError("model was trained on a precomputed kernel; pass kernel rows instead")
        pts = points.points if isinstance(points, Dataset) else np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected d={self.dim}")
        return gram(self.kernel, pts, self.train_points)

    def project(self, points) -> np.ndarray:
        return project(self.kernel_rows(points), self.alphas, self.biases)

    def project_kernel(self, omega_rows) -> np.ndarray:
        return project(omega_rows, self.alphas, self.biases)

    def training_projections(self, omega=None) -> np.ndarray:
        if omega is None:
            omega = gram(self.kernel, self.train_points)
        return project(omega, self.alphas, self.biases)


def train_kernel(omega, k: int, kernel: Optional[KernelSpec] = None,
                 train_points=None) -> KscModel:
    """Train on a precomputed training kernel matrix."""
    omega = np.asarray(omega, dtype=float)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if omega.shape[0] <= k:
        raise ValueError(f"need more training points than clusters (N_tr={omega.shape[0]}, k={k})")
    sol = solve_dual(omega, k)
    biases = compute_bias(omega, sol.alphas, sol.degrees)
    signs = binarize(sol.alphas)
    cb = build_codebook(signs, k)
    labels = hamming_decode(signs, cb)
    return KscModel(
        kernel=kernel or KernelSpec("precomputed"),
        alphas=sol.alphas,
        biases=biases,
        codebook=cb,
        eigenvalues=sol.eigenvalues,
        train_points=None if train_points is None else np.asarray(train_points, float),
        degrees=sol.degrees,
        train_labels=labels,
    )


def train(train: Dataset, kernel: KernelSpec, k: int) -> KscModel:
    """Fit a KSC model: eigenvectors, biases, codebook and training assignments."""
    pts = train.points if isinstance(train, Dataset) else np.asarray(train, float)
    return train_kernel(gram(kernel, pts), k, kernel, pts)


def predict(model: KscModel, points) -> np.ndarray:
    """Cluster ids for unseen points via projection, sign and Hamming decoding."""
    return hamming_decode(binarize(model.project(points)), model.codebook)


def predict_kernel(model: KscModel, omega_rows) -> np.ndarray:
    return hamming_decode(binarize(model.project_kernel(omega_rows)), model.codebook)
