"""Kernel functions for vectors, histograms, documents and time series."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.stats import rankdata

KINDS = ("rbf", "chi2_rbf", "cosine", "corr_rbf", "precomputed")
_NEEDS_BANDWIDTH = ("rbf", "chi2_rbf", "corr_rbf")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus its bandwidth (sigma^2) and, for corr_rbf, the correlation type."""

    kind: str = "rbf"
    bandwidth: Optional[float] = None
    correlation: str = "pearson"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; choose from {KINDS}")
        if self.kind in _NEEDS_BANDWIDTH:
            if self.bandwidth is None or not self.bandwidth > 0 or not math.isfinite(self.bandwidth):
                raise ValueError(f"{self.kind} kernel needs a positive bandwidth, got {self.bandwidth}")
        if self.correlation not in ("pearson", "spearman"):
            raise ValueError(f"correlation must be pearson or spearman, got {self.correlation!r}")

    def with_bandwidth(self, bandwidth: float) -> "KernelSpec":
        return KernelSpec(self.kind, bandwidth, self.correlation)

    def params(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in _NEEDS_BANDWIDTH:
            out["bandwidth"] = float(self.bandwidth)
        if self.kind == "corr_rbf":
            out["correlation"] = self.correlation
        return out


def chi2_distance(x, y) -> float:
    """Symmetric chi-square statistic; bins empty in both histograms are skipped."""
    total = 0.0
    for a, b in zip(x, y):
        s = a + b
        if s != 0:
            total += (a - b) ** 2 / s
    return total


def _correlation(x, y, method: str) -> float:
    if method == "spearman":
        x, y = rankdata(x), rankdata(y)
    xc = np.asarray(x, float) - np.mean(x)
    yc = np.asarray(y, float) - np.mean(y)
    nx, ny = math.sqrt(float(xc @ xc)), math.sqrt(float(yc @ yc))
    if nx == 0 or ny == 0:
        raise ValueError("correlation undefined for a constant vector")
    return float(np.clip(xc @ yc / (nx * ny), -1.0, 1.0))


def evaluate(spec: KernelSpec, x, y) -> float:
    """Kernel value K(x, y) for a single pair of vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {y.size}")
    if spec.kind == "rbf":
        return math.exp(-float(((x - y) ** 2).sum()) / spec.bandwidth)
    if spec.kind == "chi2_rbf":
        if (x < 0).any() or (y < 0).any():
            raise ValueError("chi2 kernel requires nonnegative inputs")
        return math.exp(-chi2_distance(x, y) / spec.bandwidth)
    if spec.kind == "cosine":
        nx, ny = math.sqrt(float(x @ x)), math.sqrt(float(y @ y))
        if nx == 0 or ny == 0:
            raise ValueError("cosine kernel undefined for a zero-norm vector")
        return float(x @ y) / (nx * ny)
    if spec.kind == "corr_rbf":
        if x.size < 2:
            raise ValueError("correlation kernel needs vectors of length >= 2")
        r = _correlation(x, y, spec.correlation)
        return math.exp(-(0.5 * (1.0 - r)) / spec.bandwidth)
    raise ValueError("precomputed kernels cannot be evaluated pointwise")


def _chi2_matrix(X, Y, symmetric: bool, block_elems: int = 4_000_000) -> np.ndarray:
    n, m, d = X.shape[0], Y.shape[0], X.shape[1]
    out = np.empty((n, m))
    step = max(1, block_elems // max(1, m * d))
    for start in range(0, n, step):
        xb = X[start:start + step, None, :]
        num = (xb - Y[None, :, :]) ** 2
        den = xb + Y[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        out[start:start + step] = terms.sum(axis=2)
    if symmetric:
        out = 0.5 * (out + out.T)
        np.fill_diagonal(out, 0.0)
    return out


def _unit_rows(X, what: str) -> np.ndarray:
    norms = np.sqrt((X * X).sum(axis=1))
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ValueError(f"{what} undefined for row {int(bad[0])} (zero norm)")
    return X / norms[:, None]


def _corr_rows(X, method: str) -> np.ndarray:
    if method == "spearman":
        X = rankdata(X, axis=1)
    Xc = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt((Xc * Xc).sum(axis=1))
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ValueError(f"correlation undefined for constant row {int(bad[0])}")
    return Xc / norms[:, None]


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Kernel matrix between the rows of X and the rows of Y (Y defaults to X).

    With ``Y=None`` the result is exactly symmetric.
    """
    if spec.kind == "precomputed":
        raise ValueError("precomputed kernels are supplied as matrices, not built from points")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sym = Y is None
    Y = X if sym else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, Y has {Y.shape[1]}")

    if spec.kind == "rbf":
        d2 = squareform(pdist(X, "sqeuclidean")) if sym else cdist(X, Y, "sqeuclidean")
        return np.exp(-d2 / spec.bandwidth)
    if spec.kind == "chi2_rbf":
        for name, M in (("X", X), ("Y", Y)):
            neg = np.argwhere(M < 0)
            if neg.size:
                raise ValueError(f"chi2 kernel requires nonnegative inputs ({name} row {int(neg[0, 0])})")
        return np.exp(-_chi2_matrix(X, Y, sym) / spec.bandwidth)
    if spec.kind == "cosine":
        if (X < 0).any() or (Y < 0).any():
            warnings.warn("cosine kernel on signed data may give nonpositive degrees", stacklevel=2)
        U = _unit_rows(X, "cosine kernel")
        V = U if sym else _unit_rows(Y, "cosine kernel")
        G = U @ V.T
        return 0.5 * (G + G.T) if sym else G
    if spec.kind == "corr_rbf":
        if X.shape[1] < 2:
            raise ValueError("correlation kernel needs vectors of length >= 2")
        U = _corr_rows(X, spec.correlation)
        V = U if sym else _corr_rows(Y, spec.correlation)
        R = np.clip(U @ V.T, -1.0, 1.0)
        if sym:
            R = 0.5 * (R + R.T)
            np.fill_diagonal(R, 1.0)
        return np.exp(-(0.5 * (1.0 - R)) / spec.bandwidth)
    raise AssertionError(spec.kind)


def combine(omega1, omega2, rho: float) -> np.ndarray:
    """Convex combination rho * omega1 + (1 - rho) * omega2 of two kernel matrices."""
    omega1 = np.asarray(omega1, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    if omega1.shape != omega2.shape:
        raise ValueError(f"shape mismatch: {omega1.shape} vs {omega2.shape}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if rho == 1.0:
        return omega1.copy()
    if rho == 0.0:
        return omega2.copy()
    return rho * omega1 + (1.0 - rho) * omega2
