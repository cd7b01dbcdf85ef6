"""Degree-weighted centering and the KSC dual eigenproblem.

The dual problem is ``D^-1 M_D Omega alpha = lambda alpha`` with ``D`` the
degree matrix of the kernel and ``M_D = I - 1 1^T D^-1 / (1^T D^-1 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

IMAG_TOL = 1e-8
DEGENERATE_TOL = 1e-10


@dataclass
class SpectralSolution:
    alphas: np.ndarray        # N_tr x (k-1), eigenvectors as columns
    eigenvalues: np.ndarray   # k-1, descending
    degrees: np.ndarray       # N_tr


def degree(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValueError(f"kernel matrix must be square, got shape {omega.shape}")
    d = omega.sum(axis=1)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise ValueError(
            f"nonpositive degree {d[bad[0]]:.3g} at row {int(bad[0])}; "
            "the kernel is not valid for spectral clustering here"
        )
    return d


def dual_matrix(omega, degrees=None) -> np.ndarray:
    """Dense ``D^-1 M_D Omega``."""
    omega = np.asarray(omega, dtype=float)
    d = degree(omega) if degrees is None else np.asarray(degrees, float)
    dinv = 1.0 / d
    centered = omega - np.outer(np.ones(len(d)), dinv @ omega) / dinv.sum()
    return dinv[:, None] * centered


def _fix_sign(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def _canonical_basis(B: np.ndarray) -> np.ndarray:
    """Deterministic basis for a degenerate eigenspace spanned by the columns of B.

    Pivot rows are chosen by column-pivoted QR; vector l takes the value 1 at
    pivot l and 0 at the other pivots, then is pushed below zero at the other
    pivots so that the sign patterns of the pivot rows differ. For k exact
    blocks this yields one-vs-rest codes.
    """
    m = B.shape[1]
    _, _, piv = scipy.linalg.qr(B.T, pivoting=True, mode="economic")
    piv = np.sort(piv[:m])
    U = B @ np.linalg.inv(B[piv])
    total = U.sum(axis=1)
    out = np.empty_like(U)
    for l in range(m):
        others = total - U[:, l]
        scale = np.abs(others).max()
        if m == 1 or scale == 0:
            out[:, l] = U[:, l]
            continue
        depth = -U[:, l].min()
        eps = 0.5 * (depth if depth > 0 else 1.0) / scale
        out[:, l] = U[:, l] - eps * others
    return out


def leading_eigvecs(w, V, k: int, center: bool = True):
    """Top k-1 real eigenpairs with the package's basis and sign conventions.

    ``w, V`` are raw (possibly complex) eigenpairs. Degenerate eigenvalues get
    the basis of ``_canonical_basis``. With ``center`` the columns are made
    orthogonal to the ones vector, which holds exactly for eigenvectors of the
    full dual problem with nonzero eigenvalue.
    """
    w = np.asarray(w)
    V = np.asarray(V)
    n = V.shape[0]
    order = np.argsort(-w.real, kind="stable")
    w, V = w[order], V[:, order]

    scale = max(1.0, np.abs(w.real).max())
    if np.abs(w.imag[: k - 1]).max() > IMAG_TOL * scale:
        raise ValueError(
            "leading eigenvalues are complex beyond tolerance; the kernel matrix is badly conditioned"
        )
    lam = w.real
    vecs = np.empty((n, len(w)))
    for j in range(len(w)):
        v = V[:, j]
        # undo an arbitrary complex phase before dropping the imaginary part
        p = v[np.argmax(np.abs(v))]
        vecs[:, j] = (v * (abs(p) / p)).real if p != 0 else v.real

    m = len(w)
    alphas = np.empty((n, k - 1))
    values = np.empty(k - 1)
    i = j = 0
    while j < k - 1:
        if i >= m:
            raise ValueError("k unsupported by spectrum: too few independent eigenvectors")
        end = i + 1
        while end < m and abs(lam[end] - lam[i]) <= DEGENERATE_TOL * scale:
            end += 1
        block = vecs[:, i:end]
        if end - i > 1:
            # real and imaginary parts of a real eigenvalue's eigenvectors are
            # eigenvectors too; together they span the space even when the
            # solver returns conjugate pairs
            raw = np.hstack([V[:, i:end].real, V[:, i:end].imag])
            raw = raw - raw.mean(axis=0) if center else raw
            u, s, _ = np.linalg.svd(raw, full_matrices=False)
            rank = min(int((s > 1e-8 * s[0]).sum()), end - i) if s[0] > 0 else 0
            block = _canonical_basis(u[:, :rank]) if rank else block[:, :0]
        take = min(block.shape[1], k - 1 - j)
        alphas[:, j:j + take] = block[:, :take]
        values[j:j + take] = lam[i:end].mean()
        j += take
        i = end

    if center:
        # remove round-off from the exact identity 1^T alpha = 0
        alphas -= alphas.mean(axis=0)
    for l in range(k - 1):
        if np.linalg.norm(alphas[:, l]) == 0:
            raise ValueError("eigenvector collapsed to zero; k unsupported by spectrum")
        alphas[:, l] = _fix_sign(alphas[:, l])
    return alphas, values


def solve_dual(omega, k: int) -> SpectralSolution:
    """Leading k-1 eigenpairs of the KSC dual problem.

    Eigenvectors have unit 2-norm with their largest-magnitude entry positive.
    Numerically degenerate eigenvalues get the basis of ``_canonical_basis``.
    """
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[0]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k - 1 >= n:
        raise ValueError(f"k-1 = {k - 1} must be smaller than the number of points {n}")
    d = degree(omega)
    w, V = scipy.linalg.eig(dual_matrix(omega, d))
    alphas, values = leading_eigvecs(w, V, k, center=True)
    return SpectralSolution(alphas, values, d)


def compute_bias(omega, alphas, degrees) -> np.ndarray:
    """Bias terms making the 1/degree-weighted mean of training projections zero."""
    omega = np.asarray(omega, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    dinv = 1.0 / np.asarray(degrees, dtype=float)
    if omega.shape[1] != alphas.shape[0] or omega.shape[0] != dinv.size:
        raise ValueError("shape mismatch between kernel, eigenvectors and degrees")
    return -(dinv @ (omega @ alphas)) / dinv.sum()


def project(omega_rows, alphas, biases) -> np.ndarray:
    """Out-of-sample projections ``Omega_rows @ alpha + b``."""
    omega_rows = np.atleast_2d(np.asarray(omega_rows, dtype=float))
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    biases = np.asarray(biases, dtype=float).ravel()
    if omega_rows.shape[1] != alphas.shape[0]:
        raise ValueError(
            f"kernel rows have {omega_rows.shape[1]} columns, expected {alphas.shape[0]} training points"
        )
    if biases.size != alphas.shape[1]:
        raise ValueError(f"{biases.size} biases for {alphas.shape[1]} eigenvectors")
    return omega_rows @ alphas + biases
