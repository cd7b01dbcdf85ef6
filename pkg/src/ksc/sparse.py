"""Reduced-set KSC.

Two routes to a model that only needs kernel evaluations against a small
subset of the training points:

* low-rank training from a pivoted incomplete Cholesky factor ``G`` of the
  kernel matrix, followed by a least-squares fit of expansion coefficients
  on the pivot points;
* sparsifying the eigenvectors of a dense model with a group lasso or an
  iteratively reweighted L1 penalty, keeping only rows with nonzero weights.

Feature maps never appear explicitly: every reconstruction error is a
quadratic form in the kernel matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .data import Dataset
from .kernels import KernelSpec, gram
from .model import Codebook, KscModel, binarize, build_codebook, hamming_decode
from .spectral import compute_bias, leading_eigvecs, project

SOURCES = ("icd", "group_lasso", "reweighted_l1")
NEG_DIAG_TOL = 1e-10
ROW_ZERO_TOL = 1e-6


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class IcdFactor:
    G: np.ndarray            # N x R, lower triangular in pivot order
    pivots: np.ndarray       # length R, distinct
    residual_trace: float    # trace(Omega - G G^T)

    @property
    def rank(self) -> int:
        return self.G.shape[1]

    def approx(self) -> np.ndarray:
        return self.G @ self.G.T


def icd(omega, tol: Optional[float] = None, r_max: Optional[int] = None) -> IcdFactor:
    """Greedy pivoted incomplete Cholesky factorization ``Omega ~= G G^T``.

    The next pivot is the largest remaining diagonal residual (lowest index on
    ties). Stops once the residual trace is at most ``tol`` or ``r_max``
    columns exist. Defaults: with neither given, ``tol = 1e-6 * trace`` and
    ``r_max = N // 10``; an explicit ``tol`` alone lifts the column cap to N.
    """
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[0]
    if omega.ndim != 2 or omega.shape[1] != n:
        raise ValueError(f"kernel matrix must be square, got shape {omega.shape}")
    diag = np.diag(omega).copy()
    trace = float(diag.sum())
    scale = max(1.0, float(np.abs(diag).max()) if n else 1.0)
    if (diag < -NEG_DIAG_TOL * scale).any():
        raise ValueError("matrix not PSD: negative diagonal entry")
    if tol is None and r_max is None:
        tol, r_max = 1e-6 * trace, max(1, n // 10)
    elif tol is None:
        tol = 1e-6 * trace
    elif r_max is None:
        r_max = n
    if tol < 0 or r_max < 0:
        raise ValueError("tol and r_max must be nonnegative")
    if not (tol > 0 or r_max >= 1):
        raise ValueError("need tol > 0 or r_max >= 1")
    r_max = min(int(r_max), n)

    G = np.zeros((n, r_max))
    pivots = []
    resid = diag
    r = 0
    while r < r_max and resid.sum() > tol:
        piv = int(np.argmax(resid))
        if resid[piv] <= 0:
            break
        col = omega[:, piv] - G[:, :r] @ G[piv, :r]
        col /= np.sqrt(resid[piv])
        col[pivots] = 0.0  # exact zeros above the diagonal in pivot order
        G[:, r] = col
        resid = resid - col ** 2
        resid[piv] = 0.0
        if (resid < -NEG_DIAG_TOL * scale).any():
            raise ValueError("matrix not PSD: negative diagonal residual")
        pivots.append(piv)
        r += 1
    resid_total = float(np.trace(omega) - (G[:, :r] ** 2).sum())
    return IcdFactor(G[:, :r].copy(), np.asarray(pivots, dtype=int), max(0.0, resid_total))


def _factor_degrees(G) -> np.ndarray:
    d = G @ G.sum(axis=0)  # row sums of G G^T in O(NR)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise ValueError(f"nonpositive approximate degree at row {int(bad[0])}")
    return d


def reduced_eigproblem(factor: IcdFactor, k: int, lift: str = "exact"):
    """Leading k-1 eigenpairs of the dual problem on ``G G^T`` via an R x R problem.

    With ``G = U Psi W^T`` the problem ``U^T D^-1 M_D U Psi^2 delta = lambda delta``
    shares its nonzero spectrum with the full N x N problem. ``lift`` maps
    delta back to N dimensions: ``"galerkin"`` returns ``U delta``;
    ``"exact"`` returns ``D^-1 M_D U Psi^2 delta`` (scaled), which is an
    eigenvector of the full problem on ``G G^T``. Returns
    ``(alphas, eigenvalues, degrees)``.
    """
    if lift not in ("exact", "galerkin"):
        raise ValueError(f"unknown lift {lift!r}")
    G = np.asarray(factor.G, dtype=float)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k - 1 > G.shape[1]:
        raise ValueError(f"k-1 = {k - 1} exceeds the factor rank R = {G.shape[1]}")
    U, psi, _ = np.linalg.svd(G, full_matrices=False)
    d = _factor_degrees(G)
    dinv = 1.0 / d
    ud = U.T @ dinv
    C = U.T @ (dinv[:, None] * U) - np.outer(ud, ud) / dinv.sum()
    w, delta = scipy.linalg.eig(C * psi ** 2)
    V = U @ delta
    if lift == "exact":
        y = U @ (psi[:, None] ** 2 * delta)
        y = dinv[:, None] * (y - (dinv @ y) / dinv.sum())
        # for a zero eigenvalue the lift vanishes; keep U delta there
        small = np.linalg.norm(y, axis=0) <= 1e-12 * np.linalg.norm(V, axis=0)
        V = np.where(small[None, :], V, y)
    alphas, values = leading_eigvecs(w, V, k, center=(lift == "exact"))
    return alphas, values, d


def reduced_set_fit(omega_chi_chi, omega_chi_phi, alphas) -> np.ndarray:
    """Coefficients on the reduced set that best reproduce ``sum_i alpha_i phi(x_i)``.

    Solves ``Omega_chichi zeta = Omega_chiphi alpha`` column by column, falling
    back to the minimum-norm least-squares solution when singular.
    """
    A = np.atleast_2d(np.asarray(omega_chi_chi, dtype=float))
    B = np.atleast_2d(np.asarray(omega_chi_phi, dtype=float))
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("reduced kernel matrix must be symmetric")
    rhs = B @ alphas
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(A, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        return scipy.linalg.lstsq(A, rhs)[0]


def cluster_weights(labels) -> np.ndarray:
    """Per-row penalty weight: fraction of training points in that row's cluster."""
    labels = np.asarray(labels).ravel()
    _, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
    return counts[inv] / labels.size


def group_lasso_objective(omega, alphas, beta, lam, weights) -> float:
    diff = np.asarray(alphas, float) - np.asarray(beta, float)
    recon = 0.5 * float(np.sum(diff * (omega @ diff)))
    return recon + lam * float(np.sum(weights * np.linalg.norm(beta, axis=1)))


def zero_threshold(omega, alphas, weights) -> float:
    """Smallest penalty at which all-zero rows satisfy the optimality conditions."""
    grad = np.linalg.norm(np.asarray(omega, float) @ np.asarray(alphas, float), axis=1)
    return float(np.max(grad / np.asarray(weights, float)))


@dataclass
class FitInfo:
    n_iter: int
    converged: bool
    objective: list = field(default_factory=list)


def group_lasso(omega, alphas, lam: float, weights, tol: float = 1e-8, max_iter: int = 100,
                return_info: bool = False):
    """Row-sparse approximation of the eigenvector matrix.

    Minimizes ``0.5 * tr((alpha-beta)^T Omega (alpha-beta)) + lam * sum_l w_l ||beta_l||``
    by exact blockwise coordinate descent over rows, starting from
    ``beta = alpha``. ``weights`` are the ``w_l`` (see ``cluster_weights``).
    Hitting ``max_iter`` issues a ConvergenceWarning.
    """
    omega = np.asarray(omega, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    weights = np.asarray(weights, dtype=float).ravel()
    n = omega.shape[0]
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if weights.size != n or (weights <= 0).any():
        raise ValueError("need one positive weight per training row")
    diag = np.diag(omega)
    if (diag <= 0).any():
        raise ValueError("kernel diagonal must be positive")

    thresh = lam * weights
    if (np.linalg.norm(omega @ alphas, axis=1) <= thresh).all():
        beta = np.zeros_like(alphas)
        info = FitInfo(0, True, [group_lasso_objective(omega, alphas, beta, lam, weights)])
        return (beta, info) if return_info else beta

    beta = alphas.copy()
    resid = omega @ (alphas - beta)  # Omega (alpha - beta)
    info = FitInfo(0, False, [group_lasso_objective(omega, alphas, beta, lam, weights)])
    for it in range(1, max_iter + 1):
        change = 0.0
        for l in range(n):
            s = resid[l] + diag[l] * beta[l]
            norm_s = np.linalg.norm(s)
            if norm_s <= thresh[l]:
                new = np.zeros_like(s)
            else:
                new = ((norm_s - thresh[l]) / (diag[l] * norm_s)) * s
            delta = new - beta[l]
            if delta.any():
                resid -= np.outer(omega[:, l], delta)
                beta[l] = new
                change = max(change, float(np.abs(delta).max()))
        info.n_iter = it
        info.objective.append(group_lasso_objective(omega, alphas, beta, lam, weights))
        if change < tol:
            info.converged = True
            break
    if not info.converged:
        warnings.warn(f"group lasso did not converge in {max_iter} sweeps", ConvergenceWarning,
                      stacklevel=2)
    return (beta, info) if return_info else beta


def reweighted_l1(omega, alphas, rho: float, n_outer: int = 10, eps: float = 1e-4,
                  tol: float = 1e-8, zero_lambda: bool = False, rescale: bool = True,
                  return_info: bool = False):
    """Iteratively reweighted sparse approximation of the eigenvectors.

    Each outer step solves ``(Omega + diag(Lambda_l^2) + rho I) beta_l = Omega alpha_l``
    per column, then sets ``Lambda = 1 / (|beta| + eps)``. Lambda starts at
    ones (or stays zero with ``zero_lambda``). Rows whose largest entry is
    below 1e-6 in magnitude come back as exact zeros.

    The penalty is not scale invariant. With ``rescale`` the columns are
    first brought to unit RMS entry (times sqrt(N)) and the result is scaled
    back; unit-norm columns otherwise lose every row to the initial penalty.
    The truncation and ``eps`` apply on the rescaled problem.
    """
    omega = np.asarray(omega, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    n, m = alphas.shape
    scale = np.sqrt(n) if rescale else 1.0
    alphas = alphas * scale
    lam = np.zeros((n, m)) if zero_lambda else np.ones((n, m))
    rhs = omega @ alphas
    beta = np.zeros_like(alphas)
    info = FitInfo(0, False)
    for it in range(1, n_outer + 1):
        new = np.empty_like(beta)
        for l in range(m):
            A = omega + np.diag(lam[:, l] ** 2) + rho * np.eye(n)
            new[:, l] = _solve_spd(A, rhs[:, l])
        change = float(np.abs(new - beta).max())
        beta = new
        info.n_iter = it
        if not zero_lambda:
            lam = 1.0 / (np.abs(beta) + eps)
        if change < tol:
            info.converged = True
            break
    beta[np.abs(beta).max(axis=1) < ROW_ZERO_TOL] = 0.0
    beta /= scale
    return (beta, info) if return_info else beta


def _solve_spd(A, b):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(A, b, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        warnings.warn("singular reweighted subproblem; adding 1e-10 diagonal jitter", stacklevel=3)
        return scipy.linalg.solve(A + 1e-10 * np.eye(A.shape[0]), b, assume_a="sym")


@dataclass
class ReducedModel:
    """KSC model expanded over a subset of the training points."""

    reduced_indices: np.ndarray   # positions in the training set
    coefficients: np.ndarray      # len(reduced_indices) x (k-1)
    biases: np.ndarray
    kernel: KernelSpec
    source: str
    codebook: Optional[Codebook] = None
    reduced_points: Optional[np.ndarray] = None
    n_train: Optional[int] = None
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        self.reduced_indices = np.asarray(self.reduced_indices, dtype=int).ravel()
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.ndim == 1:
            self.coefficients = self.coefficients[:, None]
        self.biases = np.asarray(self.biases, dtype=float).ravel()
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}; choose from {SOURCES}")
        if self.coefficients.shape[0] != self.reduced_indices.size:
            raise ValueError("coefficient rows must align with the reduced indices")
        if self.coefficients.shape[1] != self.biases.size:
            raise ValueError("one bias per coefficient column")

    @property
    def size(self) -> int:
        return int(self.reduced_indices.size)

    def full_coefficients(self) -> np.ndarray:
        """Coefficients scattered into an N_tr x (k-1) matrix, zero elsewhere."""
        if self.n_train is None:
            raise ValueError("training-set size unknown")
        out = np.zeros((self.n_train, self.coefficients.shape[1]))
        out[self.reduced_indices] = self.coefficients
        return out

    def kernel_rows(self, points) -> np.ndarray:
        if self.reduced_points is None:
            raise ValueError("reduced model has no stored points; pass kernel rows instead")
        pts = points.points if isinstance(points, Dataset) else np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.reduced_points.shape[1]:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected d={self.reduced_points.shape[1]}")
        return gram(self.kernel, pts, self.reduced_points)

    def project(self, points) -> np.ndarray:
        return project(self.kernel_rows(points), self.coefficients, self.biases)


def sparse_predict(model: ReducedModel, points, codebook: Optional[Codebook] = None) -> np.ndarray:
    """Labels from kernel evaluations against the reduced set only."""
    if model.size == 0:
        raise ValueError("reduced model has an empty reduced set")
    cb = codebook if codebook is not None else model.codebook
    if cb is None:
        raise ValueError("no codebook given")
    return hamming_decode(binarize(model.project(points)), cb)


def _reduced_from_beta(beta, omega, degrees, kernel, source, codebook, train_points) -> ReducedModel:
    keep = np.flatnonzero(np.abs(beta).max(axis=1) > 0)
    coef = beta[keep]
    biases = (compute_bias(omega[:, keep], coef, degrees) if keep.size
              else np.zeros(beta.shape[1]))
    pts = None if train_points is None else np.asarray(train_points, float)[keep]
    return ReducedModel(keep, coef, biases, kernel, source, codebook, pts, beta.shape[0])


def sparsify(model: KscModel, method: str = "group_lasso", lam: float = 0.0, rho: float = 0.0,
             omega=None) -> ReducedModel:
    """Reduced model from a dense one via a row-sparse penalty on its eigenvectors.

    Biases are recomputed on the kept rows with the dense degrees so that the
    degree-weighted mean of the training projections stays zero.
    """
    if omega is None:
        if model.train_points is None:
            raise ValueError("precomputed-kernel model: pass the training kernel matrix")
        omega = gram(model.kernel, model.train_points)
    omega = np.asarray(omega, dtype=float)
    if method == "group_lasso":
        beta = group_lasso(omega, model.alphas, lam, cluster_weights(model.train_labels))
    elif method == "reweighted_l1":
        beta = reweighted_l1(omega, model.alphas, rho)
    else:
        raise ValueError(f"unknown sparsification method {method!r}")
    degrees = model.degrees if model.degrees is not None else omega.sum(axis=1)
    return _reduced_from_beta(beta, omega, degrees, model.kernel, method, model.codebook,
                              model.train_points)


def train_icd(train: Dataset, kernel: KernelSpec, k: int, tol: Optional[float] = None,
              r_max: Optional[int] = None, omega=None, lift: str = "exact") -> ReducedModel:
    """Low-rank KSC: ICD factor, R x R eigenproblem, reduced-set coefficients.

    The codebook comes from the signs of the approximate eigenvectors; biases
    use the degrees of ``G G^T``.
    """
    pts = train.points if isinstance(train, Dataset) else np.asarray(train, float)
    if omega is None:
        omega = gram(kernel, pts)
    factor = icd(omega, tol, r_max)
    if factor.rank == 0:
        raise ValueError("incomplete Cholesky produced an empty reduced set")
    alphas, values, d = reduced_eigproblem(factor, k, lift)
    codebook = build_codebook(binarize(alphas), k)
    piv = factor.pivots
    zeta = reduced_set_fit(omega[np.ix_(piv, piv)], omega[piv], alphas)
    biases = compute_bias(omega[:, piv], zeta, d)
    return ReducedModel(piv, zeta, biases, kernel, "icd", codebook, pts[piv], len(pts), values)
