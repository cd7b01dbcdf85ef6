"""Seeded synthetic fixtures standing in for the unpublished toy datasets."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .data import Dataset

THREE_CENTERS = np.array([[0.25, 0.25], [0.75, 0.3], [0.5, 0.75]])


def gaussian_mixture(centers, n_per, std, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    n_per = np.broadcast_to(np.asarray(n_per, dtype=int), (len(centers),))
    std = np.broadcast_to(np.asarray(std, dtype=float), (len(centers),))
    pts, labels = [], []
    for c, (mu, n, s) in enumerate(zip(centers, n_per, std)):
        pts.append(mu + s * rng.standard_normal((n, centers.shape[1])))
        labels.append(np.full(n, c))
    pts = np.vstack(pts)
    labels = np.concatenate(labels)
    perm = rng.permutation(len(labels))
    return Dataset(pts[perm], labels[perm])


def three_gaussians(n: int = 600, std: float = 0.07, seed: int = 0) -> Dataset:
    """Three round 2-D clusters in the unit square."""
    sizes = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    return gaussian_mixture(THREE_CENTERS, sizes, std, seed)


def two_blobs(n: int = 300, std: float = 0.06, seed: int = 0) -> Dataset:
    centers = np.array([[0.3, 0.5], [0.7, 0.5]])
    return gaussian_mixture(centers, [n // 2, n - n // 2], std, seed)


def nested_blobs(n: int = 400, std: float = 0.035, seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Four blobs forming two well separated pairs.

    Returns the dataset (labels = blob id 0..3) and the super-cluster id of
    each point (blobs 0,1 -> 0 and 2,3 -> 1).
    """
    centers = np.array([[0.2, 0.38], [0.2, 0.62], [0.8, 0.38], [0.8, 0.62]])
    ds = gaussian_mixture(centers, n // 4, std, seed)
    return ds, ds.labels // 2


def block_kernel(sizes, seed=None, within: str = "ones") -> np.ndarray:
    """Exactly block-diagonal kernel; blocks all-ones or random positive correlations."""
    blocks = []
    rng = np.random.default_rng(seed)
    for s in sizes:
        if within == "ones":
            blocks.append(np.ones((s, s)))
        else:
            x = rng.uniform(0, 1, size=(s, 2))
            d2 = ((x[:, None] - x[None]) ** 2).sum(-1)
            blocks.append(np.exp(-d2))
    return scipy.linalg.block_diag(*blocks)


def low_rank_kernel(n: int, rank: int, noise: float = 0.1, seed: int = 0):
    """Nonnegative rank-``rank`` PSD matrix F F^T with near-indicator factor rows.

    Returns (omega, labels) where labels are the dominant factor of each row.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % rank
    rng.shuffle(labels)
    F = noise * rng.uniform(0, 1, size=(n, rank))
    F[np.arange(n), labels] += 1.0
    return F @ F.T, labels


def three_region_image(size: int = 64, noise: float = 0.05, seed: int = 0):
    """Three flat color regions with a fraction ``noise`` of pixels recolored at random.

    Top half red, bottom-left green, bottom-right blue. Returns (image, region labels).
    """
    rng = np.random.default_rng(seed)
    regions = np.zeros((size, size), dtype=int)
    regions[size // 2:, : size // 2] = 1
    regions[size // 2:, size // 2:] = 2
    palette = np.array([[200, 40, 40], [40, 180, 60], [50, 60, 200]], dtype=np.uint8)
    image = palette[regions].copy()
    mask = rng.random((size, size)) < noise
    image[mask] = rng.integers(0, 256, size=(int(mask.sum()), 3), dtype=np.uint8)
    return image, regions
