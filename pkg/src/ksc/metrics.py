"""Partition agreement and internal quality scores: ARI, NMI, silhouette, modularity."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset


def _contingency(a, b) -> np.ndarray:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise ValueError(f"label sequences differ in length: {a.size} vs {b.size}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _pairs(x):
    x = np.asarray(x, dtype=float)
    return (x * (x - 1) / 2).sum()


def ari(a, b) -> float:
    """Adjusted Rand index from the pair-counting contingency table."""
    table = _contingency(a, b)
    n = table.sum()
    if n < 2:
        raise ValueError("ARI needs at least two points")
    sum_ij = _pairs(table)
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    total = n * (n - 1) / 2
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial in the same way (all-one-cluster or all-singletons)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Mutual information normalized by the geometric mean of the entropies."""
    table = _contingency(a, b).astype(float)
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    n = table.sum()
    pij = table / n
    pa = pij.sum(axis=1, keepdims=True)
    pb = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / (pa @ pb)[nz])).sum())
    return max(0.0, mi / np.sqrt(ha * hb))


def silhouette(dist, labels, metric: str = "euclidean") -> float:
    """Mean silhouette value.

    ``dist`` is a square distance matrix, or a Dataset whose pairwise
    distances are computed with ``metric``. Points in singleton clusters score 0.
    """
    labels = np.asarray(labels).ravel()
    if isinstance(dist, Dataset):
        dist = cdist(dist.points, dist.points, metric)
    dist = np.asarray(dist, dtype=float)
    if dist.shape != (labels.size, labels.size):
        raise ValueError(f"distance matrix shape {dist.shape} does not match {labels.size} labels")
    uniq, inv = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    n = labels.size
    member = np.zeros((n, uniq.size))
    member[np.arange(n), inv] = 1.0
    sizes = member.sum(axis=0)
    sums = dist @ member  # n x k, total distance to each cluster
    own = sizes[inv]
    a = np.where(own > 1, sums[np.arange(n), inv] / np.maximum(own - 1, 1), 0.0)
    means = sums / sizes
    means[np.arange(n), inv] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def modularity(adj, labels) -> float:
    """Newman modularity of a weighted undirected graph partition."""
    adj = np.asarray(adj, dtype=float)
    labels = np.asarray(labels).ravel()
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] != labels.size:
        raise ValueError("adjacency must be square and match the number of labels")
    if (adj < 0).any():
        raise ValueError("modularity needs nonnegative edge weights")
    deg = adj.sum(axis=1)
    two_m = deg.sum()
    if two_m <= 0:
        raise ValueError("graph has zero total edge weight")
    q = 0.0
    for c in np.unique(labels):
        idx = labels == c
        inside = adj[np.ix_(idx, idx)].sum()
        dc = deg[idx].sum()
        q += inside / two_m - (dc / two_m) ** 2
    # one cluster: inside = 2m and dc = 2m, identically zero
    return 0.0 if np.unique(labels).size == 1 else float(q)


modularity_eval = modularity


def cluster_sizes(labels) -> dict:
    uniq, counts = np.unique(np.asarray(labels), return_counts=True)
    return {int(u): int(c) for u, c in zip(uniq, counts)}
