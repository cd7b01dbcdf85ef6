"""Hierarchical KSC: Fisher-thresholded model sweep and agglomerative thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .kernels import KernelSpec
from .model import predict, train as train_ksc
from .selection import grid_search

ZERO_DISTANCE = 1e-12  # cosine distances at or below this count as zero


@dataclass
class Linkage:
    """Binary merge tree over the bottom-level clusters.

    Leaves are ids ``0..n_leaves-1``; the i-th merge creates node
    ``n_leaves + i``. ``level_labels[t]`` is the partition of the points at
    level t, each level a coarsening of the one below, the last a single cluster.
    """

    merges: list
    n_leaves: int
    level_labels: list
    level_k: list = field(default_factory=list)
    thresholds: Optional[np.ndarray] = None

    def check(self):
        """Raise AssertionError if a structural invariant is violated."""
        n_nodes = self.n_leaves + len(self.merges)
        used = []
        for i, (a, b, _) in enumerate(self.merges):
            assert a != b
            assert a < self.n_leaves + i and b < self.n_leaves + i, "merge references a future node"
            used += [a, b]
        assert len(used) == len(set(used)), "a node is merged twice"
        assert set(used) == set(range(n_nodes - 1)) or n_nodes == 1, "some node never merged"
        counts = [np.unique(l).size for l in self.level_labels]
        assert counts[0] == self.n_leaves
        assert all(x > y for x, y in zip(counts, counts[1:])), "cluster count must strictly decrease"
        assert counts[-1] == 1, "top level must be a single cluster"
        for lo, hi in zip(self.level_labels, self.level_labels[1:]):
            for c in np.unique(lo):
                assert np.unique(hi[lo == c]).size == 1, "level is not a union of the level below"

    def to_text(self) -> str:
        return "".join(f"{a} {b} {lvl}\n" for a, b, lvl in self.merges)


def _relabel(labels) -> np.ndarray:
    """Contiguous ids in order of first appearance."""
    labels = np.asarray(labels).ravel()
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=int)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv]


def linkage_from_levels(levels: Sequence[np.ndarray], level_k=None, thresholds=None) -> Linkage:
    """Merge tree from a sequence of nested partitions (finest first).

    Levels that merge nothing are dropped and a single-cluster root is
    appended when the last level has more than one cluster.
    """
    levels = [_relabel(l) for l in levels]
    level_k = list(level_k) if level_k is not None else [None] * len(levels)
    kept, kept_k = [levels[0]], [level_k[0]]
    for lab, kk in zip(levels[1:], level_k[1:]):
        prev = kept[-1]
        for c in np.unique(prev):
            if np.unique(lab[prev == c]).size != 1:
                raise ValueError("levels are not nested")
        if np.unique(lab).size < np.unique(prev).size:
            kept.append(lab)
            kept_k.append(kk)
        elif kk is not None and kk == np.unique(prev).size:
            kept_k[-1] = kk  # same partition; prefer the model whose k matches it
    if np.unique(kept[-1]).size > 1:
        kept.append(np.zeros_like(kept[0]))
        kept_k.append(1)

    n_leaves = int(np.unique(kept[0]).size)
    node_of = {c: c for c in range(n_leaves)}  # current-level cluster -> tree node
    merges = []
    next_id = n_leaves
    for t in range(1, len(kept)):
        lo, hi = kept[t - 1], kept[t]
        new_node_of = {}
        for parent in np.unique(hi):
            children = sorted(np.unique(lo[hi == parent]).tolist())
            node = node_of[children[0]]
            for c in children[1:]:
                merges.append((node, node_of[c], t))
                node = next_id
                next_id += 1
            new_node_of[int(parent)] = node
        node_of = new_node_of
    return Linkage(merges, n_leaves, kept, kept_k, thresholds)


def plurality_map(fine, coarse) -> np.ndarray:
    """Map every fine cluster to the coarse cluster holding most of its members."""
    fine = np.asarray(fine).ravel()
    coarse = np.asarray(coarse).ravel()
    out = np.empty_like(fine)
    for c in np.unique(fine):
        members = fine == c
        vals, counts = np.unique(coarse[members], return_counts=True)
        out[members] = vals[np.argmax(counts)]  # np.unique sorts, so ties pick the lowest id
    return out


def hksc(train: Dataset, val: Dataset, test: Dataset, sigma_grid, k_max: int,
         theta: float, k_min: int = 2) -> Linkage:
    """Hierarchy from the (k, sigma^2) pairs whose best Fisher score exceeds theta."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    sigma_grid = list(sigma_grid)
    if not sigma_grid or k_max < k_min:
        raise ValueError("empty parameter grid")
    grid = grid_search(train, val, "rbf", range(k_min, k_max + 1), sigma_grid, "fisher")
    pairs = []
    for k in range(k_min, k_max + 1):
        entries = [e for e in grid.entries if e.k == k]
        best = max(entries, key=lambda e: (e.value, -e.bandwidth))
        if math.isfinite(best.value) and best.value > theta:
            pairs.append((k, best.bandwidth))
    if not pairs:
        raise ValueError("no valid hierarchy levels: no (k, sigma^2) pair passes the Fisher threshold")

    pairs.sort(key=lambda p: -p[0])
    raw = [predict(train_ksc(train, KernelSpec("rbf", s2), k), test) for k, s2 in pairs]
    levels = [raw[0]]
    ks = [pairs[0][0]]
    for (k, _), lab in zip(pairs[1:], raw[1:]):
        levels.append(plurality_map(levels[-1], lab))
        ks.append(k)
    return linkage_from_levels(levels, ks)


def pairwise_cosine(points) -> np.ndarray:
    """Cosine distances between rows; zero rows are at distance 1 from everything."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    norms = np.linalg.norm(points, axis=1)
    unit = np.divide(points, norms[:, None], out=np.zeros_like(points), where=norms[:, None] > 0)
    d = np.clip(1.0 - unit @ unit.T, 0.0, 2.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def threshold_set(val_proj, levels: int) -> np.ndarray:
    """Increasing distance thresholds at quantiles t/(levels+1) of the nonzero
    pairwise cosine distances between validation projections.

    Distances within rounding of zero (identical directions) are dropped.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    val_proj = np.atleast_2d(np.asarray(val_proj, dtype=float))
    if val_proj.shape[0] < 2:
        raise ValueError("need at least two validation points")
    d = pairwise_cosine(val_proj)
    vals = d[np.triu_indices_from(d, 1)]
    vals = vals[vals > ZERO_DISTANCE]
    if vals.size == 0:
        raise ValueError("all pairwise distances are zero")
    q = np.quantile(vals, np.arange(1, levels + 1) / (levels + 1))
    return np.unique(q)


def level_cluster(points_proj, threshold: float, dist=None) -> np.ndarray:
    """Greedy peeling: the unassigned point with most unassigned neighbours within
    ``threshold`` (cosine distance) seeds a cluster with those neighbours."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    d = pairwise_cosine(points_proj) if dist is None else np.asarray(dist, dtype=float)
    near = d <= threshold
    n = d.shape[0]
    labels = np.full(n, -1)
    free = np.ones(n, dtype=bool)
    c = 0
    while free.any():
        counts = np.where(free, (near & free[None, :]).sum(axis=1), -1)
        seed = int(np.argmax(counts))
        members = near[seed] & free
        labels[members] = c
        free &= ~members
        c += 1
    return labels


def agglomerate(proj, thresholds) -> list:
    """Nested partitions of the projection rows, one per threshold used."""
    proj = np.atleast_2d(np.asarray(proj, dtype=float))
    labels = level_cluster(proj, thresholds[0])
    levels = [labels]
    for thr in thresholds[1:]:
        if np.unique(labels).size == 1:
            break
        ids = np.unique(labels)
        centroids = np.array([proj[labels == c].mean(axis=0) for c in ids])
        upper = level_cluster(centroids, thr)
        labels = upper[np.searchsorted(ids, labels)]
        levels.append(labels)
    return levels


def ahksc(train: Dataset, val: Dataset, test: Dataset, kernel: KernelSpec, k: int,
          levels: int, return_validation: bool = False):
    """Agglomerative hierarchy over the test points.

    Thresholds come from the validation projections and are reused unchanged
    on the test projections.
    """
    model = train_ksc(train, kernel, k)
    vproj = model.project(val)
    thresholds = threshold_set(vproj, levels)
    test_link = linkage_from_levels(agglomerate(model.project(test), thresholds), thresholds=thresholds)
    if return_validation:
        val_link = linkage_from_levels(agglomerate(vproj, thresholds), thresholds=thresholds)
        return test_link, val_link
    return test_link
